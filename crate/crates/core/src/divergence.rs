//! Closed-form per-site KL divergences between pairwise isotropic GMRFs.
//!
//! For `D(p, q)` every covariance term comes from moments measured under
//! p; `D(q, p)` mirrors this with q's moments. The leading term of each
//! bracket, `E_p[(x_i − μ₁)²]` (or `E_p[(x⃗_i − μ⃗₁)(x⃗_i − μ⃗₁)ᵀ]`), is the
//! measured centre variance of p's patches, while the log-ratio and the
//! `1/(2σ²)` normalizers use the model parameters. When the moments carry
//! σ² as their centre variance this is exactly the textbook form.
//!
//! Values are per site. [`KLReport::field_totals`] scales them by n.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{GmrfError, Result};
use crate::lattice::{CENTER_POSITION, NEIGHBOR_POSITIONS};
use crate::moments::{MultiPatchMoments, PatchMoments, PlusNorm};
use crate::params::{ModelParams, MultiModelParams};

#[derive(Debug, Clone)]
pub struct UniKLInputs {
    pub params_p: ModelParams,
    pub params_q: ModelParams,
    pub moments_p: PatchMoments,
    pub moments_q: PatchMoments,
    pub delta: usize,
}

impl UniKLInputs {
    pub fn new(
        params_p: ModelParams,
        params_q: ModelParams,
        moments_p: PatchMoments,
        moments_q: PatchMoments,
    ) -> Self {
        UniKLInputs {
            params_p,
            params_q,
            moments_p,
            moments_q,
            delta: NEIGHBOR_POSITIONS.len(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiKLInputs {
    pub params_p: MultiModelParams,
    pub params_q: MultiModelParams,
    pub moments_p: MultiPatchMoments,
    pub moments_q: MultiPatchMoments,
    pub delta: usize,
    /// Added to both covariances before factorizing. Zero by default.
    pub ridge: f64,
}

impl MultiKLInputs {
    pub fn new(
        params_p: MultiModelParams,
        params_q: MultiModelParams,
        moments_p: MultiPatchMoments,
        moments_q: MultiPatchMoments,
    ) -> Self {
        MultiKLInputs {
            params_p,
            params_q,
            moments_p,
            moments_q,
            delta: NEIGHBOR_POSITIONS.len(),
            ridge: 0.0,
        }
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }
}

/// Additive pieces of one directed divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KLTerms {
    /// log(σ₂/σ₁), or ½ log(|Σ₂|/|Σ₁|).
    pub log_ratio: f64,
    /// −½ E_p[own residual²] / σ₁².
    pub a_term: f64,
    /// ½ E_p[other residual²] / σ₂², without the mean shift.
    pub b_term: f64,
    /// ½ (μ₁ − μ₂)² (1 − Δβ₂)² / σ₂², or the Mahalanobis analogue.
    pub mean_shift: f64,
}

impl KLTerms {
    pub fn total(&self) -> f64 {
        self.log_ratio + self.a_term + self.b_term + self.mean_shift
    }
}

/// Trace sums behind one directed multivariate divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceTerms {
    /// Tr(Σ₁⁻¹ Σ̂)
    pub own_center: f64,
    /// Σ_j Tr(Σ₁⁻¹ Σ̂^(ij))
    pub own_cross: f64,
    /// Σ_j Σ_k Tr(Σ₁⁻¹ Σ̂^(jk))
    pub own_neighbors: f64,
    /// Tr(Σ₂⁻¹ Σ̂)
    pub other_center: f64,
    pub other_cross: f64,
    pub other_neighbors: f64,
    /// (μ⃗₁ − μ⃗₂)ᵀ Σ₂⁻¹ (μ⃗₁ − μ⃗₂)
    pub mahalanobis: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KLReport {
    pub d_pq: f64,
    pub d_qp: f64,
    pub d_sym: f64,
    pub pq: KLTerms,
    pub qp: KLTerms,
    /// Present for multivariate reports: (p→q, q→p).
    pub traces: Option<(TraceTerms, TraceTerms)>,
}

impl KLReport {
    fn from_terms(pq: KLTerms, qp: KLTerms, traces: Option<(TraceTerms, TraceTerms)>) -> Self {
        let d_pq = pq.total();
        let d_qp = qp.total();
        KLReport {
            d_pq,
            d_qp,
            d_sym: (d_pq + d_qp) / 2.0,
            pq,
            qp,
            traces,
        }
    }

    /// Whole-field divergences `n × (d_pq, d_qp, d_sym)`.
    pub fn field_totals(&self, n_sites: usize) -> (f64, f64, f64) {
        let n = n_sites as f64;
        (n * self.d_pq, n * self.d_qp, n * self.d_sym)
    }
}

/// Moment sums feeding one direction.
#[derive(Debug, Clone, Copy)]
struct CovSums {
    var: f64,
    center_neighbor: f64,
    neighbor_neighbor: f64,
}

/// Σ_j σ_ij and Σ_j Σ_k σ_jk read site-by-site out of Σ_p.
fn summed(m: &PatchMoments) -> CovSums {
    let mut center_neighbor = 0.0;
    for &j in &NEIGHBOR_POSITIONS {
        center_neighbor += m.sigma_p[CENTER_POSITION][j];
    }
    let mut neighbor_neighbor = 0.0;
    for &j in &NEIGHBOR_POSITIONS {
        for &k in &NEIGHBOR_POSITIONS {
            neighbor_neighbor += m.sigma_p[j][k];
        }
    }
    CovSums {
        var: m.var,
        center_neighbor,
        neighbor_neighbor,
    }
}

/// ‖ρ‖₊ and ‖Σ_p⁻‖₊.
fn vectorized(m: &PatchMoments) -> CovSums {
    CovSums {
        var: m.var,
        center_neighbor: m.rho.plus_norm(),
        neighbor_neighbor: m.sigma_minus.plus_norm(),
    }
}

fn directed(own: &ModelParams, other: &ModelParams, sums: CovSums, delta: usize) -> KLTerms {
    let (s1, s2) = (own.sigma2(), other.sigma2());
    let (b1, b2) = (own.beta(), other.beta());
    let own_bracket = sums.var - 2.0 * b1 * sums.center_neighbor + b1 * b1 * sums.neighbor_neighbor;
    let other_bracket =
        sums.var - 2.0 * b2 * sums.center_neighbor + b2 * b2 * sums.neighbor_neighbor;
    let dm = own.mu() - other.mu();
    let shrink = 1.0 - delta as f64 * b2;
    KLTerms {
        log_ratio: 0.5 * (s2 / s1).ln(),
        a_term: -own_bracket / (2.0 * s1),
        b_term: other_bracket / (2.0 * s2),
        mean_shift: dm * dm * shrink * shrink / (2.0 * s2),
    }
}

fn check_uni(inputs: &UniKLInputs) -> Result<()> {
    if inputs.delta == 0 {
        return Err(GmrfError::InvalidParams(
            "neighbourhood size must be positive".into(),
        ));
    }
    Ok(())
}

/// Directed `D(p, q)` from p's moments only.
pub fn kl_directed_univariate(
    params_p: &ModelParams,
    params_q: &ModelParams,
    moments_p: &PatchMoments,
    delta: usize,
) -> KLTerms {
    directed(params_p, params_q, vectorized(moments_p), delta)
}

/// Summation form: covariance sums taken entry by entry from Σ_p.
pub fn kl_univariate(inputs: &UniKLInputs) -> Result<KLReport> {
    check_uni(inputs)?;
    let pq = directed(
        &inputs.params_p,
        &inputs.params_q,
        summed(&inputs.moments_p),
        inputs.delta,
    );
    let qp = directed(
        &inputs.params_q,
        &inputs.params_p,
        summed(&inputs.moments_q),
        inputs.delta,
    );
    Ok(KLReport::from_terms(pq, qp, None))
}

/// ‖·‖₊ form over ρ and Σ_p⁻.
pub fn kl_univariate_vectorized(inputs: &UniKLInputs) -> Result<KLReport> {
    check_uni(inputs)?;
    let pq = directed(
        &inputs.params_p,
        &inputs.params_q,
        vectorized(&inputs.moments_p),
        inputs.delta,
    );
    let qp = directed(
        &inputs.params_q,
        &inputs.params_p,
        vectorized(&inputs.moments_q),
        inputs.delta,
    );
    Ok(KLReport::from_terms(pq, qp, None))
}

/// Symmetrized divergence as a single expression. With each field's
/// centre variance `v` equal to its σ² the leading term is (σ₁² − σ₂²)².
pub fn kl_symmetrized_closed_form(inputs: &UniKLInputs) -> Result<f64> {
    check_uni(inputs)?;
    let (p, q) = (&inputs.params_p, &inputs.params_q);
    let (s1, s2) = (p.sigma2(), q.sigma2());
    let (b1, b2) = (p.beta(), q.beta());
    let delta = inputs.delta as f64;
    let (mp, mq) = (&inputs.moments_p, &inputs.moments_q);
    let rho_diff = mp.rho.plus_norm() - mq.rho.plus_norm();
    let minus_diff = mp.sigma_minus.plus_norm() - mq.sigma_minus.plus_norm();
    let dm2 = (p.mu() - q.mu()).powi(2);
    let body = (mp.var - mq.var) * (s1 - s2) - 2.0 * (b2 * s1 - b1 * s2) * rho_diff
        + (b2 * b2 * s1 - b1 * b1 * s2) * minus_diff
        + dm2 * (s1 * (1.0 - delta * b2).powi(2) + s2 * (1.0 - delta * b1).powi(2));
    Ok(body / (4.0 * s1 * s2))
}

pub(crate) fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|v| v.ln())
        .sum::<f64>()
}

/// Tr(Σ⁻¹ B) by solving against B.
pub(crate) fn trace_solve(chol: &Cholesky<f64, Dyn>, block: &DMatrix<f64>) -> f64 {
    chol.solve(block).trace()
}

fn directed_multi(
    own: &MultiModelParams,
    other: &MultiModelParams,
    m: &MultiPatchMoments,
    delta: usize,
    ridge: f64,
) -> Result<(KLTerms, TraceTerms)> {
    let d = own.dim();
    if other.dim() != d || m.dim != d {
        return Err(GmrfError::InvalidParams(format!(
            "dimension mismatch: params {} and {}, moments {}",
            d,
            other.dim(),
            m.dim
        )));
    }
    let c1 = own.factor(ridge)?;
    let c2 = other.factor(ridge)?;
    let sums = |c: &Cholesky<f64, Dyn>| {
        let center = trace_solve(c, &m.sigma);
        let mut cross = 0.0;
        for b in &m.cross_center {
            cross += trace_solve(c, b);
        }
        let mut neighbors = 0.0;
        for b in &m.cross_neighbors {
            neighbors += trace_solve(c, b);
        }
        (center, cross, neighbors)
    };
    let (own_center, own_cross, own_neighbors) = sums(&c1);
    let (other_center, other_cross, other_neighbors) = sums(&c2);
    let dmu = own.mu() - other.mu();
    let mahalanobis = dmu.dot(&c2.solve(&dmu));
    let (b1, b2) = (own.beta(), other.beta());
    let shrink = 1.0 - delta as f64 * b2;
    let terms = KLTerms {
        log_ratio: 0.5 * (log_det(&c2) - log_det(&c1)),
        a_term: -0.5 * (own_center - 2.0 * b1 * own_cross + b1 * b1 * own_neighbors),
        b_term: 0.5 * (other_center - 2.0 * b2 * other_cross + b2 * b2 * other_neighbors),
        mean_shift: 0.5 * shrink * shrink * mahalanobis,
    };
    let traces = TraceTerms {
        own_center,
        own_cross,
        own_neighbors,
        other_center,
        other_cross,
        other_neighbors,
        mahalanobis,
    };
    Ok((terms, traces))
}

pub fn kl_directed_multivariate(
    params_p: &MultiModelParams,
    params_q: &MultiModelParams,
    moments_p: &MultiPatchMoments,
    delta: usize,
    ridge: f64,
) -> Result<KLTerms> {
    directed_multi(params_p, params_q, moments_p, delta, ridge).map(|(t, _)| t)
}

/// Multivariate trace form in both directions.
pub fn kl_multivariate(inputs: &MultiKLInputs) -> Result<KLReport> {
    if inputs.delta == 0 {
        return Err(GmrfError::InvalidParams(
            "neighbourhood size must be positive".into(),
        ));
    }
    let (pq, tpq) = directed_multi(
        &inputs.params_p,
        &inputs.params_q,
        &inputs.moments_p,
        inputs.delta,
        inputs.ridge,
    )?;
    let (qp, tqp) = directed_multi(
        &inputs.params_q,
        &inputs.params_p,
        &inputs.moments_q,
        inputs.delta,
        inputs.ridge,
    )?;
    Ok(KLReport::from_terms(pq, qp, Some((tpq, tqp))))
}

//! Closed-form maximum pseudo-likelihood estimation of β, plus the sample
//! mean and (co)variance read off the patch moments.

use nalgebra::DVector;

use crate::error::{GmrfError, Result};
use crate::lattice::{neighbor_index_table, LatticeField, MultiLatticeField, NeighborhoodSpec};
use crate::moments::{
    multi_patch_moments, patch_moments, MultiPatchMoments, PatchMoments, PlusNorm,
};
use crate::params::{ModelParams, MultiModelParams};

/// Relative size below which the β denominator counts as zero.
const DENOMINATOR_FLOOR: f64 = 1e-12;

fn ratio(numerator: f64, denominator: f64, scale: f64) -> Result<f64> {
    if !(denominator > DENOMINATOR_FLOOR * scale) {
        return Err(GmrfError::DegenerateNeighborhood);
    }
    Ok(numerator / denominator)
}

/// (‖ρ‖₊, ‖Σ_p⁻‖₊).
pub fn beta_ratio_univariate(moments: &PatchMoments) -> (f64, f64) {
    (moments.rho.plus_norm(), moments.sigma_minus.plus_norm())
}

/// β̂ = ‖ρ‖₊ / ‖Σ_p⁻‖₊.
pub fn estimate_beta_univariate(moments: &PatchMoments) -> Result<f64> {
    let (num, den) = beta_ratio_univariate(moments);
    let scale: f64 = (0..8).map(|j| moments.sigma_minus[j][j]).sum();
    ratio(num, den, scale)
}

/// β̂ by direct summation over sites:
/// `Σ_i (x_i − μ) S_i / Σ_i S_i²` with `S_i = Σ_{j∈η_i} (x_j − μ)`.
/// `mu` defaults to the grand mean.
pub fn estimate_beta_univariate_direct(field: &LatticeField, mu: Option<f64>) -> Result<f64> {
    estimate_beta_multivariate_impl(
        field.values(),
        field.height(),
        field.width(),
        1,
        mu.map(|m| vec![m]),
    )
}

/// Vector β̂: `Σ_i (x⃗_i − μ⃗)ᵀ S⃗_i / Σ_i S⃗_iᵀ S⃗_i`, identity-weighted.
pub fn estimate_beta_multivariate(field: &MultiLatticeField, mu: Option<&[f64]>) -> Result<f64> {
    if let Some(m) = mu {
        if m.len() != field.dim() {
            return Err(GmrfError::InvalidParams(format!(
                "mean has {} components, field has {}",
                m.len(),
                field.dim()
            )));
        }
    }
    estimate_beta_multivariate_impl(
        field.values(),
        field.height(),
        field.width(),
        field.dim(),
        mu.map(|m| m.to_vec()),
    )
}

fn estimate_beta_multivariate_impl(
    values: &[f64],
    height: usize,
    width: usize,
    dim: usize,
    mu: Option<Vec<f64>>,
) -> Result<f64> {
    let n = height * width;
    let mu = mu.unwrap_or_else(|| {
        let mut sum = vec![0.0; dim];
        for site in values.chunks_exact(dim) {
            for (s, v) in sum.iter_mut().zip(site) {
                *s += v;
            }
        }
        sum.into_iter().map(|s| s / n as f64).collect()
    });
    let first = &values[..dim];
    if values.chunks_exact(dim).all(|s| s == first) {
        return Err(GmrfError::DegenerateNeighborhood);
    }
    let table = neighbor_index_table(height, width);
    let mut s = vec![0.0; dim];
    let (mut num, mut den, mut scale) = (0.0, 0.0, 0.0);
    for (i, nb) in table.iter().enumerate() {
        s.iter_mut().for_each(|v| *v = 0.0);
        for &j in nb {
            for k in 0..dim {
                let dev = values[j * dim + k] - mu[k];
                s[k] += dev;
                scale += dev * dev;
            }
        }
        let mut dot_center = 0.0;
        let mut dot_self = 0.0;
        for k in 0..dim {
            dot_center += (values[i * dim + k] - mu[k]) * s[k];
            dot_self += s[k] * s[k];
        }
        num += dot_center;
        den += dot_self;
    }
    ratio(num, den, scale)
}

/// (Σ_j Tr Σ̂^(ij), Σ_j Σ_k Tr Σ̂^(jk)).
pub fn beta_ratio_multivariate(moments: &MultiPatchMoments) -> (f64, f64) {
    let mut num = 0.0;
    for block in &moments.cross_center {
        num += block.trace();
    }
    let mut den = 0.0;
    for block in &moments.cross_neighbors {
        den += block.trace();
    }
    (num, den)
}

/// Vector β̂ from patch moments; equals the direct form when the moments
/// are centred at the same mean.
pub fn estimate_beta_multivariate_moments(moments: &MultiPatchMoments) -> Result<f64> {
    let (num, den) = beta_ratio_multivariate(moments);
    let scale: f64 = (0..8).map(|j| moments.cross_neighbor(j, j).trace()).sum();
    ratio(num, den, scale)
}

/// Log pseudo-likelihood
/// `−(n/2) log(2πσ²) − (1/2σ²) Σ_i [x_i − μ − β S_i]²`.
pub fn log_pseudo_likelihood(
    field: &LatticeField,
    params: &ModelParams,
    _spec: &NeighborhoodSpec,
) -> f64 {
    let x = field.values();
    let n = x.len() as f64;
    let (mu, beta, s2) = (params.mu(), params.beta(), params.sigma2());
    let table = neighbor_index_table(field.height(), field.width());
    let mut sq = 0.0;
    for (i, nb) in table.iter().enumerate() {
        let s: f64 = nb.iter().map(|&j| x[j] - mu).sum();
        let e = x[i] - mu - beta * s;
        sq += e * e;
    }
    -0.5 * n * (2.0 * std::f64::consts::PI * s2).ln() - sq / (2.0 * s2)
}

/// Vector log pseudo-likelihood, with the n-scaled normalizer.
pub fn log_pseudo_likelihood_multivariate(
    field: &MultiLatticeField,
    params: &MultiModelParams,
    _spec: &NeighborhoodSpec,
) -> Result<f64> {
    let d = field.dim();
    if d != params.dim() {
        return Err(GmrfError::InvalidParams("dimension mismatch".into()));
    }
    let x = field.values();
    let n = field.len() as f64;
    let mu = params.mu();
    let chol = params.cholesky();
    let logdet: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    let table = neighbor_index_table(field.height(), field.width());
    let mut quad = 0.0;
    let mut e = DVector::zeros(d);
    for (i, nb) in table.iter().enumerate() {
        for k in 0..d {
            let s: f64 = nb.iter().map(|&j| x[j * d + k] - mu[k]).sum();
            e[k] = x[i * d + k] - mu[k] - params.beta() * s;
        }
        quad += e.dot(&chol.solve(&e));
    }
    Ok(-0.5 * n * (d as f64 * (2.0 * std::f64::consts::PI).ln() + logdet) - 0.5 * quad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationReport {
    pub params: ModelParams,
    pub n_sites: usize,
    /// ‖ρ‖₊
    pub numerator: f64,
    /// ‖Σ_p⁻‖₊
    pub denominator: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiEstimationReport {
    pub params: MultiModelParams,
    pub n_sites: usize,
    pub numerator: f64,
    pub denominator: f64,
}

/// μ̂, σ̂² (centre diagonal of Σ_p) and β̂ from one field.
pub fn estimate_params(field: &LatticeField, spec: &NeighborhoodSpec) -> Result<EstimationReport> {
    let m = patch_moments(field, spec)?;
    estimate_params_from_moments(&m)
}

pub fn estimate_params_from_moments(m: &PatchMoments) -> Result<EstimationReport> {
    let beta = estimate_beta_univariate(m)?;
    let (numerator, denominator) = beta_ratio_univariate(m);
    Ok(EstimationReport {
        params: ModelParams::new(m.mean, m.var, beta)?,
        n_sites: m.n_samples,
        numerator,
        denominator,
    })
}

pub fn estimate_multi_params(
    field: &MultiLatticeField,
    spec: &NeighborhoodSpec,
) -> Result<MultiEstimationReport> {
    let m = multi_patch_moments(field, spec)?;
    estimate_multi_params_from_moments(&m)
}

pub fn estimate_multi_params_from_moments(m: &MultiPatchMoments) -> Result<MultiEstimationReport> {
    let beta = estimate_beta_multivariate_moments(m)?;
    let (numerator, denominator) = beta_ratio_multivariate(m);
    Ok(MultiEstimationReport {
        params: MultiModelParams::new(m.mean.as_slice().to_vec(), m.sigma.clone(), beta)?,
        n_sites: m.n_samples,
        numerator,
        denominator,
    })
}

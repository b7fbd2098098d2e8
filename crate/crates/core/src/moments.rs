//! Patch covariance statistics.
//!
//! Every site contributes one 9-entry (or 9·d) patch vector; the biased
//! (1/n) covariance of those vectors about a single grand mean is the
//! sufficient statistic for both the divergences and the β estimator.
//! Univariate moments are the d = 1 case of the same accumulation, so the
//! two paths agree bit for bit.

use nalgebra::{DMatrix, DVector};

use crate::error::{GmrfError, Result};
use crate::lattice::{
    patch_index_table, LatticeField, MultiLatticeField, NeighborhoodSpec, CENTER_POSITION,
    NEIGHBOR_POSITIONS, PATCH_LEN,
};

/// Sum of all entries of a vector or matrix, ‖A‖₊.
pub trait PlusNorm {
    fn plus_norm(&self) -> f64;
}

impl PlusNorm for [f64] {
    fn plus_norm(&self) -> f64 {
        self.iter().fold(0.0, |acc, v| acc + v)
    }
}

impl<const N: usize> PlusNorm for [f64; N] {
    fn plus_norm(&self) -> f64 {
        self.as_slice().plus_norm()
    }
}

impl<const N: usize, const M: usize> PlusNorm for [[f64; N]; M] {
    fn plus_norm(&self) -> f64 {
        let mut acc = 0.0;
        for row in self {
            for v in row {
                acc += v;
            }
        }
        acc
    }
}

impl PlusNorm for Vec<f64> {
    fn plus_norm(&self) -> f64 {
        self.as_slice().plus_norm()
    }
}

impl PlusNorm for Vec<Vec<f64>> {
    fn plus_norm(&self) -> f64 {
        let mut acc = 0.0;
        for row in self {
            for v in row {
                acc += v;
            }
        }
        acc
    }
}

/// Row-major sum, matching the array implementations.
impl PlusNorm for DMatrix<f64> {
    fn plus_norm(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.nrows() {
            for j in 0..self.ncols() {
                acc += self[(i, j)];
            }
        }
        acc
    }
}

impl PlusNorm for DVector<f64> {
    fn plus_norm(&self) -> f64 {
        self.as_slice().plus_norm()
    }
}

pub fn plus_norm<T: PlusNorm + ?Sized>(x: &T) -> f64 {
    x.plus_norm()
}

/// Scalar patch statistics with the Σ_p → (ρ, Σ_p⁻) split.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMoments {
    /// Reference mean the patches were centred on (the grand sample mean
    /// unless a mean was supplied).
    pub mean: f64,
    /// Centre diagonal entry of `sigma_p`.
    pub var: f64,
    pub sigma_p: [[f64; 9]; 9],
    /// Row 4 of `sigma_p` without entry 4.
    pub rho: [f64; 8],
    /// `sigma_p` without row 4 and column 4.
    pub sigma_minus: [[f64; 8]; 8],
    pub n_samples: usize,
}

impl PatchMoments {
    /// Builds moments from a full patch covariance, deriving ρ, Σ_p⁻ and
    /// the variance from its layout.
    pub fn from_sigma_p(mean: f64, sigma_p: [[f64; 9]; 9], n_samples: usize) -> Result<Self> {
        if !mean.is_finite() || sigma_p.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GmrfError::InvalidParams("moments must be finite".into()));
        }
        let scale = sigma_p.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for a in 0..9 {
            for b in (a + 1)..9 {
                if (sigma_p[a][b] - sigma_p[b][a]).abs() > 1e-12 * scale {
                    return Err(GmrfError::InvalidParams(format!(
                        "patch covariance is not symmetric at ({a}, {b})"
                    )));
                }
            }
        }
        let mut rho = [0.0; 8];
        let mut sigma_minus = [[0.0; 8]; 8];
        for (j, &pj) in NEIGHBOR_POSITIONS.iter().enumerate() {
            rho[j] = sigma_p[CENTER_POSITION][pj];
            for (k, &pk) in NEIGHBOR_POSITIONS.iter().enumerate() {
                sigma_minus[j][k] = sigma_p[pj][pk];
            }
        }
        Ok(PatchMoments {
            mean,
            var: sigma_p[CENTER_POSITION][CENTER_POSITION],
            sigma_p,
            rho,
            sigma_minus,
            n_samples,
        })
    }

    /// Population moments of an independent field: Σ_p = σ²·I₉.
    pub fn independent(mean: f64, var: f64) -> Self {
        let mut sigma_p = [[0.0; 9]; 9];
        for (a, row) in sigma_p.iter_mut().enumerate() {
            row[a] = var;
        }
        Self::from_sigma_p(mean, sigma_p, 0).expect("diagonal matrix is symmetric")
    }

    /// ‖ρ‖₊ = Σ_j σ_ij.
    pub fn rho_sum(&self) -> f64 {
        self.rho.plus_norm()
    }

    /// ‖Σ_p⁻‖₊ = Σ_j Σ_k σ_jk.
    pub fn sigma_minus_sum(&self) -> f64 {
        self.sigma_minus.plus_norm()
    }

    pub fn to_multi(&self) -> MultiPatchMoments {
        let sigma_p = DMatrix::from_fn(9, 9, |a, b| self.sigma_p[a][b]);
        MultiPatchMoments::from_sigma_p(
            DVector::from_element(1, self.mean),
            sigma_p,
            self.n_samples,
        )
        .expect("scalar moments are already validated")
    }
}

/// Vector patch statistics: the 9d x 9d covariance and its d x d blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPatchMoments {
    pub dim: usize,
    pub mean: DVector<f64>,
    /// Full 9d x 9d patch covariance, position-major.
    pub sigma_p: DMatrix<f64>,
    /// Centre block Σ̂.
    pub sigma: DMatrix<f64>,
    /// Σ̂^(ij): centre-to-neighbour-j blocks, in offset order.
    pub cross_center: Vec<DMatrix<f64>>,
    /// Σ̂^(jk), row-major over (j, k).
    pub cross_neighbors: Vec<DMatrix<f64>>,
    pub n_samples: usize,
}

impl MultiPatchMoments {
    pub fn from_sigma_p(
        mean: DVector<f64>,
        sigma_p: DMatrix<f64>,
        n_samples: usize,
    ) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || sigma_p.nrows() != PATCH_LEN * dim || sigma_p.ncols() != PATCH_LEN * dim {
            return Err(GmrfError::InvalidParams(format!(
                "patch covariance must be {0}x{0} for dimension {dim}",
                PATCH_LEN * dim
            )));
        }
        if mean.iter().chain(sigma_p.iter()).any(|v| !v.is_finite()) {
            return Err(GmrfError::InvalidParams("moments must be finite".into()));
        }
        let scale = sigma_p.amax();
        let l = sigma_p.nrows();
        for a in 0..l {
            for b in (a + 1)..l {
                if (sigma_p[(a, b)] - sigma_p[(b, a)]).abs() > 1e-12 * scale {
                    return Err(GmrfError::InvalidParams(format!(
                        "patch covariance is not symmetric at ({a}, {b})"
                    )));
                }
            }
        }
        let block = |p: usize, q: usize| sigma_p.view((p * dim, q * dim), (dim, dim)).into_owned();
        let sigma = block(CENTER_POSITION, CENTER_POSITION);
        let cross_center = NEIGHBOR_POSITIONS
            .iter()
            .map(|&pj| block(CENTER_POSITION, pj))
            .collect();
        let mut cross_neighbors = Vec::with_capacity(64);
        for &pj in &NEIGHBOR_POSITIONS {
            for &pk in &NEIGHBOR_POSITIONS {
                cross_neighbors.push(block(pj, pk));
            }
        }
        Ok(MultiPatchMoments {
            dim,
            mean,
            sigma_p,
            sigma,
            cross_center,
            cross_neighbors,
            n_samples,
        })
    }

    /// Population moments of an independent field: blockdiag(Σ, ..., Σ).
    pub fn independent(mean: DVector<f64>, sigma: &DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        let mut sigma_p = DMatrix::zeros(PATCH_LEN * d, PATCH_LEN * d);
        for p in 0..PATCH_LEN {
            sigma_p.view_mut((p * d, p * d), (d, d)).copy_from(sigma);
        }
        Self::from_sigma_p(mean, sigma_p, 0)
    }

    pub fn cross_neighbor(&self, j: usize, k: usize) -> &DMatrix<f64> {
        &self.cross_neighbors[j * 8 + k]
    }
}

/// Accumulates the upper triangle of Σ patch·patchᵀ over sites of one or
/// more fields sharing a shape. Site order and the per-site dot order are
/// fixed, so results are bit-deterministic.
fn accumulate_patch_covariance(
    fields: &[&[f64]],
    height: usize,
    width: usize,
    dim: usize,
    center: &[f64],
) -> (Vec<f64>, usize) {
    let len = PATCH_LEN * dim;
    let table = patch_index_table(height, width);
    let mut acc = vec![0.0; len * len];
    let mut p = vec![0.0; len];
    for values in fields {
        for window in &table {
            for (q, &s) in window.iter().enumerate() {
                for k in 0..dim {
                    p[q * dim + k] = values[s * dim + k] - center[k];
                }
            }
            for a in 0..len {
                let pa = p[a];
                let row = &mut acc[a * len..(a + 1) * len];
                for b in a..len {
                    row[b] += pa * p[b];
                }
            }
        }
    }
    let n = fields.len() * table.len();
    let inv = n as f64;
    let mut cov = vec![0.0; len * len];
    for a in 0..len {
        for b in a..len {
            let v = acc[a * len + b] / inv;
            cov[a * len + b] = v;
            cov[b * len + a] = v;
        }
    }
    (cov, n)
}

fn grand_mean(fields: &[&[f64]], dim: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for values in fields {
        for site in values.chunks_exact(dim) {
            for (s, v) in sum.iter_mut().zip(site) {
                *s += v;
            }
            n += 1;
        }
    }
    sum.into_iter().map(|s| s / n as f64).collect()
}

/// True when some component takes the same value at every site.
fn has_constant_component(fields: &[&[f64]], dim: usize) -> bool {
    (0..dim).any(|k| {
        let first = fields[0][k];
        fields
            .iter()
            .all(|values| values.iter().skip(k).step_by(dim).all(|&v| v == first))
    })
}

fn max_abs(fields: &[&[f64]]) -> f64 {
    fields
        .iter()
        .flat_map(|v| v.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
}

fn multi_moments_impl(
    fields: &[&[f64]],
    height: usize,
    width: usize,
    dim: usize,
    mu: Option<&[f64]>,
) -> Result<MultiPatchMoments> {
    if fields.is_empty() {
        return Err(GmrfError::InsufficientSamples("no fields to pool".into()));
    }
    if has_constant_component(fields, dim) {
        return Err(GmrfError::DegenerateField);
    }
    let center = match mu {
        Some(m) => {
            if m.len() != dim {
                return Err(GmrfError::InvalidParams(format!(
                    "reference mean has {} components, field has {dim}",
                    m.len()
                )));
            }
            m.to_vec()
        }
        None => grand_mean(fields, dim),
    };
    let (cov, n) = accumulate_patch_covariance(fields, height, width, dim, &center);
    let len = PATCH_LEN * dim;
    let floor = (64.0 * f64::EPSILON * max_abs(fields)).powi(2);
    for k in 0..dim {
        let c = CENTER_POSITION * dim + k;
        if cov[c * len + c] <= floor {
            return Err(GmrfError::DegenerateField);
        }
    }
    MultiPatchMoments::from_sigma_p(
        DVector::from_vec(center),
        DMatrix::from_row_slice(len, len, &cov),
        n,
    )
}

fn scalar_from_multi(m: MultiPatchMoments) -> PatchMoments {
    let mut sigma_p = [[0.0; 9]; 9];
    for (a, row) in sigma_p.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            *v = m.sigma_p[(a, b)];
        }
    }
    PatchMoments::from_sigma_p(m.mean[0], sigma_p, m.n_samples)
        .expect("accumulated covariance is symmetric")
}

/// Patch moments about the grand sample mean.
pub fn patch_moments(field: &LatticeField, _spec: &NeighborhoodSpec) -> Result<PatchMoments> {
    multi_moments_impl(&[field.values()], field.height(), field.width(), 1, None)
        .map(scalar_from_multi)
}

/// Patch moments about a supplied mean μ.
pub fn patch_moments_about(
    field: &LatticeField,
    mu: f64,
    _spec: &NeighborhoodSpec,
) -> Result<PatchMoments> {
    multi_moments_impl(
        &[field.values()],
        field.height(),
        field.width(),
        1,
        Some(&[mu]),
    )
    .map(scalar_from_multi)
}

fn check_same_shape<F>(
    fields: &[F],
    shape: impl Fn(&F) -> (usize, usize, usize),
) -> Result<(usize, usize, usize)> {
    let first = fields
        .first()
        .map(&shape)
        .ok_or_else(|| GmrfError::InsufficientSamples("no fields to pool".into()))?;
    if fields.iter().any(|f| shape(f) != first) {
        return Err(GmrfError::InvalidField(
            "pooled fields must share one shape".into(),
        ));
    }
    Ok(first)
}

/// Moments pooled over several realizations (e.g. retained Gibbs
/// snapshots), centred on their common grand mean.
pub fn pooled_patch_moments(
    fields: &[LatticeField],
    _spec: &NeighborhoodSpec,
) -> Result<PatchMoments> {
    let (h, w, _) = check_same_shape(fields, |f| (f.height(), f.width(), 1))?;
    let slices: Vec<&[f64]> = fields.iter().map(|f| f.values()).collect();
    multi_moments_impl(&slices, h, w, 1, None).map(scalar_from_multi)
}

pub fn multi_patch_moments(
    field: &MultiLatticeField,
    _spec: &NeighborhoodSpec,
) -> Result<MultiPatchMoments> {
    multi_moments_impl(
        &[field.values()],
        field.height(),
        field.width(),
        field.dim(),
        None,
    )
}

pub fn multi_patch_moments_about(
    field: &MultiLatticeField,
    mu: &[f64],
    _spec: &NeighborhoodSpec,
) -> Result<MultiPatchMoments> {
    multi_moments_impl(
        &[field.values()],
        field.height(),
        field.width(),
        field.dim(),
        Some(mu),
    )
}

pub fn pooled_multi_patch_moments(
    fields: &[MultiLatticeField],
    _spec: &NeighborhoodSpec,
) -> Result<MultiPatchMoments> {
    let (h, w, d) = check_same_shape(fields, |f| (f.height(), f.width(), f.dim()))?;
    let slices: Vec<&[f64]> = fields.iter().map(|f| f.values()).collect();
    multi_moments_impl(&slices, h, w, d, None)
}

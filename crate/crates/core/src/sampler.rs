//! Systematic-scan Gibbs sampling of pairwise isotropic GMRFs.
//!
//! Each site is redrawn from its local conditional
//! `x_i | η_i ~ N(μ + β Σ_j (x_j − μ), σ²)` (or the vector analogue with
//! covariance Σ drawn through its Cholesky factor), visiting sites in
//! row-major order with the current values of already-updated neighbours.
//!
//! Randomness comes from [`SimRng`], a ChaCha8 stream seeded with
//! `seed_from_u64`; standard normals use the ziggurat sampler from
//! `rand_distr`. Both are fixed so seeded runs reproduce exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{GmrfError, Result};
use crate::lattice::{LatticeField, MultiLatticeField, NeighborhoodSpec};
use crate::params::{ModelParams, MultiModelParams};

pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub height: usize,
    pub width: usize,
    /// Sweeps run after burn-in.
    pub sweeps: usize,
    /// Sweeps discarded before the first retained snapshot.
    pub burn_in: usize,
    /// Keep a copy of the field every `n` post-burn-in sweeps.
    pub snapshot_every: Option<usize>,
    pub seed: u64,
    /// Skip the |β| < 1/Δ guard.
    pub allow_unstable: bool,
}

impl SimConfig {
    pub fn new(height: usize, width: usize, sweeps: usize, seed: u64) -> Self {
        SimConfig {
            height,
            width,
            sweeps,
            burn_in: 0,
            snapshot_every: None,
            seed,
            allow_unstable: false,
        }
    }

    pub fn burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn snapshot_every(mut self, every: usize) -> Self {
        self.snapshot_every = Some(every);
        self
    }

    pub fn allow_unstable(mut self, allow: bool) -> Self {
        self.allow_unstable = allow;
        self
    }

    pub fn total_sweeps(&self) -> usize {
        self.burn_in + self.sweeps
    }

    fn validate(&self, beta: f64, spec: &NeighborhoodSpec) -> Result<()> {
        if self.height < 3 || self.width < 3 {
            return Err(GmrfError::InvalidParams(format!(
                "lattice must be at least 3x3, got {}x{}",
                self.height, self.width
            )));
        }
        if self.snapshot_every == Some(0) {
            return Err(GmrfError::InvalidParams(
                "snapshot interval must be positive".into(),
            ));
        }
        if !self.allow_unstable && beta.abs() >= spec.stability_bound() {
            return Err(GmrfError::UnstableBeta {
                beta,
                delta: spec.delta(),
            });
        }
        Ok(())
    }
}

/// Output of a simulation run.
#[derive(Debug, Clone)]
pub struct Simulation<F> {
    pub field: F,
    pub snapshots: Vec<F>,
    pub sweeps_run: usize,
}

/// Toroidal neighbour indices of site (r, c) in offset order.
#[inline(always)]
fn window(r: usize, c: usize, h: usize, w: usize) -> [usize; 8] {
    let ru = if r == 0 { h - 1 } else { r - 1 };
    let rd = if r + 1 == h { 0 } else { r + 1 };
    let cl = if c == 0 { w - 1 } else { c - 1 };
    let cr = if c + 1 == w { 0 } else { c + 1 };
    [
        ru * w + cl,
        ru * w + c,
        ru * w + cr,
        r * w + cl,
        r * w + cr,
        rd * w + cl,
        rd * w + c,
        rd * w + cr,
    ]
}

fn sweep_scalar<R: Rng + ?Sized>(
    field: &mut LatticeField,
    params: &ModelParams,
    rng: &mut R,
) -> bool {
    let (h, w) = (field.height(), field.width());
    let (mu, beta) = (params.mu(), params.beta());
    let sd = params.sigma2().sqrt();
    let x = field.values_mut();
    let mut finite = true;
    for r in 0..h {
        for c in 0..w {
            let mut s = 0.0;
            for j in window(r, c, h, w) {
                s += x[j] - mu;
            }
            let mean = mu + beta * s;
            let z: f64 = rng.sample(StandardNormal);
            let v = mean + sd * z;
            finite &= v.is_finite();
            x[r * w + c] = v;
        }
    }
    finite
}

/// Lower Cholesky factor of Σ, row-major.
fn lower_factor(params: &MultiModelParams) -> Vec<f64> {
    let l = params.cholesky().l();
    let d = params.dim();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..=i {
            out[i * d + k] = l[(i, k)];
        }
    }
    out
}

fn sweep_vector<R: Rng + ?Sized>(
    field: &mut MultiLatticeField,
    params: &MultiModelParams,
    factor: &[f64],
    rng: &mut R,
) -> bool {
    let (h, w, d) = (field.height(), field.width(), field.dim());
    let mu = params.mu().as_slice();
    let beta = params.beta();
    let x = field.values_mut();
    let mut s = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut finite = true;
    for r in 0..h {
        for c in 0..w {
            s.iter_mut().for_each(|v| *v = 0.0);
            for j in window(r, c, h, w) {
                for (k, sk) in s.iter_mut().enumerate() {
                    *sk += x[j * d + k] - mu[k];
                }
            }
            for zk in z.iter_mut() {
                *zk = rng.sample(StandardNormal);
            }
            let site = (r * w + c) * d;
            for i in 0..d {
                let mean = mu[i] + beta * s[i];
                let mut noise = 0.0;
                for k in 0..=i {
                    noise += factor[i * d + k] * z[k];
                }
                let v = mean + noise;
                finite &= v.is_finite();
                x[site + i] = v;
            }
        }
    }
    finite
}

/// Resamples every site of `field` once, in row-major order.
pub fn gibbs_sweep_univariate<R: Rng + ?Sized>(
    field: &mut LatticeField,
    params: &ModelParams,
    _spec: &NeighborhoodSpec,
    rng: &mut R,
) -> Result<()> {
    if sweep_scalar(field, params, rng) {
        Ok(())
    } else {
        Err(GmrfError::DivergedSimulation { sweep: 1 })
    }
}

/// Vector-valued analogue of [`gibbs_sweep_univariate`].
pub fn gibbs_sweep_multivariate<R: Rng + ?Sized>(
    field: &mut MultiLatticeField,
    params: &MultiModelParams,
    _spec: &NeighborhoodSpec,
    rng: &mut R,
) -> Result<()> {
    check_dim(field, params)?;
    let factor = lower_factor(params);
    if sweep_vector(field, params, &factor, rng) {
        Ok(())
    } else {
        Err(GmrfError::DivergedSimulation { sweep: 1 })
    }
}

fn check_dim(field: &MultiLatticeField, params: &MultiModelParams) -> Result<()> {
    if field.dim() != params.dim() {
        return Err(GmrfError::InvalidParams(format!(
            "field dimension {} does not match parameter dimension {}",
            field.dim(),
            params.dim()
        )));
    }
    Ok(())
}

/// i.i.d. N(μ, σ²) initial field.
pub fn initial_field<R: Rng + ?Sized>(
    height: usize,
    width: usize,
    params: &ModelParams,
    rng: &mut R,
) -> Result<LatticeField> {
    let sd = params.sigma2().sqrt();
    let values = (0..height * width)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            params.mu() + sd * z
        })
        .collect();
    LatticeField::new(height, width, values)
}

/// i.i.d. N(μ⃗, Σ) initial field.
pub fn initial_multi_field<R: Rng + ?Sized>(
    height: usize,
    width: usize,
    params: &MultiModelParams,
    rng: &mut R,
) -> Result<MultiLatticeField> {
    let d = params.dim();
    let factor = lower_factor(params);
    let mu = params.mu().as_slice();
    let mut values = Vec::with_capacity(height * width * d);
    let mut z = vec![0.0; d];
    for _ in 0..height * width {
        for zk in z.iter_mut() {
            *zk = rng.sample(StandardNormal);
        }
        for i in 0..d {
            let mut noise = 0.0;
            for k in 0..=i {
                noise += factor[i * d + k] * z[k];
            }
            values.push(mu[i] + noise);
        }
    }
    MultiLatticeField::new(height, width, d, values)
}

fn run_chain<F: Clone>(
    mut field: F,
    config: &SimConfig,
    mut sweep: impl FnMut(&mut F) -> bool,
) -> Result<Simulation<F>> {
    let mut snapshots = Vec::new();
    for s in 1..=config.total_sweeps() {
        if !sweep(&mut field) {
            return Err(GmrfError::DivergedSimulation { sweep: s });
        }
        if let Some(every) = config.snapshot_every {
            if s > config.burn_in && (s - config.burn_in).is_multiple_of(every) {
                snapshots.push(field.clone());
            }
        }
    }
    Ok(Simulation {
        field,
        snapshots,
        sweeps_run: config.total_sweeps(),
    })
}

/// Runs `burn_in + sweeps` Gibbs sweeps from an i.i.d. initial field.
pub fn simulate(
    params: &ModelParams,
    config: &SimConfig,
    spec: &NeighborhoodSpec,
) -> Result<Simulation<LatticeField>> {
    config.validate(params.beta(), spec)?;
    let mut rng = seeded_rng(config.seed);
    let init = initial_field(config.height, config.width, params, &mut rng)?;
    run_chain(init, config, |f| sweep_scalar(f, params, &mut rng))
}

pub fn simulate_multivariate(
    params: &MultiModelParams,
    config: &SimConfig,
    spec: &NeighborhoodSpec,
) -> Result<Simulation<MultiLatticeField>> {
    config.validate(params.beta(), spec)?;
    let mut rng = seeded_rng(config.seed);
    let init = initial_multi_field(config.height, config.width, params, &mut rng)?;
    let factor = lower_factor(params);
    run_chain(init, config, |f| sweep_vector(f, params, &factor, &mut rng))
}

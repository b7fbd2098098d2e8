//! Parameter vectors θ = (μ, σ², β) and θ = (μ⃗, Σ, β).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{GmrfError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    mu: f64,
    sigma2: f64,
    beta: f64,
}

impl ModelParams {
    pub fn new(mu: f64, sigma2: f64, beta: f64) -> Result<Self> {
        if !mu.is_finite() || !beta.is_finite() {
            return Err(GmrfError::InvalidParams(format!(
                "mu and beta must be finite (mu={mu}, beta={beta})"
            )));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(GmrfError::InvalidParams(format!(
                "sigma2 must be positive and finite, got {sigma2}"
            )));
        }
        Ok(ModelParams { mu, sigma2, beta })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Conditional variance of a site given its neighbourhood.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.mu, self.sigma2, beta)
    }
}

#[derive(Debug, Clone)]
pub struct MultiModelParams {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    beta: f64,
    chol: Cholesky<f64, Dyn>,
}

impl PartialEq for MultiModelParams {
    fn eq(&self, other: &Self) -> bool {
        self.mu == other.mu && self.sigma == other.sigma && self.beta == other.beta
    }
}

/// Checks `sigma` is square, finite and symmetric to 1e-12 relative to its
/// largest entry, and returns the exactly symmetrized matrix.
pub(crate) fn symmetrized(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !sigma.is_square() || sigma.nrows() == 0 {
        return Err(GmrfError::InvalidParams(format!(
            "covariance must be square and non-empty, got {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    if sigma.iter().any(|v| !v.is_finite()) {
        return Err(GmrfError::InvalidParams(
            "covariance has non-finite entries".into(),
        ));
    }
    let scale = sigma.amax();
    let d = sigma.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * scale {
                return Err(GmrfError::InvalidParams(format!(
                    "covariance is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok((sigma + sigma.transpose()) * 0.5)
}

impl MultiModelParams {
    pub fn new(mu: Vec<f64>, sigma: DMatrix<f64>, beta: f64) -> Result<Self> {
        let sigma = symmetrized(&sigma)?;
        if mu.len() != sigma.nrows() {
            return Err(GmrfError::InvalidParams(format!(
                "mean has {} components but covariance is {}x{}",
                mu.len(),
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if mu.iter().any(|v| !v.is_finite()) || !beta.is_finite() {
            return Err(GmrfError::InvalidParams(
                "mu and beta must be finite".into(),
            ));
        }
        let chol = Cholesky::new(sigma.clone()).ok_or(GmrfError::SingularCovariance)?;
        Ok(MultiModelParams {
            mu: DVector::from_vec(mu),
            sigma,
            beta,
            chol,
        })
    }

    /// Builds d = 1 parameters from scalar ones.
    pub fn from_scalar(p: &ModelParams) -> Self {
        Self::new(
            vec![p.mu()],
            DMatrix::from_element(1, 1, p.sigma2()),
            p.beta(),
        )
        .expect("positive variance always factors")
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    /// Conditional covariance of a site given its neighbourhood.
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    /// Factorizes Σ + ridge·I. A ridge of zero returns the stored factor.
    pub fn factor(&self, ridge: f64) -> Result<Cholesky<f64, Dyn>> {
        if ridge == 0.0 {
            return Ok(self.chol.clone());
        }
        if !(ridge > 0.0 && ridge.is_finite()) {
            return Err(GmrfError::InvalidParams(format!(
                "ridge must be non-negative, got {ridge}"
            )));
        }
        let d = self.dim();
        Cholesky::new(&self.sigma + DMatrix::identity(d, d) * ridge)
            .ok_or(GmrfError::SingularCovariance)
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.mu.as_slice().to_vec(), self.sigma.clone(), beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_validation() {
        assert!(ModelParams::new(0.0, 1.0, 0.1).is_ok());
        assert!(ModelParams::new(0.0, 0.0, 0.1).is_err());
        assert!(ModelParams::new(0.0, -1.0, 0.1).is_err());
        assert!(ModelParams::new(f64::NAN, 1.0, 0.1).is_err());
        assert!(ModelParams::new(0.0, f64::INFINITY, 0.1).is_err());
    }

    #[test]
    fn multi_validation() {
        let ok = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert!(MultiModelParams::new(vec![0.0, 1.0], ok.clone(), 0.05).is_ok());
        assert!(MultiModelParams::new(vec![0.0], ok, 0.05).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            MultiModelParams::new(vec![0.0, 0.0], asym, 0.0),
            Err(GmrfError::InvalidParams(_))
        ));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(
            MultiModelParams::new(vec![0.0, 0.0], indefinite, 0.0).unwrap_err(),
            GmrfError::SingularCovariance
        );
    }

    #[test]
    fn ridge_rescues_semidefinite() {
        let psd = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-9]);
        let p = MultiModelParams::new(vec![0.0, 0.0], psd, 0.0).unwrap();
        assert!(p.factor(1e-3).is_ok());
        assert!(p.factor(-1.0).is_err());
    }
}

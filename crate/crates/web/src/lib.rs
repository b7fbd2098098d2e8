//! Browser bindings: simulate a field, estimate its coupling, and compare
//! two fields by symmetrized divergence.

use gmrf_core::{
    estimate_params, kl_univariate, patch_moments, simulate, GmrfError, LatticeField, ModelParams,
    NeighborhoodSpec, SimConfig, UniKLInputs,
};
use wasm_bindgen::prelude::*;

fn js(e: GmrfError) -> JsError {
    JsError::new(&e.to_string())
}

/// A simulated scalar field with its estimated parameters.
#[wasm_bindgen]
pub struct FieldView {
    field: LatticeField,
    estimate: ModelParams,
}

impl FieldView {
    fn build(
        height: usize,
        width: usize,
        mu: f64,
        sigma2: f64,
        beta: f64,
        sweeps: usize,
        seed: u64,
    ) -> Result<Self, GmrfError> {
        let spec = NeighborhoodSpec::second_order();
        let params = ModelParams::new(mu, sigma2, beta)?;
        let sim = simulate(&params, &SimConfig::new(height, width, sweeps, seed), &spec)?;
        let estimate = estimate_params(&sim.field, &spec)?.params;
        Ok(FieldView {
            field: sim.field,
            estimate,
        })
    }

    fn kl_report(&self, other: &FieldView) -> Result<(f64, f64, f64), GmrfError> {
        let spec = NeighborhoodSpec::second_order();
        let r = kl_univariate(&UniKLInputs::new(
            self.estimate,
            other.estimate,
            patch_moments(&self.field, &spec)?,
            patch_moments(&other.field, &spec)?,
        ))?;
        Ok((r.d_pq, r.d_qp, r.d_sym))
    }
}

#[wasm_bindgen]
impl FieldView {
    #[wasm_bindgen(constructor)]
    pub fn new(
        height: usize,
        width: usize,
        mu: f64,
        sigma2: f64,
        beta: f64,
        sweeps: usize,
        seed: u64,
    ) -> Result<FieldView, JsError> {
        Self::build(height, width, mu, sigma2, beta, sweeps, seed).map_err(js)
    }

    pub fn height(&self) -> usize {
        self.field.height()
    }

    pub fn width(&self) -> usize {
        self.field.width()
    }

    /// Grayscale RGBA pixels, ±3 standard deviations around the mean.
    pub fn rgba(&self) -> Vec<u8> {
        let (m, sd) = (self.estimate.mu(), self.estimate.sigma2().sqrt());
        let mut out = Vec::with_capacity(self.field.len() * 4);
        for &x in self.field.values() {
            let g = (((x - m) / (6.0 * sd) + 0.5).clamp(0.0, 1.0) * 255.0).round() as u8;
            out.extend_from_slice(&[g, g, g, 255]);
        }
        out
    }

    pub fn estimated_beta(&self) -> f64 {
        self.estimate.beta()
    }

    pub fn mean(&self) -> f64 {
        self.estimate.mu()
    }

    pub fn variance(&self) -> f64 {
        self.estimate.sigma2()
    }
}

/// `[d_pq, d_qp, d_sym]` per site, each field under its own estimates.
#[wasm_bindgen]
pub fn kl_between(p: &FieldView, q: &FieldView) -> Result<Vec<f64>, JsError> {
    let (a, b, c) = p.kl_report(q).map_err(js)?;
    Ok(vec![a, b, c])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulate_and_estimate() {
        let v = FieldView::build(64, 64, 0.0, 1.0, 0.08, 300, 5).unwrap();
        assert_eq!((v.height(), v.width()), (64, 64));
        assert!((v.estimated_beta() - 0.08).abs() < 0.03);
        let px = v.rgba();
        assert_eq!(px.len(), 64 * 64 * 4);
        assert!(px
            .chunks(4)
            .all(|p| p[0] == p[1] && p[1] == p[2] && p[3] == 255));
    }

    #[test]
    fn divergence_between_views() {
        let a = FieldView::build(48, 48, 0.0, 1.0, 0.0, 100, 1).unwrap();
        let b = FieldView::build(48, 48, 0.0, 1.0, 0.1, 100, 2).unwrap();
        assert_eq!(a.kl_report(&a).unwrap().2, 0.0);
        assert!(a.kl_report(&b).unwrap().2 > 0.0);
    }

    #[test]
    fn invalid_inputs_are_errors() {
        assert!(FieldView::build(64, 64, 0.0, 1.0, 0.2, 10, 1).is_err());
        assert!(FieldView::build(2, 64, 0.0, 1.0, 0.0, 10, 1).is_err());
        assert!(FieldView::build(8, 8, 0.0, -1.0, 0.0, 10, 1).is_err());
    }
}

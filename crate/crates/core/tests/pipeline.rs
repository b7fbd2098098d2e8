use gmrf_core::io::{
    format_field, format_moments, parse_field, parse_moments, FieldData, MomentsData,
};
use gmrf_core::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn spec() -> NeighborhoodSpec {
    NeighborhoodSpec::second_order()
}

#[test]
fn simulate_serialize_estimate_compare() {
    let p = ModelParams::new(1.0, 2.0, 0.08).unwrap();
    let sim = simulate(&p, &SimConfig::new(96, 96, 400, 21).burn_in(50), &spec()).unwrap();
    let text = format_field(&sim.field.clone().into());
    let back = match parse_field(&text).unwrap() {
        FieldData::Scalar(f) => f,
        FieldData::Multi(_) => unreachable!(),
    };
    assert_eq!(back, sim.field);

    let est = estimate_params(&back, &spec()).unwrap();
    assert!((est.params.beta() - 0.08).abs() < 0.02);
    assert!((est.params.mu() - 1.0).abs() < 0.5);

    let m = patch_moments(&back, &spec()).unwrap();
    let m_back = match parse_moments(&format_moments(&MomentsData::Scalar(m.clone()))).unwrap() {
        MomentsData::Scalar(m) => m,
        MomentsData::Multi(_) => unreachable!(),
    };
    let q = est.params.with_beta(0.0).unwrap();
    let a = kl_univariate(&UniKLInputs::new(est.params, q, m.clone(), m.clone())).unwrap();
    let b = kl_univariate(&UniKLInputs::new(est.params, q, m_back.clone(), m_back)).unwrap();
    assert_eq!(a, b);

    // Under the generating model the conditional divergence is positive.
    let truth = kl_directed_univariate(&p, &p.with_beta(0.0).unwrap(), &m, spec().delta());
    assert!(truth.total() > 0.0);
}

#[test]
fn multivariate_pipeline() {
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 0.8]);
    let p = MultiModelParams::new(vec![0.5, -1.0], sigma, 0.06).unwrap();
    let sim = simulate_multivariate(&p, &SimConfig::new(64, 64, 400, 5), &spec()).unwrap();
    let est = estimate_multi_params(&sim.field, &spec()).unwrap();
    assert!((est.params.beta() - 0.06).abs() < 0.02);
    let m = multi_patch_moments(&sim.field, &spec()).unwrap();
    let r = kl_multivariate(&MultiKLInputs::new(
        est.params.clone(),
        est.params.clone(),
        m.clone(),
        m,
    ))
    .unwrap();
    assert!(r.d_sym.abs() <= 1e-12);
    assert!(r.traces.is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gaussian_reference_is_nonnegative(
        m1 in -5.0f64..5.0, s1 in 0.05f64..5.0, m2 in -5.0f64..5.0, s2 in 0.05f64..5.0,
    ) {
        let p = ModelParams::new(m1, s1, 0.0).unwrap();
        let q = ModelParams::new(m2, s2, 0.0).unwrap();
        prop_assert!(gaussian_kl_reference(&p, &q) >= -1e-15);
    }

    #[test]
    fn simulation_is_reproducible(seed in any::<u64>(), beta in -0.12f64..0.12) {
        let p = ModelParams::new(0.0, 1.0, beta).unwrap();
        let cfg = SimConfig::new(8, 9, 5, seed);
        let a = simulate(&p, &cfg, &spec()).unwrap();
        let b = simulate(&p, &cfg, &spec()).unwrap();
        prop_assert_eq!(a.field, b.field);
    }

    #[test]
    fn mpl_beta_is_translation_and_scale_invariant(seed in 0u64..1000, shift in -10.0f64..10.0, scale in 0.1f64..10.0) {
        let p = ModelParams::new(0.0, 1.0, 0.07).unwrap();
        let f = simulate(&p, &SimConfig::new(16, 16, 30, seed), &spec()).unwrap().field;
        let g = f.map(|x| scale * x + shift).unwrap();
        let a = estimate_params(&f, &spec()).unwrap().params.beta();
        let b = estimate_params(&g, &spec()).unwrap().params.beta();
        prop_assert!((a - b).abs() <= 1e-9);
    }
}

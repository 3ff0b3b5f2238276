use daylight_core::checks::random_medium;
use daylight_core::daylight::{
    statistical_autocorrelation, AngularDensity, DaylightOptions, NoiseSourceModel, RadialDensity, SourceKernel,
    SourceLayer,
};
use daylight_core::harmonics::{legendre, legendre_project, spherical_harmonic, LegendreGrid};
use daylight_core::medium::{FluctuationLayer, FluctuationSpec, Medium, MediumSpec};
use daylight_core::propagator::PropagatorOptions;
use daylight_core::scattering::{
    operator_value, response_from_state, symmetrized_by_reversal, symmetrized_from_state, FrequencyState,
};
use daylight_core::spectrum::Spectrum;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

fn tight() -> PropagatorOptions {
    PropagatorOptions { rtol: 1e-12, atol: 1e-14, ..Default::default() }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn reflection_is_unimodular_and_operator_nonnegative(
        seed in 0u64..10_000, index in 0u64..3, omega in 0.5..3.0f64, l in 0usize..8, kappa in 0.0..2.0f64,
    ) {
        let spec = MediumSpec { kappa, ..random_medium(seed, index) };
        let m = Medium::new(spec).unwrap();
        let st = FrequencyState::new(&m, omega, &PropagatorOptions::default()).unwrap();
        let r = st.reflection(&m, l).unwrap();
        prop_assert!((r.norm() - 1.0).abs() <= 1e-8, "|R| = {}", r.norm());
        let c = operator_value(st.gamma, r);
        prop_assert!(c >= 0.0);
        let residual = (st.total.a.norm_sqr() - st.total.b.norm_sqr() - 1.0).abs();
        prop_assert!(residual <= 1e-8, "residual {residual}");
    }

    #[test]
    fn symmetrized_response_matches_time_reversal(
        seed in 0u64..10_000, omega in 0.5..3.0f64, l in 0usize..6, kappa in 0.05..2.0f64, fre in -2.0..2.0f64,
    ) {
        let m = Medium::new(MediumSpec { kappa, ..random_medium(seed, 1) }).unwrap();
        let st = FrequencyState::new(&m, omega, &PropagatorOptions::default()).unwrap();
        let f = Complex64::new(fre, 0.0);
        let a = symmetrized_from_state(&m, &st, f, l).unwrap();
        let b = symmetrized_by_reversal(&m, &st, f, l).unwrap();
        prop_assert!((a - b).norm() <= 1e-10 * a.norm().max(1e-300), "{a} vs {b}");
        // zero source, zero response
        prop_assert_eq!(response_from_state(&m, &st, Complex64::new(0.0, 0.0), l).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn closed_form_correlation_equals_transfer_integral(
        omega in 0.6..1.8f64, l in 0usize..5, kappa in 0.1..1.5f64, lo in 0.3..0.6f64, width in 0.1..0.35f64,
    ) {
        let m = Medium::new(MediumSpec::homogeneous(1.0, 0.02, kappa).with_fluctuation(FluctuationSpec::Layered {
            layers: vec![FluctuationLayer { r_lo: 0.25, r_hi: 0.3, amplitude: 0.4 }],
        }))
        .unwrap();
        let noise = NoiseSourceModel {
            radial: RadialDensity::Bump { r_lo: lo, r_hi: lo + width, amplitude: 1.0 },
            spectrum: Spectrum::Flat { lo: 0.1, hi: 3.0, amplitude: 1.0, taper: 0.0 },
            angular: AngularDensity::Uniform,
        };
        let opts = DaylightOptions { propagator: tight(), ..Default::default() };
        let layer = SourceLayer::new(&m, &noise, omega, &opts).unwrap();
        let kernel = SourceKernel::new(&m, &layer, omega, &opts.propagator).unwrap();
        let closed = kernel.statistical_unit(&m, &layer, l).unwrap();
        let brute = kernel.brute_force_unit(&m, &layer, l).unwrap();
        prop_assert!((closed - brute).abs() <= 1e-10 * closed, "{closed} vs {brute}");
        let via_api = statistical_autocorrelation(&m, &noise, omega, l, &opts).unwrap();
        prop_assert!((via_api - closed).abs() <= 1e-12 * closed);
    }

    #[test]
    fn addition_theorem_holds(t1 in 0.0..PI, p1 in 0.0..TAU, t2 in 0.0..PI, p2 in 0.0..TAU, l in 0usize..8) {
        let sum: Complex64 = (-(l as i64)..=l as i64)
            .map(|m| spherical_harmonic(l, m, t1, p1).unwrap() * spherical_harmonic(l, m, t2, p2).unwrap().conj())
            .sum();
        let cos = t1.cos() * t2.cos() + t1.sin() * t2.sin() * (p1 - p2).cos();
        let expected = (2 * l + 1) as f64 / (4.0 * PI) * legendre(l, cos);
        prop_assert!((sum.re - expected).abs() <= 1e-12 && sum.im.abs() <= 1e-12, "{sum} vs {expected}");
    }
}

#[test]
fn legendre_projection_recovers_single_degree() {
    let g = LegendreGrid::for_lmax(4);
    for l in 0..=4 {
        let samples: Vec<f64> = g.cosines().iter().map(|&x| legendre(l, x)).collect();
        for k in 0..=4 {
            let c = legendre_project(&samples, &g, k).unwrap();
            let expected = if k == l { 1.0 } else { 0.0 };
            assert!((c - expected).abs() < 1e-12, "P_{l} onto P_{k}: {c}");
        }
    }
}

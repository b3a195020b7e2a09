use proptest::prelude::*;
use rdsdim::geometry::{covering_bound, grid_cover, NormKind};
use rdsdim::noise::{ou_path, OuInit, WienerPath};
use rdsdim::spectral::{build_model, laplacian_spectrum, semigroup_s, DelayStepper, ModelOptions};
use rdsdim::HistorySegment;

fn segment(tau: f64, n_tau: usize, n_modes: usize, coeffs: &[f64]) -> HistorySegment {
    HistorySegment::from_fn(tau, n_tau, n_modes, |t| {
        (0..n_modes).map(|k| coeffs[k % coeffs.len()] * (1.0 + (k as f64 + 1.0) * t).cos()).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn embedding_round_trip(values in proptest::collection::vec(-10.0f64..10.0, 12)) {
        let seg = HistorySegment::from_values(0.3, 3, 3, values).unwrap();
        let back = HistorySegment::from_embedding(0.3, 3, 3, &seg.to_embedding()).unwrap();
        prop_assert_eq!(back, seg);
    }

    #[test]
    fn semigroup_splits_on_grid(
        sigma in -1.0f64..1.0,
        mu in 0.1f64..3.0,
        s in 0usize..30,
        t in 0usize..30,
        coeffs in proptest::collection::vec(-2.0f64..2.0, 1..4),
    ) {
        let st = DelayStepper::new(&[1.0 + mu, 4.0 + mu], sigma, 0.5, 10).unwrap();
        let seg = segment(0.5, 10, 2, &coeffs);
        let h = st.h();
        let direct = semigroup_s((s + t) as f64 * h, &seg, &st).unwrap();
        let split = semigroup_s(t as f64 * h, &semigroup_s(s as f64 * h, &seg, &st).unwrap(), &st).unwrap();
        prop_assert!(direct.distance(&split) <= 1e-12 * (1.0 + seg.norm()));
    }

    #[test]
    fn projection_is_idempotent(
        sigma in prop_oneof![-0.6f64..-0.05, 0.05f64..0.6],
        coeffs in proptest::collection::vec(-2.0f64..2.0, 1..4),
    ) {
        let opts = ModelOptions { n_tau: 20, ..Default::default() };
        let model = build_model(&laplacian_spectrum(2).unwrap(), 1.0, sigma, 0.5, 2, 4, &opts).unwrap();
        let seg = segment(0.5, 20, 2, &coeffs);
        let p = model.project_p(&seg).unwrap();
        let pp = model.project_p(&p).unwrap();
        prop_assert!(pp.distance(&p) <= 1e-8 * (1.0 + seg.norm()));
    }

    #[test]
    fn ou_decays_exactly_without_increments(mu in 0.1f64..5.0, z0 in -3.0f64..3.0, n in 1usize..200) {
        let h = 0.01;
        let w = WienerPath::from_increments(1, h, 0, vec![0.0; n]).unwrap();
        let z = ou_path(&w, mu, OuInit::Given(vec![z0])).unwrap();
        let exact = z0 * (-mu * n as f64 * h).exp();
        prop_assert!((z.z(n)[0] - exact).abs() <= 1e-12 * (1.0 + z0.abs()));
    }

    #[test]
    fn sup_cover_respects_lemma(m in 1usize..4, r1 in 0.2f64..2.0, ratio in 1.0f64..4.0) {
        let r2 = r1 * ratio;
        let c = grid_cover(m, r1, r2, NormKind::Sup).unwrap();
        prop_assert!(c.constructed_count as f64 <= covering_bound(m, r1, r2).unwrap());
        prop_assert!(c.constructed_count >= 1);
    }
}

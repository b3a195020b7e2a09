use rdsdim::attractor::{estimate_absorbing_radius, pullback_sample, verify_squeezing, SqueezeSettings};
use rdsdim::solver::{DelayNonlinearity, ModelConfig};
use rdsdim::spectral::{build_model, laplacian_spectrum, ModelOptions};

fn config(f: Vec<f64>, sigma: f64, g: Vec<Vec<f64>>) -> ModelConfig {
    ModelConfig {
        mu: 1.0,
        sigma,
        tau: 0.5,
        f_coeffs: f,
        f_kind: DelayNonlinearity::Zero,
        g_coeffs: g,
        n_modes: 3,
        h: 0.025,
        blowup_ceiling: 1e6,
    }
}

#[test]
fn deterministic_cloud_converges_to_attractor() {
    let cfg = config(vec![3.0, 0.0, -1.0], 0.0, vec![]);
    let cloud = pullback_sample(&cfg, 1, &[5.0, 10.0, 15.0], 40, 2.0).unwrap();
    let md = cloud.metadata.unwrap();
    let last = *md.hausdorff_between_horizons.last().unwrap();
    let diam = *md.diameters.last().unwrap();
    assert!(diam > 0.1, "attractor should be nontrivial: {diam}");
    assert!(last < 0.01 * diam, "horizon drift {last} vs diameter {diam}");
}

#[test]
fn clouds_depend_on_the_noise_path() {
    let cfg = config(vec![1.0, 0.0, -1.0], 0.1, vec![vec![1.0, 0.5]]);
    let a = pullback_sample(&cfg, 11, &[2.0, 4.0], 6, 1.5).unwrap();
    let b = pullback_sample(&cfg, 11, &[2.0, 4.0], 6, 1.5).unwrap();
    let c = pullback_sample(&cfg, 12, &[2.0, 4.0], 6, 1.5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.data, c.data);
}

#[test]
fn dissipative_diameters_shrink_with_horizon() {
    let cfg = config(vec![0.5, 0.0, -1.0], 0.1, vec![vec![0.5]]);
    let cloud = pullback_sample(&cfg, 5, &[1.0, 2.0, 4.0, 8.0], 10, 1.5).unwrap();
    let d = cloud.metadata.unwrap().diameters;
    for w in d.windows(2) {
        assert!(w[1] <= w[0] * 1.05, "{d:?}");
    }
}

#[test]
fn linear_squeezing_always_holds_and_q_contracts() {
    let cfg = config(vec![], 0.3, vec![vec![1.0, 0.3]]);
    let cloud = pullback_sample(&cfg, 2, &[0.5, 1.0], 30, 1.0).unwrap();
    let opts = ModelOptions { n_tau: cfg.n_tau(), ..Default::default() };
    let model = build_model(&laplacian_spectrum(3).unwrap(), cfg.mu, cfg.sigma, cfg.tau, 2, 100, &opts).unwrap();
    let rep =
        verify_squeezing(&cloud, &cfg, &model, &SqueezeSettings { t0: 1.0, n_pairs: 100, seed: 3, c: 1.0 }).unwrap();
    assert_eq!(rep.pairs.len(), 100);
    assert_eq!(rep.rate_both, 1.0);
    assert_eq!(rep.int_r, 0.0);

    // Q-part decay rate of a difference of two segments.
    let phi = cloud.segment(0).unwrap().sub(&cloud.segment(1).unwrap());
    let q0 = model.project_q(&model.semigroup(cfg.tau, &phi).unwrap()).unwrap().norm();
    let q1 = model.project_q(&model.semigroup(5.0 * cfg.tau, &phi).unwrap()).unwrap().norm();
    let slope = (q1 / q0).ln() / (4.0 * cfg.tau);
    assert!(slope <= model.rhom() + 0.05, "{slope} vs {}", model.rhom());
}

#[test]
fn absorbing_radius_is_positive_and_reproducible() {
    let cfg = config(vec![1.0, 0.0, -1.0], 0.1, vec![vec![1.0]]);
    let a = estimate_absorbing_radius(&cfg, 3, 5.0, 20.0).unwrap();
    assert!(a >= 1.0);
    assert_eq!(a, estimate_absorbing_radius(&cfg, 3, 5.0, 20.0).unwrap());
}

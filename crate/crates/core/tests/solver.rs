use rdsdim::noise::NoiseRealization;
use rdsdim::solver::{evolve_rds, DelayNonlinearity, ModelConfig, Recording, Stepper};
use rdsdim::spectral::mode_roots;
use rdsdim::HistorySegment;

fn config(f: Vec<f64>, sigma: f64, tau: f64, n_modes: usize, h: f64) -> ModelConfig {
    ModelConfig {
        mu: 1.0,
        sigma,
        tau,
        f_coeffs: f,
        f_kind: DelayNonlinearity::Zero,
        g_coeffs: vec![],
        n_modes,
        h,
        blowup_ceiling: 1e6,
    }
}

fn noise_for(cfg: &ModelConfig, seed: u64, steps: usize) -> NoiseRealization {
    let n_tau = cfg.n_tau();
    NoiseRealization::generate(seed, &cfg.g_coeffs, cfg.mu, cfg.n_modes, cfg.h, -(n_tau as i64), steps + n_tau).unwrap()
}

/// RK4 for the one-mode Galerkin reduction ċ = −(1+μ)c + c − (3/(2π))c³.
fn rk4_mode_oracle(mu: f64, c0: f64, t: f64) -> f64 {
    let rhs = |c: f64| -(1.0 + mu) * c + c - 3.0 / (2.0 * std::f64::consts::PI) * c * c * c;
    let n = 100_000;
    let h = t / n as f64;
    let mut c = c0;
    for _ in 0..n {
        let k1 = rhs(c);
        let k2 = rhs(c + 0.5 * h * k1);
        let k3 = rhs(c + 0.5 * h * k2);
        let k4 = rhs(c + h * k3);
        c += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    c
}

#[test]
fn single_mode_reduction_matches_ode_oracle() {
    let mut cfg = config(vec![1.0, 0.0, -1.0], 0.0, 0.01, 1, 1e-5);
    cfg.mu = 0.5;
    let steps = 100_000;
    let noise = noise_for(&cfg, 0, steps);
    let psi = HistorySegment::from_fn(cfg.tau, cfg.n_tau(), 1, |_| vec![0.8]);
    let traj = Stepper::new(&cfg).unwrap().integrate(&noise.field, &psi, 0, steps, Recording::default()).unwrap();
    let oracle = rk4_mode_oracle(cfg.mu, 0.8, 1.0);
    assert!((traj.terminal.head()[0] - oracle).abs() < 1e-5, "{} vs {oracle}", traj.terminal.head()[0]);
}

#[test]
fn single_mode_decay_matches_principal_root() {
    let cfg = config(vec![], 0.1, 0.5, 1, 0.005);
    let steps = 3000;
    let noise = noise_for(&cfg, 0, steps);
    let psi = HistorySegment::from_fn(cfg.tau, cfg.n_tau(), 1, |t| vec![1.0 + t]);
    let traj = Stepper::new(&cfg).unwrap().integrate(&noise.field, &psi, 0, steps, Recording::default()).unwrap();
    let lead = mode_roots(1, cfg.mu, cfg.sigma, cfg.tau, 8).unwrap().roots[0].re;
    let (i0, i1) = (1000, 3000);
    let slope = 0.5 * (traj.energy[i1].ln() - traj.energy[i0].ln()) / ((i1 - i0) as f64 * cfg.h);
    assert!((slope - lead).abs() <= 0.02 * lead.abs(), "slope {slope} vs root {lead}");
}

#[test]
fn first_order_convergence() {
    // Nonlinear and delayed terms are frozen over a step: error ratio ≈ 2 per halving.
    let tau = 0.5;
    let terminal = |n_tau: usize| {
        let mut cfg = config(vec![1.0, 0.0, -1.0], 0.3, tau, 3, tau / n_tau as f64);
        cfg.f_kind = DelayNonlinearity::ScaledSine { lipschitz: 0.5 };
        let steps = 2 * n_tau;
        let noise = noise_for(&cfg, 0, steps);
        let psi = HistorySegment::from_fn(tau, n_tau, 3, |t| vec![(2.0 * t).cos(), 0.5 * t, 0.3]);
        Stepper::new(&cfg)
            .unwrap()
            .integrate(&noise.field, &psi, 0, steps, Recording::default())
            .unwrap()
            .terminal
            .head()
            .to_vec()
    };
    let vals: Vec<Vec<f64>> = [20, 40, 80, 160].iter().map(|&n| terminal(n)).collect();
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let d: Vec<f64> = vals.windows(2).map(|w| diff(&w[0], &w[1])).collect();
    for w in d.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.5..=2.5).contains(&ratio), "differences {d:?}");
    }
}

#[test]
fn cocycle_on_grid() {
    let mut cfg = config(vec![1.0, 0.0, -1.0], 0.2, 0.5, 4, 0.01);
    cfg.f_kind = DelayNonlinearity::RationalSaturation { lipschitz: 0.3 };
    cfg.g_coeffs = vec![vec![0.5, 0.2, 0.0, 0.1]];
    let noise = noise_for(&cfg, 9, 200);
    let phi = HistorySegment::from_fn(cfg.tau, cfg.n_tau(), 4, |t| vec![t.sin(), 0.2, -0.1 * t, 0.05]);
    let st = Stepper::new(&cfg).unwrap();
    let direct = st.evolve(&noise.field, &phi, 0, 50).unwrap();
    let mid = st.evolve(&noise.field, &phi, 0, 20).unwrap();
    let split = st.evolve(&noise.field, &mid, 20, 30).unwrap();
    assert!(direct.distance(&split) < 1e-8, "{}", direct.distance(&split));
}

#[test]
fn zero_time_and_noise_free_shift() {
    let cfg = config(vec![1.0, 0.0, -1.0], 0.2, 0.5, 2, 0.05);
    let noise = noise_for(&cfg, 0, 40);
    let phi = HistorySegment::from_fn(cfg.tau, cfg.n_tau(), 2, |t| vec![1.0 + t, t]);
    assert_eq!(evolve_rds(&cfg, &noise.field, &phi, 0, 0.0).unwrap(), phi);
    let u = evolve_rds(&cfg, &noise.field, &phi, 0, 2.0).unwrap();
    let v = Stepper::new(&cfg).unwrap().integrate(&noise.field, &phi, 0, 40, Recording::default()).unwrap().terminal;
    assert_eq!(u, v);
}

#[test]
fn dissipative_run_stays_bounded() {
    let mut cfg = config(vec![1.0, 0.0, -1.0], 0.2, 0.5, 8, 0.01);
    cfg.f_kind = DelayNonlinearity::ScaledSine { lipschitz: 0.2 };
    cfg.g_coeffs = vec![vec![1.0, 0.0, 0.5], vec![0.0, 0.3]];
    let steps = 10_000;
    let noise = noise_for(&cfg, 4, steps);
    let psi = HistorySegment::from_fn(cfg.tau, cfg.n_tau(), 8, |_| vec![3.0; 8]);
    let traj = Stepper::new(&cfg).unwrap().integrate(&noise.field, &psi, 0, steps, Recording::default()).unwrap();
    let late = traj.energy[steps / 2..].iter().fold(0.0f64, |m, e| m.max(e.sqrt()));
    assert!(late < 10.0, "late sup {late}");
}

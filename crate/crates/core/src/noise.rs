//! Seeded Wiener increments, stationary Ornstein–Uhlenbeck processes and the
//! spatial noise field `z(θ_t ω) = Σ_j g_j z_j(θ_t ω)`.
//!
//! Every Gaussian draw is addressed by `(seed, stream, step)`: the generator is
//! repositioned for each draw, so any window of a path can be regenerated on its
//! own and two windows of the same seed agree wherever they overlap.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Stream offset for the stationary initial draws of the OU processes.
const INIT_STREAM: u64 = 1 << 32;
/// Stream offset handed out by [`rng_for`].
const AUX_STREAM: u64 = 1 << 48;
/// Words of keystream reserved per step (one ChaCha block).
const WORDS_PER_STEP: u128 = 16;
const STEP_OFFSET: i128 = 1 << 60;

/// Counter-addressed standard normal draws for one `(seed, stream)`.
struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    fn at(&mut self, step: i64) -> f64 {
        let pos = (step as i128 + STEP_OFFSET) as u128 * WORDS_PER_STEP;
        self.rng.set_word_pos(pos);
        self.rng.sample(StandardNormal)
    }
}

/// A sequential generator derived from `seed` for auxiliary randomness
/// (initial histories, pair sampling, test segments). Distinct `purpose` values
/// give independent streams that never overlap the noise streams.
pub fn rng_for(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(AUX_STREAM + purpose);
    rng
}

/// Increments of an `m`-channel Wiener process on the grid `t_n = (start_step + n)·h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerPath {
    pub seed: u64,
    pub m: usize,
    pub h: f64,
    pub start_step: i64,
    /// Row-major `n × m`; row `n` is `ω(t_{n+1}) − ω(t_n)`.
    pub increments: Vec<f64>,
}

impl WienerPath {
    /// Builds a path from explicit increments (row-major `n × m`).
    pub fn from_increments(m: usize, h: f64, start_step: i64, increments: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("m", "at least one channel is required"));
        }
        if !(h > 0.0) {
            return Err(Error::param("h", format!("time step must be positive, got {h}")));
        }
        if !increments.len().is_multiple_of(m) {
            return Err(Error::param("increments", "length is not a multiple of m"));
        }
        Ok(Self { seed: 0, m, h, start_step, increments })
    }

    pub fn steps(&self) -> usize {
        self.increments.len() / self.m
    }

    pub fn increment(&self, step: usize) -> &[f64] {
        &self.increments[step * self.m..(step + 1) * self.m]
    }
}

/// `n` increments per channel starting at step 0.
pub fn sample_wiener(seed: u64, m: usize, h: f64, n: usize) -> Result<WienerPath> {
    sample_wiener_window(seed, m, h, 0, n)
}

/// `n` increments per channel for steps `start_step .. start_step + n`.
pub fn sample_wiener_window(seed: u64, m: usize, h: f64, start_step: i64, n: usize) -> Result<WienerPath> {
    if m == 0 {
        return Err(Error::param("m", "at least one channel is required"));
    }
    if !(h > 0.0) {
        return Err(Error::param("h", format!("time step must be positive, got {h}")));
    }
    if n == 0 {
        return Err(Error::param("n", "at least one step is required"));
    }
    let sd = h.sqrt();
    let mut increments = vec![0.0; n * m];
    for j in 0..m {
        let mut stream = NormalStream::new(seed, j as u64);
        for i in 0..n {
            increments[i * m + j] = sd * stream.at(start_step + i as i64);
        }
    }
    Ok(WienerPath { seed, m, h, start_step, increments })
}

/// Initial value of the OU recursion.
#[derive(Debug, Clone, PartialEq)]
pub enum OuInit {
    /// `z_j(t_0) ~ N(0, 1/(2μ))`, drawn from the seeded stream of the path.
    Stationary,
    Given(Vec<f64>),
}

/// Values of `z_j(θ_{t_n} ω)` on the grid of a [`WienerPath`], plus the
/// radius process `r_n = Σ_j z_j²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OUProcessPath {
    pub mu: f64,
    pub h: f64,
    pub m: usize,
    pub seed: u64,
    pub start_step: i64,
    /// Row-major `(n+1) × m`.
    pub values: Vec<f64>,
    pub r_values: Vec<f64>,
}

impl OUProcessPath {
    /// Number of grid points (`n + 1`).
    pub fn len(&self) -> usize {
        self.r_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r_values.is_empty()
    }

    pub fn z(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn time(&self, i: usize) -> f64 {
        (self.start_step + i as i64) as f64 * self.h
    }

    /// Writes `t, z_1..z_m, r` as CSV, preceded by a `# {json}` header line
    /// holding the seed and parameters.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header = serde_json::json!({
            "seed": self.seed,
            "mu": self.mu,
            "h": self.h,
            "m": self.m,
            "start_step": self.start_step,
            "points": self.len(),
        });
        writeln!(out, "# {header}")?;
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=self.m).map(|j| format!("z_{j}")));
        cols.push("r".into());
        writeln!(out, "{}", cols.join(","))?;
        for i in 0..self.len() {
            write!(out, "{}", self.time(i))?;
            for z in self.z(i) {
                write!(out, ",{z}")?;
            }
            writeln!(out, ",{}", self.r_values[i])?;
        }
        Ok(())
    }
}

/// Exact discretization of `dz_j + μ z_j dt = dω_j`:
/// `z_{n+1} = e^{−μh} z_n + ξ_n`, where `ξ_n` is the Wiener increment rescaled to
/// variance `(1 − e^{−2μh})/(2μ)`.
pub fn ou_path(w: &WienerPath, mu: f64, init: OuInit) -> Result<OUProcessPath> {
    if !(mu > 0.0) {
        return Err(Error::param("mu", format!("drift must be positive, got {mu}")));
    }
    let m = w.m;
    let z0 = match init {
        OuInit::Stationary => {
            let sd = (0.5 / mu).sqrt();
            (0..m).map(|j| sd * NormalStream::new(w.seed, INIT_STREAM + j as u64).at(w.start_step)).collect::<Vec<_>>()
        }
        OuInit::Given(v) => {
            if v.len() != m {
                return Err(Error::param("init", format!("expected {m} values, got {}", v.len())));
            }
            v
        }
    };
    let decay = (-mu * w.h).exp();
    let scale = (-(-2.0 * mu * w.h).exp_m1() / (2.0 * mu * w.h)).sqrt();
    let n = w.steps();
    let mut values = Vec::with_capacity((n + 1) * m);
    values.extend_from_slice(&z0);
    for i in 0..n {
        let inc = w.increment(i);
        for j in 0..m {
            let prev = values[i * m + j];
            values.push(decay * prev + scale * inc[j]);
        }
    }
    let r_values = values.chunks(m).map(|z| z.iter().map(|x| x * x).sum()).collect();
    Ok(OUProcessPath { mu, h: w.h, m, seed: w.seed, start_step: w.start_step, values, r_values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperednessReport {
    pub window: usize,
    /// Smallest `ρ` with `r_n ≤ ρ e^{μ t_n / 2}` over the window (`t_n` from the path start).
    pub rho: f64,
    pub argmax: usize,
    /// Fraction of points with `r_n > r_0 e^{μ t_n / 2}`.
    pub violation_fraction: f64,
}

/// Diagnostic for the tempered growth `Σ_j z_j(θ_t ω)² ≤ e^{μ|t|/2} r(ω)`.
pub fn temperedness_check(z: &OUProcessPath, window: usize) -> TemperednessReport {
    let window = window.min(z.len());
    let mut rho = 0.0;
    let mut argmax = 0;
    let mut violations = 0usize;
    let r0 = z.r_values.first().copied().unwrap_or(0.0);
    for n in 0..window {
        let growth = (0.5 * z.mu * n as f64 * z.h).exp();
        let scaled = z.r_values[n] / growth;
        if scaled > rho {
            rho = scaled;
            argmax = n;
        }
        if z.r_values[n] > r0 * growth {
            violations += 1;
        }
    }
    TemperednessReport {
        window,
        rho,
        argmax,
        violation_fraction: if window == 0 { 0.0 } else { violations as f64 / window as f64 },
    }
}

/// Sine coefficients of `z(θ_t ω)` and `Δz(θ_t ω)` on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseField {
    pub n_modes: usize,
    pub h: f64,
    pub start_step: i64,
    /// One row of `n_modes` sine coefficients per channel.
    pub g_coeffs: Vec<Vec<f64>>,
    /// Row-major `len × n_modes`.
    pub z_field: Vec<f64>,
    pub laplacian_z: Vec<f64>,
}

impl NoiseField {
    /// Assembles the field from an OU path and channel profiles. Profiles
    /// shorter than `n_modes` are zero-padded.
    pub fn from_ou(ou: &OUProcessPath, g_coeffs: &[Vec<f64>], n_modes: usize) -> Result<Self> {
        if g_coeffs.len() != ou.m {
            return Err(Error::param("g_coeffs", format!("{} profiles for {} channels", g_coeffs.len(), ou.m)));
        }
        let g = pad_profiles(g_coeffs, n_modes)?;
        let len = ou.len();
        let mut z_field = vec![0.0; len * n_modes];
        for i in 0..len {
            let zi = ou.z(i);
            let row = &mut z_field[i * n_modes..(i + 1) * n_modes];
            for (gj, &zj) in g.iter().zip(zi) {
                for (c, gk) in row.iter_mut().zip(gj) {
                    *c += gk * zj;
                }
            }
        }
        let laplacian_z = laplacian(&z_field, n_modes);
        Ok(Self { n_modes, h: ou.h, start_step: ou.start_step, g_coeffs: g, z_field, laplacian_z })
    }

    /// A field that vanishes identically on `len` grid points.
    pub fn zeros(n_modes: usize, h: f64, start_step: i64, len: usize) -> Self {
        Self {
            n_modes,
            h,
            start_step,
            g_coeffs: Vec::new(),
            z_field: vec![0.0; len * n_modes],
            laplacian_z: vec![0.0; len * n_modes],
        }
    }

    pub fn len(&self) -> usize {
        self.z_field.len() / self.n_modes.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.z_field.is_empty()
    }

    pub fn end_step(&self) -> i64 {
        self.start_step + self.len() as i64 - 1
    }

    pub fn covers(&self, first: i64, last: i64) -> bool {
        first >= self.start_step && last <= self.end_step()
    }

    /// Coefficients of `z(θ_t ω)` at global step `step`.
    pub fn z_at(&self, step: i64) -> &[f64] {
        let i = (step - self.start_step) as usize;
        &self.z_field[i * self.n_modes..(i + 1) * self.n_modes]
    }

    pub fn laplacian_at(&self, step: i64) -> &[f64] {
        let i = (step - self.start_step) as usize;
        &self.laplacian_z[i * self.n_modes..(i + 1) * self.n_modes]
    }
}

fn pad_profiles(g_coeffs: &[Vec<f64>], n_modes: usize) -> Result<Vec<Vec<f64>>> {
    g_coeffs
        .iter()
        .map(|g| {
            if g.len() > n_modes {
                return Err(Error::param(
                    "g_coeffs",
                    format!("profile has {} coefficients but only {n_modes} modes are retained", g.len()),
                ));
            }
            let mut row = g.clone();
            row.resize(n_modes, 0.0);
            Ok(row)
        })
        .collect()
}

fn laplacian(coeffs: &[f64], n_modes: usize) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let k = (i % n_modes + 1) as f64;
            -k * k * c
        })
        .collect()
}

/// One noise realization `ω` restricted to a window of global steps: the OU
/// path and the derived field, both starting at `start_step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRealization {
    pub seed: u64,
    pub ou: OUProcessPath,
    pub field: NoiseField,
}

impl NoiseRealization {
    /// Generates steps `start_step ..= start_step + n_steps`. The OU processes
    /// start from their stationary law at `start_step`; callers wanting the
    /// stationary solution should place `start_step` a burn-in of a few `1/μ`
    /// before the first time they use.
    pub fn generate(
        seed: u64,
        g_coeffs: &[Vec<f64>],
        mu: f64,
        n_modes: usize,
        h: f64,
        start_step: i64,
        n_steps: usize,
    ) -> Result<Self> {
        if g_coeffs.is_empty() {
            if !(mu > 0.0) {
                return Err(Error::param("mu", format!("drift must be positive, got {mu}")));
            }
            let len = n_steps + 1;
            let ou = OUProcessPath { mu, h, m: 0, seed, start_step, values: Vec::new(), r_values: vec![0.0; len] };
            let field = NoiseField::zeros(n_modes, h, start_step, len);
            return Ok(Self { seed, ou, field });
        }
        let w = sample_wiener_window(seed, g_coeffs.len(), h, start_step, n_steps.max(1))?;
        let mut ou = ou_path(&w, mu, OuInit::Stationary)?;
        if n_steps == 0 {
            ou.values.truncate(ou.m);
            ou.r_values.truncate(1);
        }
        let field = NoiseField::from_ou(&ou, g_coeffs, n_modes)?;
        Ok(Self { seed, ou, field })
    }

    /// `r(θ_t ω)` at global step `step`.
    pub fn r_at(&self, step: i64) -> f64 {
        self.ou.r_values[(step - self.ou.start_step) as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wiener_is_deterministic_in_seed() {
        let a = sample_wiener(7, 2, 0.01, 3).unwrap();
        let b = sample_wiener(7, 2, 0.01, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.increments.len(), 6);
        let c = sample_wiener(8, 2, 0.01, 3).unwrap();
        assert_ne!(a.increments, c.increments);
    }

    #[test]
    fn windows_agree_on_overlap() {
        let full = sample_wiener_window(3, 2, 0.1, -50, 100).unwrap();
        let tail = sample_wiener_window(3, 2, 0.1, 0, 50).unwrap();
        assert_eq!(&full.increments[100..], &tail.increments[..]);
    }

    #[test]
    fn wiener_variance_matches_step() {
        let w = sample_wiener(7, 1, 0.01, 100_000).unwrap();
        let n = w.increments.len() as f64;
        let mean = w.increments.iter().sum::<f64>() / n;
        let var = w.increments.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((0.0095..=0.0105).contains(&var), "variance {var}");
    }

    #[test]
    fn wiener_rejects_bad_parameters() {
        assert!(sample_wiener(7, 1, 0.0, 1).is_err());
        assert!(sample_wiener(7, 0, 0.01, 1).is_err());
        assert!(sample_wiener(7, 1, -1.0, 1).is_err());
    }

    #[test]
    fn ou_zero_noise_fixed_point() {
        let w = WienerPath::from_increments(3, 0.01, 0, vec![0.0; 300]).unwrap();
        let z = ou_path(&w, 1.0, OuInit::Given(vec![0.0; 3])).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
        assert!(z.r_values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ou_exact_decay() {
        let w = WienerPath::from_increments(1, 0.01, 0, vec![0.0; 100]).unwrap();
        let z = ou_path(&w, 1.0, OuInit::Given(vec![1.0])).unwrap();
        assert_abs_diff_eq!(z.z(100)[0], (-1.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn ou_rejects_nonpositive_mu() {
        let w = sample_wiener(1, 1, 0.01, 10).unwrap();
        assert!(ou_path(&w, 0.0, OuInit::Stationary).is_err());
        assert!(ou_path(&w, -1.0, OuInit::Stationary).is_err());
    }

    #[test]
    fn ou_forgets_initial_condition_under_shift() {
        let mu = 1.0;
        let h = 0.01;
        let shift = 700;
        let a = ou_path(&sample_wiener_window(5, 2, h, 0, 5000).unwrap(), mu, OuInit::Stationary).unwrap();
        let b = ou_path(&sample_wiener_window(5, 2, h, shift, 5000 - shift as usize).unwrap(), mu, OuInit::Stationary)
            .unwrap();
        let burn = (20.0 / mu / h) as usize;
        for i in burn..b.len() {
            for j in 0..2 {
                assert_abs_diff_eq!(b.z(i)[j], a.z(i + shift as usize)[j], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn temperedness_trivial_cases() {
        let w = WienerPath::from_increments(1, 0.01, 0, vec![0.0; 10]).unwrap();
        let zero = ou_path(&w, 1.0, OuInit::Given(vec![0.0])).unwrap();
        assert_eq!(temperedness_check(&zero, 11).rho, 0.0);

        let mut constant = zero.clone();
        constant.r_values = vec![2.5; 11];
        let rep = temperedness_check(&constant, 11);
        assert_eq!(rep.rho, 2.5);
        assert_eq!(rep.argmax, 0);
        assert_eq!(rep.violation_fraction, 0.0);
    }

    #[test]
    fn temperedness_envelope_never_crossed() {
        let w = sample_wiener(11, 1, 0.01, 100_000).unwrap();
        let z = ou_path(&w, 1.0, OuInit::Stationary).unwrap();
        let rep = temperedness_check(&z, z.len());
        assert!(rep.rho.is_finite() && rep.rho > 0.0);
        for (n, r) in z.r_values.iter().enumerate() {
            assert!(*r <= rep.rho * (0.5 * n as f64 * z.h).exp() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn field_is_linear_combination_and_laplacian_scales() {
        let w = sample_wiener(2, 2, 0.05, 20).unwrap();
        let ou = ou_path(&w, 1.0, OuInit::Stationary).unwrap();
        let g = vec![vec![1.0, 0.5], vec![0.0, 0.0, -2.0]];
        let field = NoiseField::from_ou(&ou, &g, 3).unwrap();
        for i in 0..ou.len() {
            let z = ou.z(i);
            let expect = [z[0], 0.5 * z[0], -2.0 * z[1]];
            let step = i as i64;
            for (k, &e) in expect.iter().enumerate() {
                assert_abs_diff_eq!(field.z_at(step)[k], e, epsilon = 1e-15);
                let mk = ((k + 1) * (k + 1)) as f64;
                assert_abs_diff_eq!(field.laplacian_at(step)[k], -mk * e, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let w = sample_wiener(2, 2, 0.1, 3).unwrap();
        let ou = ou_path(&w, 1.0, OuInit::Stationary).unwrap();
        let mut buf = Vec::new();
        ou.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert!(lines[0].starts_with("# {"));
        assert_eq!(lines[1], "t,z_1,z_2,r");
        assert_eq!(lines.len(), 2 + 4);
    }
}

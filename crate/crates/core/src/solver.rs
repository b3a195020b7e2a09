//! Sine-Galerkin integration of the transformed random equation
//!
//! ```text
//! v' = Δv − μv − σ(v + z)(t − τ) + F(v + z) + f((v + z)(t − τ)) + Δz,
//! ```
//!
//! obtained from `u = v + z(θ_t ω)`, and the cocycle `Φ(t, ω, φ) = v_t + z(θ_{t+·} ω)`.
//!
//! One step of length `h` integrates `−(μ_k + μ)` exactly per mode. The delayed
//! linear term uses the same quadrature as [`DelayStepper`], so with `F = f = 0`
//! and no noise the scheme reproduces the linear semigroup `S(t)` of the
//! spectral model on the grid. The nonlinear and forcing terms are frozen over
//! the step (exponential Euler), which makes the full scheme first order.
//! Delayed values are read from a ring buffer at exact grid offsets.

use serde::{Deserialize, Serialize};

use crate::bound::r_of;
use crate::galerkin::{eval_polynomial, h_norm, SineGrid};
use crate::noise::NoiseField;
use crate::spectral::DelayStepper;
use crate::{Error, HistorySegment, Result};

pub const DEFAULT_BLOWUP_CEILING: f64 = 1e6;

/// The globally Lipschitz delayed nonlinearity `f`, with `f(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayNonlinearity {
    Zero,
    /// `L_f sin(u)`.
    ScaledSine {
        lipschitz: f64,
    },
    /// `L_f u / (1 + u²)`.
    RationalSaturation {
        lipschitz: f64,
    },
}

impl DelayNonlinearity {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            DelayNonlinearity::Zero => 0.0,
            DelayNonlinearity::ScaledSine { lipschitz } => lipschitz * u.sin(),
            DelayNonlinearity::RationalSaturation { lipschitz } => lipschitz * u / (1.0 + u * u),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            DelayNonlinearity::Zero => 0.0,
            DelayNonlinearity::ScaledSine { lipschitz } | DelayNonlinearity::RationalSaturation { lipschitz } => {
                lipschitz
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.lipschitz() == 0.0
    }
}

fn default_ceiling() -> f64 {
    DEFAULT_BLOWUP_CEILING
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub mu: f64,
    pub sigma: f64,
    pub tau: f64,
    /// `a_1, …, a_{2p−1}` of `F(u) = Σ a_k u^k`.
    #[serde(rename = "F_coeffs", default)]
    pub f_coeffs: Vec<f64>,
    pub f_kind: DelayNonlinearity,
    /// Sine coefficients of each noise profile `g_j`.
    #[serde(default)]
    pub g_coeffs: Vec<Vec<f64>>,
    #[serde(rename = "N")]
    pub n_modes: usize,
    pub h: f64,
    #[serde(default = "default_ceiling")]
    pub blowup_ceiling: f64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(name, format!("must be a positive finite number, got {v}")))
            }
        };
        positive("mu", self.mu)?;
        positive("tau", self.tau)?;
        positive("h", self.h)?;
        positive("blowup_ceiling", self.blowup_ceiling)?;
        if !self.sigma.is_finite() {
            return Err(Error::config("sigma", "must be finite"));
        }
        if self.n_modes == 0 {
            return Err(Error::config("N", "need at least one spatial mode"));
        }
        let ratio = self.tau / self.h;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(Error::config("h", format!("tau/h = {ratio} is not a positive integer")));
        }
        if self.f_coeffs.iter().any(|a| !a.is_finite()) {
            return Err(Error::config("F_coeffs", "coefficients must be finite"));
        }
        if self.f_coeffs.iter().any(|a| *a != 0.0) {
            let n = self.f_coeffs.len();
            if n.is_multiple_of(2) || n > 3 {
                return Err(Error::config("F_coeffs", format!("need odd degree 1 or 3, got {n} coefficients")));
            }
            if !(self.f_coeffs[n - 1] < 0.0) {
                return Err(Error::config("F_coeffs", "leading coefficient must be negative"));
            }
        }
        let l = self.f_kind.lipschitz();
        if !(l >= 0.0) || !l.is_finite() {
            return Err(Error::config("f_kind", format!("Lipschitz constant must be nonnegative, got {l}")));
        }
        for (j, g) in self.g_coeffs.iter().enumerate() {
            if g.len() > self.n_modes {
                return Err(Error::config(
                    format!("g_coeffs[{j}]"),
                    format!("{} coefficients but only {} modes", g.len(), self.n_modes),
                ));
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::config(format!("g_coeffs[{j}]"), "coefficients must be finite"));
            }
        }
        Ok(())
    }

    pub fn n_tau(&self) -> usize {
        (self.tau / self.h).round() as usize
    }

    /// `μ_k + μ` for `k = 1..=N`.
    pub fn rates(&self) -> Vec<f64> {
        (1..=self.n_modes).map(|k| (k * k) as f64 + self.mu).collect()
    }

    pub fn stepper(&self) -> Result<DelayStepper> {
        DelayStepper::new(&self.rates(), self.sigma, self.tau, self.n_tau())
    }

    pub fn has_polynomial(&self) -> bool {
        self.f_coeffs.iter().any(|a| *a != 0.0)
    }

    pub fn zero_segment(&self) -> HistorySegment {
        HistorySegment::zeros(self.tau, self.n_tau(), self.n_modes)
    }

    fn check_segment(&self, seg: &HistorySegment) -> Result<()> {
        if seg.n_tau() != self.n_tau()
            || seg.n_modes() != self.n_modes
            || (seg.tau() - self.tau).abs() > 1e-12 * self.tau
        {
            return Err(Error::param("segment", "history grid does not match the model configuration"));
        }
        Ok(())
    }
}

/// What [`integrate_v`] keeps besides the terminal segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Recording {
    /// Store the full segment every `stride` steps (`None`: terminal only).
    pub segment_stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start_step: i64,
    pub h: f64,
    /// `t_n = n·h` relative to the start, for every step including 0.
    pub times: Vec<f64>,
    /// `‖v(t_n)‖²`.
    pub energy: Vec<f64>,
    /// `(step, segment)` pairs when recording was requested.
    pub segments: Vec<(usize, HistorySegment)>,
    pub terminal: HistorySegment,
    /// Always 0: the scheme uses a fixed step.
    pub step_rejections: usize,
}

/// Time stepper for one configuration; reusable across trajectories.
#[derive(Debug, Clone)]
pub struct Stepper {
    cfg: ModelConfig,
    linear: DelayStepper,
    grid: SineGrid,
}

impl Stepper {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let degree = cfg.f_coeffs.len().max(1);
        Ok(Self { cfg: cfg.clone(), linear: cfg.stepper()?, grid: SineGrid::new(cfg.n_modes, degree) })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Integrates `v` for `steps` steps starting from history `psi` whose head
    /// sits at global noise step `start_step`.
    pub fn integrate(
        &self,
        noise: &NoiseField,
        psi: &HistorySegment,
        start_step: i64,
        steps: usize,
        rec: Recording,
    ) -> Result<Trajectory> {
        let cfg = &self.cfg;
        cfg.check_segment(psi)?;
        let n_tau = cfg.n_tau();
        let n = cfg.n_modes;
        if noise.n_modes != n {
            return Err(Error::param("noise", format!("field has {} modes, model has {n}", noise.n_modes)));
        }
        if (noise.h - cfg.h).abs() > 1e-12 * cfg.h {
            return Err(Error::param("noise", "noise grid step differs from the model step"));
        }
        let first = start_step - n_tau as i64;
        let last = start_step + steps as i64;
        if !noise.covers(first, last) {
            return Err(Error::param(
                "noise",
                format!(
                    "field covers steps {}..={} but {first}..={last} are needed",
                    noise.start_step,
                    noise.end_step()
                ),
            ));
        }

        // Ring buffer of the last n_tau + 1 values of v; slot of step s is s mod len.
        let len = n_tau + 1;
        let mut ring = vec![0.0; len * n];
        for i in 0..len {
            let slot = slot_of(first + i as i64, len);
            ring[slot * n..(slot + 1) * n].copy_from_slice(psi.point(i));
        }

        let mut traj = Trajectory {
            start_step,
            h: cfg.h,
            times: Vec::with_capacity(steps + 1),
            energy: Vec::with_capacity(steps + 1),
            segments: Vec::new(),
            terminal: psi.clone(),
            step_rejections: 0,
        };
        let head = psi.head();
        traj.times.push(0.0);
        traj.energy.push(head.iter().map(|x| x * x).sum());
        if rec.segment_stride.is_some() {
            traj.segments.push((0, psi.clone()));
        }

        let mut scratch = vec![0.0; self.grid.n_points()];
        let mut u = vec![0.0; n];
        let mut proj = vec![0.0; n];
        let mut forcing = vec![0.0; n];
        let mut next = vec![0.0; n];
        let weights_len = self.linear.delay_weights(0).len();
        for step in 0..steps {
            let s = start_step + step as i64;
            let cur = slot_of(s, len);
            let delayed = slot_of(s - n_tau as i64, len);
            let vs = &ring[cur * n..(cur + 1) * n];

            forcing.copy_from_slice(noise.laplacian_at(s));
            if cfg.has_polynomial() {
                for (k, uk) in u.iter_mut().enumerate() {
                    *uk = vs[k] + noise.z_at(s)[k];
                }
                self.grid.project_pointwise(&u, |x| eval_polynomial(&cfg.f_coeffs, x), &mut scratch, &mut proj);
                forcing.iter_mut().zip(&proj).for_each(|(f, p)| *f += p);
            }
            if !cfg.f_kind.is_zero() {
                let vd = &ring[delayed * n..(delayed + 1) * n];
                let zd = noise.z_at(s - n_tau as i64);
                for (k, uk) in u.iter_mut().enumerate() {
                    *uk = vd[k] + zd[k];
                }
                let kind = cfg.f_kind;
                self.grid.project_pointwise(&u, |x| kind.eval(x), &mut scratch, &mut proj);
                forcing.iter_mut().zip(&proj).for_each(|(f, p)| *f += p);
            }

            for k in 0..n {
                let mut delay_term = 0.0;
                if cfg.sigma != 0.0 {
                    for (j, w) in self.linear.delay_weights(k).iter().enumerate().take(weights_len) {
                        let step_j = s - n_tau as i64 + j as i64;
                        let slot = slot_of(step_j, len);
                        delay_term += w * (ring[slot * n + k] + noise.z_at(step_j)[k]);
                    }
                }
                next[k] = self.linear.decay(k) * vs[k] - cfg.sigma * delay_term + self.linear.gain(k) * forcing[k];
            }

            let norm = h_norm(&next);
            let t = (step + 1) as f64 * cfg.h;
            if !norm.is_finite() || norm > cfg.blowup_ceiling {
                return Err(Error::BlowUp { t, norm, ceiling: cfg.blowup_ceiling });
            }
            let dst = slot_of(s + 1, len);
            ring[dst * n..(dst + 1) * n].copy_from_slice(&next);
            traj.times.push(t);
            traj.energy.push(norm * norm);
            if let Some(stride) = rec.segment_stride {
                if stride > 0 && (step + 1) % stride == 0 {
                    traj.segments.push((step + 1, ring_segment(&ring, cfg, s + 1)));
                }
            }
        }
        traj.terminal = ring_segment(&ring, cfg, last);
        Ok(traj)
    }

    /// `Φ(steps·h, θ_{start_step·h} ω, φ)`.
    pub fn evolve(
        &self,
        noise: &NoiseField,
        phi: &HistorySegment,
        start_step: i64,
        steps: usize,
    ) -> Result<HistorySegment> {
        if steps == 0 {
            self.cfg.check_segment(phi)?;
            return Ok(phi.clone());
        }
        let psi = shift_by_noise(phi, noise, start_step, -1.0)?;
        let traj = self.integrate(noise, &psi, start_step, steps, Recording::default())?;
        shift_by_noise(&traj.terminal, noise, start_step + steps as i64, 1.0)
    }
}

fn slot_of(step: i64, len: usize) -> usize {
    step.rem_euclid(len as i64) as usize
}

fn ring_segment(ring: &[f64], cfg: &ModelConfig, head_step: i64) -> HistorySegment {
    let n_tau = cfg.n_tau();
    let n = cfg.n_modes;
    let len = n_tau + 1;
    let mut values = Vec::with_capacity(len * n);
    for i in 0..len {
        let slot = slot_of(head_step - n_tau as i64 + i as i64, len);
        values.extend_from_slice(&ring[slot * n..(slot + 1) * n]);
    }
    HistorySegment::from_values(cfg.tau, n_tau, n, values).expect("ring has the segment layout")
}

/// `φ(ξ) + sign·z(θ_ξ ω)` pointwise on the window ending at `head_step`.
fn shift_by_noise(seg: &HistorySegment, noise: &NoiseField, head_step: i64, sign: f64) -> Result<HistorySegment> {
    let n_tau = seg.n_tau() as i64;
    if !noise.covers(head_step - n_tau, head_step) {
        return Err(Error::param("noise", "field does not cover the history window"));
    }
    let mut out = seg.clone();
    for i in 0..seg.n_points() {
        let z = noise.z_at(head_step - n_tau + i as i64);
        for (o, zk) in out.point_mut(i).iter_mut().zip(z) {
            *o += sign * zk;
        }
    }
    Ok(out)
}

/// Integrates `v` over `[0, T]` from `psi`, whose head sits at global step `start_step`.
pub fn integrate_v(
    cfg: &ModelConfig,
    noise: &NoiseField,
    psi: &HistorySegment,
    start_step: i64,
    t_final: f64,
    rec: Recording,
) -> Result<Trajectory> {
    let steps = steps_for(t_final, cfg.h)?;
    Stepper::new(cfg)?.integrate(noise, psi, start_step, steps, rec)
}

/// The cocycle `Φ(t, θ_{start_step·h} ω, φ)` in the original variables.
pub fn evolve_rds(
    cfg: &ModelConfig,
    noise: &NoiseField,
    phi: &HistorySegment,
    start_step: i64,
    t: f64,
) -> Result<HistorySegment> {
    let steps = steps_for(t, cfg.h)?;
    Stepper::new(cfg)?.evolve(noise, phi, start_step, steps)
}

pub fn steps_for(t: f64, h: f64) -> Result<usize> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("time must be finite and nonnegative, got {t}")));
    }
    let n = (t / h).round();
    if (n * h - t).abs() > 1e-9 * t.max(h) {
        return Err(Error::param("t", format!("{t} is not a multiple of h = {h}")));
    }
    Ok(n as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// `‖F(v₁) − F(v₂)‖_H`.
    pub lhs: f64,
    /// `‖v₁ − v₂‖_H`.
    pub difference: f64,
    /// The majorant `R` at the given radius.
    pub r: f64,
    /// `lhs / difference` (0 when the fields coincide).
    pub ratio: f64,
    pub satisfied: bool,
    /// Set when the precondition failed and the check was not performed.
    pub skipped: Option<String>,
}

/// Audits `‖F(v₁) − F(v₂)‖_H ≤ R ‖v₁ − v₂‖_H` for coefficient vectors inside the
/// ball of radius `c + (c + 1) r` in `H`. The `H` norm of the nonlinear
/// difference is computed exactly (no Galerkin truncation) on a fine grid.
pub fn lipschitz_majorant_check(
    f_coeffs: &[f64],
    v1: &[f64],
    v2: &[f64],
    r_value: f64,
    c: f64,
) -> Result<LipschitzReport> {
    if v1.len() != v2.len() || v1.is_empty() {
        return Err(Error::param("v", "fields must have the same nonzero number of modes"));
    }
    let radius = c + (c + 1.0) * r_value;
    let r = r_of(r_value, f_coeffs, c)?;
    let (n1, n2) = (h_norm(v1), h_norm(v2));
    let difference = v1.iter().zip(v2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if n1 > radius * (1.0 + 1e-12) || n2 > radius * (1.0 + 1e-12) {
        return Ok(LipschitzReport {
            lhs: f64::NAN,
            difference,
            r,
            ratio: f64::NAN,
            satisfied: false,
            skipped: Some(format!("‖v₁‖ = {n1}, ‖v₂‖ = {n2} exceed the radius {radius}")),
        });
    }
    let n = v1.len();
    // Squared differences are sine polynomials of degree ≤ 2·deg(F)·N; the
    // rectangle rule on J points integrates them exactly when J exceeds that.
    let degree = f_coeffs.len().max(1);
    let grid = SineGrid::with_intervals(n, degree * n + n + 2);
    let mut p1 = vec![0.0; grid.n_points()];
    let mut p2 = vec![0.0; grid.n_points()];
    grid.to_physical(v1, &mut p1);
    grid.to_physical(v2, &mut p2);
    let dx = std::f64::consts::PI / (grid.n_points() + 1) as f64;
    let lhs = (p1
        .iter()
        .zip(&p2)
        .map(|(a, b)| {
            let d = eval_polynomial(f_coeffs, *a) - eval_polynomial(f_coeffs, *b);
            d * d
        })
        .sum::<f64>()
        * dx)
        .sqrt();
    let ratio = if difference > 0.0 { lhs / difference } else { 0.0 };
    Ok(LipschitzReport {
        lhs,
        difference,
        r,
        ratio,
        satisfied: lhs <= r * difference * (1.0 + 1e-12) + 1e-300,
        skipped: None,
    })
}

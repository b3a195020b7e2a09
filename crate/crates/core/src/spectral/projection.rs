//! Spectral projection `P` of the history space onto the span of the
//! eigenfunctions `e^{λθ} e_k` of the retained characteristic roots.
//!
//! The continuous projection pairs a history with the adjoint eigenfunction
//! through the bilinear form
//!
//! ```text
//! c_λ = (φ(0) − σ ∫_{−τ}^0 e^{−λ(ξ+τ)} φ(ξ) dξ) / (1 − στ e^{−λτ}).
//! ```
//!
//! On the grid we use its exact discrete counterpart: the one-step map `T` of
//! [`DelayStepper`] has eigenvalues `ζ = e^{sh}` with `s → λ` as `h → 0`, the
//! right eigenvector is `e^{sθ_j}` and the left eigenvector is the discrete
//! analogue of the pairing above. Projecting with these makes `P` exactly
//! idempotent and exactly commuting with `S(t)` on the grid, while it converges
//! to the continuous formula as the grid is refined.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::roots::CharacteristicRoot;
use super::semigroup::DelayStepper;
use crate::{Error, HistorySegment, Result};

/// Threshold on `|1 − στ e^{−λτ}|` below which a root counts as defective.
pub const DEFECTIVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModeProjector {
    /// Discrete exponents `s` with `e^{sh}` an eigenvalue of the step map.
    rates: Vec<Complex64>,
    /// Right eigenvectors `e^{sθ_j}`.
    right: Vec<Vec<Complex64>>,
    /// Left eigenvectors scaled so that `left · right = 1`.
    left: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralProjector {
    tau: f64,
    n_tau: usize,
    modes: Vec<ModeProjector>,
}

impl SpectralProjector {
    /// Builds `P` for the given retained roots (each tagged with its 1-based
    /// spatial mode). Modes without retained roots project to zero.
    pub fn new(stepper: &DelayStepper, retained: &[CharacteristicRoot]) -> Result<Self> {
        let n_tau = stepper.n_tau();
        let h = stepper.h();
        let tau = stepper.tau();
        let sigma = stepper.sigma();
        let mut modes =
            vec![ModeProjector { rates: Vec::new(), right: Vec::new(), left: Vec::new() }; stepper.n_modes()];
        for root in retained {
            if root.mode == 0 || root.mode > stepper.n_modes() {
                return Err(Error::param(
                    "retained",
                    format!("root tagged with mode {} outside 1..={}", root.mode, stepper.n_modes()),
                ));
            }
            let k = root.mode - 1;
            let lambda = root.lambda();
            let derivative = (1.0 - sigma * tau * (-lambda * tau).exp()).norm();
            if derivative < DEFECTIVE_TOL {
                return Err(Error::DefectiveRoot { re: root.re, im: root.im, mode: root.mode, derivative });
            }
            let row = stepper.companion_row(k);
            let s = discrete_rate(&row, h, lambda)?;
            let mp = &mut modes[k];
            if mp.rates.iter().any(|q| (q - s).norm() <= 1e-9 * (1.0 + s.norm())) {
                return Err(Error::InternalConsistency(format!(
                    "two retained roots of mode {} map to the same discrete exponent {s}",
                    root.mode
                )));
            }
            let zeta = (s * h).exp();
            let right: Vec<Complex64> = (0..=n_tau).map(|j| (s * (j as f64 * h - tau)).exp()).collect();
            let mut left = vec![Complex64::new(0.0, 0.0); n_tau + 1];
            left[0] = row[0] / zeta;
            for j in 1..n_tau {
                left[j] = (left[j - 1] + row[j]) / zeta;
            }
            left[n_tau] = Complex64::new(1.0, 0.0);
            let pairing: Complex64 = left.iter().zip(&right).map(|(l, r)| l * r).sum();
            let scale = left.iter().map(|l| l.norm()).fold(0.0, f64::max);
            if pairing.norm() < DEFECTIVE_TOL * scale {
                return Err(Error::DefectiveRoot {
                    re: root.re,
                    im: root.im,
                    mode: root.mode,
                    derivative: pairing.norm(),
                });
            }
            mp.rates.push(s);
            mp.right.push(right);
            mp.left.push(left.iter().map(|l| l / pairing).collect());
        }
        Ok(Self { tau, n_tau, modes })
    }

    /// Dimension of the range of `P`.
    pub fn rank(&self) -> usize {
        self.modes.iter().map(|m| m.rates.len()).sum()
    }

    /// Discrete exponents of mode `k` (0-based).
    pub fn discrete_rates(&self, k: usize) -> &[Complex64] {
        &self.modes[k].rates
    }

    fn check(&self, seg: &HistorySegment) -> Result<()> {
        if seg.n_tau() != self.n_tau
            || seg.n_modes() != self.modes.len()
            || (seg.tau() - self.tau).abs() > 1e-12 * self.tau
        {
            return Err(Error::param("seg", "segment grid does not match the projector grid"));
        }
        Ok(())
    }

    /// Complex coordinates of the projection of one mode series.
    pub fn coefficients(&self, k: usize, series: &[f64]) -> Vec<Complex64> {
        self.modes[k].left.iter().map(|l| l.iter().zip(series).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn project(&self, seg: &HistorySegment) -> Result<HistorySegment> {
        self.check(seg)?;
        let mut out = HistorySegment::zeros(seg.tau(), seg.n_tau(), seg.n_modes());
        for (k, mp) in self.modes.iter().enumerate() {
            if mp.rates.is_empty() {
                continue;
            }
            let series = seg.mode_series(k);
            let coeffs = self.coefficients(k, &series);
            let projected: Vec<f64> =
                (0..=self.n_tau).map(|j| coeffs.iter().zip(&mp.right).map(|(c, r)| (c * r[j]).re).sum()).collect();
            out.set_mode_series(k, &projected);
        }
        Ok(out)
    }

    /// `Q φ = φ − P φ`.
    pub fn complement(&self, seg: &HistorySegment) -> Result<HistorySegment> {
        Ok(seg.sub(&self.project(seg)?))
    }
}

/// Solves `e^{sh} = Σ_j row_j e^{−s(τ − θ-offset)}`, i.e. `ζ^{n+1} = Σ_j row_j ζ^j`
/// for `ζ = e^{sh}`, by Newton's method in `s` from `λ`.
fn discrete_rate(row: &[f64], h: f64, lambda: Complex64) -> Result<Complex64> {
    let n = row.len() - 1;
    let terms: Vec<(f64, f64)> =
        row.iter().enumerate().filter(|(_, r)| **r != 0.0).map(|(j, r)| (*r, (n - j) as f64 * h)).collect();
    let g = |s: Complex64| -> (Complex64, Complex64) {
        let mut val = (s * h).exp();
        let mut der = val * h;
        for &(r, lag) in &terms {
            let e = (-s * lag).exp();
            val -= r * e;
            der += r * lag * e;
        }
        (val, der)
    };
    let mut s = lambda;
    for _ in 0..60 {
        let (val, der) = g(s);
        let step = val / der;
        s -= step;
        if step.norm() <= 1e-14 * (1.0 + s.norm()) {
            break;
        }
    }
    let (val, _) = g(s);
    let scale = 1.0 + terms.iter().map(|(r, _)| r.abs()).sum::<f64>();
    if !(val.norm() <= 1e-12 * scale) || (s - lambda).norm() > 0.05 * (1.0 + lambda.norm()) {
        return Err(Error::NonConvergence(format!(
            "history grid (h = {h}) does not resolve the characteristic root {lambda}"
        )));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::super::roots::characteristic_roots_for_mode;
    use super::*;
    use approx::assert_abs_diff_eq;

    fn setup(sigma: f64, n_tau: usize) -> (DelayStepper, SpectralProjector, Vec<CharacteristicRoot>) {
        let (mu, tau) = (1.0, 0.5);
        let rates = [1.0 + mu, 4.0 + mu];
        let st = DelayStepper::new(&rates, sigma, tau, n_tau).unwrap();
        let mut retained = Vec::new();
        for (k, a) in rates.iter().enumerate() {
            let set = characteristic_roots_for_mode(*a, sigma, tau, 4, k + 1).unwrap();
            retained.extend(set.roots.into_iter().filter(|r| r.re > -6.0));
        }
        let p = SpectralProjector::new(&st, &retained).unwrap();
        (st, p, retained)
    }

    fn random_like(n_tau: usize) -> HistorySegment {
        HistorySegment::from_fn(0.5, n_tau, 2, |t| vec![(5.0 * t).sin() + 0.3, (t * 11.0).cos() * t])
    }

    #[test]
    fn uncoupled_eigenfunction_is_fixed() {
        let (_, p, _) = setup(0.0, 25);
        let lambda = -2.0;
        let seg = HistorySegment::from_fn(0.5, 25, 2, |t| vec![(lambda * t).exp(), 0.0]);
        let out = p.project(&seg).unwrap();
        assert!(out.distance(&seg) < 1e-10);
    }

    #[test]
    fn zero_maps_to_zero() {
        let (_, p, _) = setup(0.1, 25);
        let z = HistorySegment::zeros(0.5, 25, 2);
        assert_eq!(p.project(&z).unwrap(), z);
    }

    #[test]
    fn idempotent_and_commutes_with_step_map() {
        let (st, p, _) = setup(0.1, 25);
        let seg = random_like(25);
        let once = p.project(&seg).unwrap();
        let twice = p.project(&once).unwrap();
        assert!(twice.distance(&once) <= 1e-12 * seg.norm());
        for steps in [25, 50, 125] {
            let a = p.project(&st.apply_steps(&seg, steps).unwrap()).unwrap();
            let b = st.apply_steps(&p.project(&seg).unwrap(), steps).unwrap();
            assert!(a.distance(&b) <= 1e-10 * seg.norm());
        }
    }

    #[test]
    fn converges_to_continuous_pairing() {
        // Oracle: the bilinear-form coefficient with a fine trapezoid rule.
        let n_tau = 400;
        let (_, p, retained) = setup(0.3, n_tau);
        let seg = random_like(n_tau);
        let series = seg.mode_series(0);
        let h = 0.5 / n_tau as f64;
        let ours = p.coefficients(0, &series);
        for (i, root) in retained.iter().filter(|r| r.mode == 1).enumerate() {
            let l = root.lambda();
            let mut integral = Complex64::new(0.0, 0.0);
            for (j, v) in series.iter().enumerate() {
                let xi = -0.5 + j as f64 * h;
                let w = if j == 0 || j == n_tau { 0.5 } else { 1.0 };
                integral += w * h * (-l * (xi + 0.5)).exp() * v;
            }
            let c = (series[n_tau] - 0.3 * integral) / (1.0 - 0.3 * 0.5 * (-l * 0.5).exp());
            assert_abs_diff_eq!(ours[i].re, c.re, epsilon = 1e-3);
            assert_abs_diff_eq!(ours[i].im, c.im, epsilon = 1e-3);
        }
    }
}

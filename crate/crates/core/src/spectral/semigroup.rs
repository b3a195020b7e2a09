//! The solution semigroup `S(t)` of the linear delayed equation
//! `v' = Δv − μv − σv(t − τ)` on the history grid.
//!
//! Each spatial mode is advanced independently. Over one step the local term
//! `−a v` is integrated exactly and the delayed term through a cubic Lagrange
//! interpolant of the history, so the step is a fixed linear map on the grid
//! values: `S(nh) = T^n` holds exactly and the scheme is fourth-order in `h`.

use serde::{Deserialize, Serialize};

use crate::{Error, HistorySegment, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayStepper {
    sigma: f64,
    tau: f64,
    n_tau: usize,
    /// `a_k = μ_k + μ`.
    rates: Vec<f64>,
    /// `e^{−a_k h}`.
    decay: Vec<f64>,
    /// `(1 − e^{−a_k h}) / a_k`, the exponential-Euler gain for forcing terms.
    gain: Vec<f64>,
    /// Quadrature weights of the delayed term on history indices `0..stencil`.
    delay_weights: Vec<Vec<f64>>,
}

impl DelayStepper {
    pub fn new(rates: &[f64], sigma: f64, tau: f64, n_tau: usize) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::param("tau", format!("delay must be positive, got {tau}")));
        }
        if n_tau == 0 {
            return Err(Error::param("n_tau", "history grid needs at least one step"));
        }
        if rates.is_empty() {
            return Err(Error::param("rates", "no spatial modes"));
        }
        let h = tau / n_tau as f64;
        let stencil = (n_tau + 1).min(4);
        let basis = lagrange_basis(stencil);
        let mut decay = Vec::with_capacity(rates.len());
        let mut gain = Vec::with_capacity(rates.len());
        let mut delay_weights = Vec::with_capacity(rates.len());
        for &a in rates {
            let z = -a * h;
            let phi = phi_functions(z);
            decay.push(z.exp());
            gain.push(h * phi[1]);
            // ∫_0^h e^{−a(h−u)} x^p du with x = u/h equals h·p!·φ_{p+1}(−ah).
            let moments: Vec<f64> = (0..stencil).map(|p| h * factorial(p) * phi[p + 1]).collect();
            delay_weights.push(basis.iter().map(|c| c.iter().zip(&moments).map(|(ci, mi)| ci * mi).sum()).collect());
        }
        Ok(Self { sigma, tau, n_tau, rates: rates.to_vec(), decay, gain, delay_weights })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    pub fn h(&self) -> f64 {
        self.tau / self.n_tau as f64
    }

    pub fn n_modes(&self) -> usize {
        self.rates.len()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn decay(&self, k: usize) -> f64 {
        self.decay[k]
    }

    pub fn gain(&self, k: usize) -> f64 {
        self.gain[k]
    }

    pub fn delay_weights(&self, k: usize) -> &[f64] {
        &self.delay_weights[k]
    }

    /// Value at the next grid point given the current window of `n_tau + 1`
    /// values of mode `k` (oldest first).
    pub fn step_value(&self, k: usize, window: &[f64]) -> f64 {
        debug_assert_eq!(window.len(), self.n_tau + 1);
        let delayed: f64 = self.delay_weights[k].iter().zip(window).map(|(w, d)| w * d).sum();
        self.decay[k] * window[self.n_tau] - self.sigma * delayed
    }

    /// Last row of the one-step map `T` of mode `k`: the new head is
    /// `Σ_j row_j φ_j`. The other rows shift the window by one.
    pub fn companion_row(&self, k: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.n_tau + 1];
        for (r, w) in row.iter_mut().zip(&self.delay_weights[k]) {
            *r = -self.sigma * w;
        }
        row[self.n_tau] += self.decay[k];
        row
    }

    /// Extends a mode series by `steps` grid points.
    pub fn extend_series(&self, k: usize, series: &mut Vec<f64>, steps: usize) {
        series.reserve(steps);
        for _ in 0..steps {
            let start = series.len() - (self.n_tau + 1);
            let next = self.step_value(k, &series[start..]);
            series.push(next);
        }
    }

    fn check_segment(&self, seg: &HistorySegment) -> Result<()> {
        if seg.n_tau() != self.n_tau
            || seg.n_modes() != self.n_modes()
            || (seg.tau() - self.tau).abs() > 1e-12 * self.tau
        {
            return Err(Error::param("seg", "segment grid does not match the model grid"));
        }
        Ok(())
    }

    /// `S(steps·h) φ`.
    pub fn apply_steps(&self, seg: &HistorySegment, steps: usize) -> Result<HistorySegment> {
        self.check_segment(seg)?;
        let mut out = seg.clone();
        if steps == 0 {
            return Ok(out);
        }
        for k in 0..self.n_modes() {
            let mut series = seg.mode_series(k);
            self.extend_series(k, &mut series, steps);
            out.set_mode_series(k, &series[steps..]);
        }
        Ok(out)
    }
}

/// `S(t) φ` for `t` a nonnegative multiple of the grid step.
pub fn semigroup_s(t: f64, seg: &HistorySegment, stepper: &DelayStepper) -> Result<HistorySegment> {
    let steps = grid_steps(t, stepper.h())?;
    stepper.apply_steps(seg, steps)
}

pub(crate) fn grid_steps(t: f64, h: f64) -> Result<usize> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param("t", format!("time must be finite and nonnegative, got {t}")));
    }
    let n = (t / h).round();
    if (n * h - t).abs() > 1e-9 * h.max(t) {
        return Err(Error::param("t", format!("{t} is not a multiple of the grid step {h}")));
    }
    Ok(n as usize)
}

/// `φ_0..φ_4` at `z`, where `φ_0 = e^z` and `φ_{k+1}(z) = (φ_k(z) − 1/k!)/z`.
pub fn phi_functions(z: f64) -> [f64; 5] {
    let mut phi = [0.0; 5];
    if z.abs() < 1.0 {
        for (k, p) in phi.iter_mut().enumerate() {
            // Σ_i z^i / (i + k)!
            let mut term = 1.0 / factorial(k);
            let mut sum = term;
            for i in 1..30 {
                term *= z / (i + k) as f64;
                sum += term;
                if term.abs() < 1e-18 * sum.abs() {
                    break;
                }
            }
            *p = sum;
        }
    } else {
        phi[0] = z.exp();
        for k in 0..4 {
            phi[k + 1] = (phi[k] - 1.0 / factorial(k)) / z;
        }
    }
    phi
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Monomial coefficients of the Lagrange basis on nodes `0..n`.
fn lagrange_basis(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|j| {
            let mut poly = vec![1.0];
            let mut denom = 1.0;
            for m in (0..n).filter(|&m| m != j) {
                // poly *= (x − m)
                let mut next = vec![0.0; poly.len() + 1];
                for (i, c) in poly.iter().enumerate() {
                    next[i + 1] += c;
                    next[i] -= m as f64 * c;
                }
                poly = next;
                denom *= j as f64 - m as f64;
            }
            poly.iter().map(|c| c / denom).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn phi_functions_agree_across_branches() {
        for z in [-0.999_999, -1.000_001, 0.999_999, 1.000_001] {
            let a = phi_functions(z);
            let b = phi_functions(if z.abs() < 1.0 { z * (1.0 + 2e-6) } else { z * (1.0 - 2e-6) });
            for k in 0..5 {
                assert!((a[k] - b[k]).abs() < 1e-5, "φ_{k} jumps at {z}");
            }
        }
        let p = phi_functions(-2.0);
        assert_abs_diff_eq!(p[1], (1.0 - (-2.0f64).exp()) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn lagrange_basis_interpolates_nodes() {
        let b = lagrange_basis(4);
        for (j, c) in b.iter().enumerate() {
            for x in 0..4 {
                let v: f64 = c.iter().enumerate().map(|(p, cp)| cp * (x as f64).powi(p as i32)).sum();
                assert_abs_diff_eq!(v, if x == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let st = DelayStepper::new(&[2.0, 5.0], 0.3, 0.5, 10).unwrap();
        let seg = HistorySegment::from_fn(0.5, 10, 2, |t| vec![t.sin(), 1.0 + t]);
        assert_eq!(semigroup_s(0.0, &seg, &st).unwrap(), seg);
    }

    #[test]
    fn uncoupled_constant_history_decays_exactly() {
        let a = 2.0;
        let st = DelayStepper::new(&[a], 0.0, 0.5, 10).unwrap();
        let seg = HistorySegment::from_fn(0.5, 10, 1, |_| vec![1.5]);
        let out = semigroup_s(2.0, &seg, &st).unwrap();
        assert_abs_diff_eq!(out.head()[0], 1.5 * (-a * 2.0f64).exp(), epsilon = 1e-13);
    }

    #[test]
    fn semigroup_property_on_grid() {
        let st = DelayStepper::new(&[2.0, 5.0, 10.0], 0.4, 0.5, 20).unwrap();
        let seg = HistorySegment::from_fn(0.5, 20, 3, |t| vec![(3.0 * t).cos(), t, 0.2]);
        let both = semigroup_s(0.75, &seg, &st).unwrap();
        let split = semigroup_s(0.5, &semigroup_s(0.25, &seg, &st).unwrap(), &st).unwrap();
        assert!(both.distance(&split) <= 1e-12 * seg.norm());
    }

    #[test]
    fn eigenfunction_evolves_by_its_root() {
        // Oracle: e^{λθ} is mapped to e^{λ(t+θ)} for a root λ of λ + a + σe^{−λτ} = 0.
        let (a, sigma, tau) = (2.0, -0.7, 1.0);
        let g = |x: f64| x + a + sigma * (-x * tau).exp();
        let (mut lo, mut hi) = (-3.0, 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let lambda = 0.5 * (lo + hi);
        let mut errs = Vec::new();
        for n_tau in [10, 20] {
            let st = DelayStepper::new(&[a], sigma, tau, n_tau).unwrap();
            let seg = HistorySegment::from_fn(tau, n_tau, 1, |t| vec![(lambda * t).exp()]);
            let out = semigroup_s(2.0, &seg, &st).unwrap();
            errs.push((out.head()[0] - (2.0 * lambda).exp()).abs());
        }
        assert!(errs[1] < 1e-7, "error {errs:?}");
        assert!(errs[0] / errs[1] > 12.0, "not fourth order: {errs:?}");
    }

    #[test]
    fn rejects_off_grid_time() {
        let st = DelayStepper::new(&[1.0], 0.1, 0.5, 10).unwrap();
        let seg = HistorySegment::zeros(0.5, 10, 1);
        assert!(semigroup_s(0.07, &seg, &st).is_err());
        assert!(semigroup_s(-0.05, &seg, &st).is_err());
    }
}

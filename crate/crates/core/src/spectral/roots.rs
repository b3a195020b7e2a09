//! Roots of the per-mode characteristic equation
//!
//! ```text
//! g(λ) = λ + a + σ e^{−λτ} = 0,     a = μ_k + μ,
//! ```
//!
//! obtained by substituting `e^{λt} e_k` into the linear delayed equation.
//! Seeds come from `λ = −a + W_b(−στ e^{aτ})/τ`; each seed is polished by
//! Newton's method on `g` and accepted only if `|g(λ)| < 1e-10`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lambert::{lambert_w, lambert_w_from_log};
use crate::{Error, Result};

pub const RESIDUAL_TOL: f64 = 1e-10;
pub const DEDUP_TOL: f64 = 1e-8;
const NEWTON_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicRoot {
    pub re: f64,
    pub im: f64,
    /// 1-based spatial mode `k`.
    pub mode: usize,
    /// Lambert-W branch of the seed that produced the root.
    pub branch: i64,
    pub residual: f64,
}

impl CharacteristicRoot {
    pub fn lambda(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn is_real(&self) -> bool {
        self.im.abs() <= DEDUP_TOL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchFailure {
    pub branch: i64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    /// Sorted by decreasing real part, then decreasing imaginary part.
    pub roots: Vec<CharacteristicRoot>,
    pub failures: Vec<BranchFailure>,
}

/// Coefficients of one scalar delay mode `v' = −a v − σ v(t − τ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayMode {
    pub a: f64,
    pub sigma: f64,
    pub tau: f64,
}

impl DelayMode {
    pub fn g(&self, lambda: Complex64) -> Complex64 {
        lambda + self.a + self.sigma * (-lambda * self.tau).exp()
    }

    pub fn dg(&self, lambda: Complex64) -> Complex64 {
        1.0 - self.sigma * self.tau * (-lambda * self.tau).exp()
    }
}

/// Roots of `λ + a + σe^{−λτ} = 0` seeded from Lambert-W branches
/// `−n_branches−1 ..= n_branches`. Branches whose seed does not polish to a
/// certified root are listed in [`RootSet::failures`].
pub fn characteristic_roots(a: f64, sigma: f64, tau: f64, n_branches: usize) -> Result<RootSet> {
    characteristic_roots_for_mode(a, sigma, tau, n_branches, 0)
}

pub(crate) fn characteristic_roots_for_mode(
    a: f64,
    sigma: f64,
    tau: f64,
    n_branches: usize,
    mode: usize,
) -> Result<RootSet> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::param("tau", format!("delay must be a finite nonnegative number, got {tau}")));
    }
    if !a.is_finite() || !sigma.is_finite() {
        return Err(Error::param("a", "coefficients must be finite"));
    }
    if tau == 0.0 || sigma == 0.0 {
        let lambda = if tau == 0.0 { -a - sigma } else { -a };
        let root = CharacteristicRoot { re: lambda, im: 0.0, mode, branch: 0, residual: 0.0 };
        let residual = DelayMode { a, sigma, tau }.g(root.lambda()).norm();
        return Ok(RootSet { roots: vec![CharacteristicRoot { residual, ..root }], failures: Vec::new() });
    }

    let dm = DelayMode { a, sigma, tau };
    let mut set = RootSet::default();
    // ln(−στ e^{aτ}) without forming the possibly overflowing argument.
    let ln_z = if sigma > 0.0 {
        Complex64::new((sigma * tau).ln() + a * tau, PI)
    } else {
        Complex64::new((-sigma * tau).ln() + a * tau, 0.0)
    };
    let z = ln_z.exp();
    let nb = n_branches as i64;
    for b in -nb - 1..=nb {
        let w = if z.re.is_finite() && z.norm() > 0.0 {
            lambert_w(b, Complex64::new(-sigma * tau * (a * tau).exp(), 0.0))
        } else {
            lambert_w_from_log(b, ln_z)
        };
        let Some(w) = w else {
            set.failures.push(BranchFailure { branch: b, reason: "Lambert-W seed did not converge".into() });
            continue;
        };
        let seed = w / tau - a;
        match polish(&dm, seed) {
            Ok(lambda) => push_unique(&mut set.roots, &dm, lambda, mode, b),
            Err(reason) => set.failures.push(BranchFailure { branch: b, reason }),
        }
    }
    for lambda in real_roots(&dm) {
        push_unique(&mut set.roots, &dm, lambda, mode, 0);
    }

    // Coefficients are real: close the set under conjugation.
    let mut extra = Vec::new();
    for r in &set.roots {
        if !r.is_real() {
            let conj = Complex64::new(r.re, -r.im);
            let present = set.roots.iter().chain(&extra).any(|q| (q.lambda() - conj).norm() <= DEDUP_TOL);
            if !present {
                let mirrored = if sigma > 0.0 { -r.branch - 1 } else { -r.branch };
                extra.push(CharacteristicRoot {
                    re: conj.re,
                    im: conj.im,
                    mode,
                    branch: mirrored,
                    residual: dm.g(conj).norm(),
                });
            }
        }
    }
    set.roots.extend(extra);
    for r in &mut set.roots {
        if r.is_real() {
            r.im = 0.0;
        }
    }
    set.roots.sort_by(|p, q| q.re.total_cmp(&p.re).then(q.im.total_cmp(&p.im)));
    Ok(set)
}

fn polish(dm: &DelayMode, seed: Complex64) -> Result<Complex64, String> {
    let mut lambda = seed;
    for _ in 0..NEWTON_STEPS {
        let g = dm.g(lambda);
        let dg = dm.dg(lambda);
        if !g.re.is_finite() || !g.im.is_finite() || dg.norm() == 0.0 {
            return Err(format!("Newton iteration left the finite range near {lambda}"));
        }
        let step = g / dg;
        lambda -= step;
        if step.norm() <= 1e-15 * (1.0 + lambda.norm()) {
            break;
        }
    }
    let residual = dm.g(lambda).norm();
    if residual < RESIDUAL_TOL {
        Ok(lambda)
    } else {
        Err(format!("no convergence after {NEWTON_STEPS} Newton steps (residual {residual:e})"))
    }
}

fn push_unique(roots: &mut Vec<CharacteristicRoot>, dm: &DelayMode, lambda: Complex64, mode: usize, branch: i64) {
    if roots.iter().any(|r| (r.lambda() - lambda).norm() <= DEDUP_TOL) {
        return;
    }
    roots.push(CharacteristicRoot { re: lambda.re, im: lambda.im, mode, branch, residual: dm.g(lambda).norm() });
}

/// Real roots by bracketing; guards against seeds that a Lambert branch maps
/// onto an already found root.
fn real_roots(dm: &DelayMode) -> Vec<Complex64> {
    let g = |x: f64| x + dm.a + dm.sigma * (-x * dm.tau).exp();
    let mut out = Vec::new();
    let refine = |lo: f64, hi: f64| -> Option<f64> {
        let (mut lo, mut hi) = (lo, hi);
        let (glo, ghi) = (g(lo), g(hi));
        if !(glo.is_finite() && ghi.is_finite()) || glo.signum() == ghi.signum() {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid).signum() == glo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
                break;
            }
        }
        let x = 0.5 * (lo + hi);
        polish(dm, Complex64::new(x, 0.0)).ok().map(|l| l.re)
    };
    if dm.sigma > 0.0 {
        // g is convex with minimum at ln(στ)/τ.
        let x_min = (dm.sigma * dm.tau).ln() / dm.tau;
        if g(x_min) < 0.0 {
            let mut hi = x_min + 1.0;
            while g(hi) < 0.0 {
                hi += 2.0 * (hi - x_min);
            }
            let mut lo = x_min - 1.0;
            while g(lo) < 0.0 {
                lo -= 2.0 * (x_min - lo);
            }
            out.extend(refine(x_min, hi));
            out.extend(refine(lo, x_min));
        }
    } else {
        // Strictly increasing: exactly one real root.
        let mut lo = -dm.a - 1.0;
        while g(lo) > 0.0 {
            lo = 2.0 * lo - 1.0;
        }
        let mut hi = -dm.a + 1.0;
        while g(hi) < 0.0 {
            hi = 2.0 * hi.abs() + 1.0;
        }
        out.extend(refine(lo, hi));
    }
    out.into_iter().map(|x| Complex64::new(x, 0.0)).collect()
}

/// Number of zeros of `g` inside `[x0, x1] × [y0, y1]` by the argument
/// principle. `None` when a zero lies on (or numerically at) the boundary.
pub fn winding_count(dm: &DelayMode, x0: f64, x1: f64, y0: f64, y1: f64) -> Option<i64> {
    let corners = [Complex64::new(x0, y0), Complex64::new(x1, y0), Complex64::new(x1, y1), Complex64::new(x0, y1)];
    let mut total = 0.0;
    for e in 0..4 {
        let (p, q) = (corners[e], corners[(e + 1) % 4]);
        let pieces = 256;
        for i in 0..pieces {
            let s0 = p + (q - p) * (i as f64 / pieces as f64);
            let s1 = p + (q - p) * ((i + 1) as f64 / pieces as f64);
            total += arg_increment(dm, s0, s1, 0)?;
        }
    }
    let turns = total / (2.0 * PI);
    let n = turns.round();
    ((turns - n).abs() < 1e-6).then_some(n as i64)
}

fn arg_increment(dm: &DelayMode, s0: Complex64, s1: Complex64, depth: usize) -> Option<f64> {
    let g0 = dm.g(s0);
    let g1 = dm.g(s1);
    let scale = 1.0 + s0.norm() + dm.a.abs();
    if g0.norm() < 1e-12 * scale || g1.norm() < 1e-12 * scale {
        return None;
    }
    let d = (g1 / g0).arg();
    if d.abs() < 0.2 || depth >= 40 {
        return Some(d);
    }
    let mid = (s0 + s1) * 0.5;
    Some(arg_increment(dm, s0, mid, depth + 1)? + arg_increment(dm, mid, s1, depth + 1)?)
}

/// Imaginary half-height beyond which no root has real part `≥ x0`.
pub fn root_height_bound(dm: &DelayMode, x0: f64) -> f64 {
    dm.a.abs() + x0.abs() + dm.sigma.abs() * (-x0 * dm.tau).exp() + 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn delay_free_limit_is_exact() {
        let set = characteristic_roots(2.5, 0.5, 0.0, 5).unwrap();
        assert_eq!(set.roots.len(), 1);
        assert_eq!(set.roots[0].re, -3.0);
        assert_eq!(set.roots[0].residual, 0.0);
    }

    #[test]
    fn principal_root_small_delay_coupling() {
        let set = characteristic_roots(1.0, 0.1, 0.5, 4).unwrap();
        let p = set.roots[0];
        assert!(p.is_real());
        assert_abs_diff_eq!(p.re, -1.180, epsilon = 5e-4);
        assert!(p.residual < 1e-10);
        // Independent check by direct substitution.
        let x = p.re;
        assert!((x + 1.0 + 0.1 * (-0.5 * x).exp()).abs() < 1e-10);
    }

    #[test]
    fn zero_coupling_has_single_root() {
        let set = characteristic_roots(1.0, 0.0, 1.0, 6).unwrap();
        assert_eq!(set.roots.len(), 1);
        assert_eq!(set.roots[0].re, -1.0);
        assert!(set.failures.is_empty());
    }

    #[test]
    fn negative_delay_rejected() {
        assert!(characteristic_roots(1.0, 0.1, -0.1, 3).is_err());
    }

    #[test]
    fn roots_close_under_conjugation_and_are_certified() {
        for (a, s, t) in [(2.0, 1.0, 1.0), (5.0, 0.5, 0.25), (1.5, -0.7, 0.5)] {
            let set = characteristic_roots(a, s, t, 6).unwrap();
            assert!(!set.roots.is_empty());
            for r in &set.roots {
                assert!(r.residual < RESIDUAL_TOL);
                if !r.is_real() {
                    assert!(set.roots.iter().any(|q| (q.re - r.re).abs() < 1e-8 && (q.im + r.im).abs() < 1e-8));
                }
            }
            for w in set.roots.windows(2) {
                assert!(w[0].re >= w[1].re);
            }
        }
    }

    #[test]
    fn huge_argument_uses_log_form() {
        // a·τ far beyond the exponent range of f64.
        let set = characteristic_roots(2000.0, 0.3, 1.0, 2).unwrap();
        assert!(!set.roots.is_empty());
        assert!(set.roots.iter().all(|r| r.residual < RESIDUAL_TOL));
    }

    #[test]
    fn winding_counts_simple_cases() {
        let dm = DelayMode { a: 1.0, sigma: 0.1, tau: 0.5 };
        // Two real roots (≈ −1.18 and ≈ −7.x); a box around the first only.
        assert_eq!(winding_count(&dm, -2.0, 0.0, -1.0, 1.0), Some(1));
        assert_eq!(winding_count(&dm, 0.5, 2.0, -1.0, 1.0), Some(0));
    }
}

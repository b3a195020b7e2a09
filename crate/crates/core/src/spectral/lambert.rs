//! Branches of the Lambert W function on the complex plane.
//!
//! Only used to seed the characteristic roots; every root is afterwards
//! polished and certified on the characteristic equation itself.

use std::f64::consts::{E, PI};

use num_complex::Complex64;

const MAX_ITER: usize = 80;

/// `W_k(z)`, solving `w e^w = z` on branch `k`, by Halley iteration.
///
/// Returns `None` when the iteration does not settle, or for `z = 0` on a
/// branch other than 0.
pub fn lambert_w(branch: i64, z: Complex64) -> Option<Complex64> {
    if z.norm() == 0.0 {
        return (branch == 0).then_some(Complex64::new(0.0, 0.0));
    }
    if !z.re.is_finite() || !z.im.is_finite() {
        return None;
    }
    let mut w = initial_guess(branch, z);
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (wp1 * 2.0);
        if denom.norm() == 0.0 || !denom.re.is_finite() {
            break;
        }
        let dw = f / denom;
        w -= dw;
        if dw.norm() <= 4.0 * f64::EPSILON * (1.0 + w.norm()) {
            return Some(w);
        }
    }
    let resid = (w * w.exp() - z).norm();
    (resid <= 1e-10 * z.norm().max(1.0)).then_some(w)
}

/// `W_k(z)` given `ln z` only, for arguments whose magnitude overflows `f64`.
/// Solves `w + ln w = ln z + 2πik` by Newton iteration.
pub fn lambert_w_from_log(branch: i64, ln_z: Complex64) -> Option<Complex64> {
    let target = ln_z + Complex64::new(0.0, 2.0 * PI * branch as f64);
    let l2 = target.ln();
    let mut w = target - l2 + l2 / target;
    for _ in 0..MAX_ITER {
        let f = w + w.ln() - target;
        let dw = f / (1.0 + 1.0 / w);
        w -= dw;
        if dw.norm() <= 4.0 * f64::EPSILON * (1.0 + w.norm()) {
            return Some(w);
        }
    }
    ((w + w.ln() - target).norm() <= 1e-10 * target.norm()).then_some(w)
}

fn initial_guess(branch: i64, z: Complex64) -> Complex64 {
    // Series about the branch point z = −1/e.
    let near_branch_point = (z * E + 1.0).norm() < 0.3;
    if near_branch_point {
        let p = ((z * E + 1.0) * 2.0).sqrt();
        let upper = z.im >= 0.0;
        let series = |s: f64| -1.0 + p * s - p * p / 3.0 + p * p * p * (11.0 / 72.0 * s);
        match branch {
            0 => return series(1.0),
            -1 if upper => return series(-1.0),
            1 if !upper => return series(-1.0),
            _ => {}
        }
    }
    if branch == 0 && z.norm() < 3.0 {
        return (z + 1.0).ln();
    }
    let l1 = z.ln() + Complex64::new(0.0, 2.0 * PI * branch as f64);
    let l2 = l1.ln();
    l1 - l2 + l2 / l1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(branch: i64, z: Complex64) -> Complex64 {
        let w = lambert_w(branch, z).unwrap_or_else(|| panic!("W_{branch}({z}) failed"));
        assert!((w * w.exp() - z).norm() < 1e-12 * z.norm().max(1.0), "W_{branch}({z}) = {w}");
        w
    }

    #[test]
    fn principal_branch_real_values() {
        let w = check(0, Complex64::new(1.0, 0.0));
        assert!((w.re - 0.567_143_290_409_783_8).abs() < 1e-14);
        assert!(w.im.abs() < 1e-15);
        let w = check(0, Complex64::new(E, 0.0));
        assert!((w.re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lower_real_branch_on_negative_interval() {
        let z = Complex64::new(-0.2, 0.0);
        let w0 = check(0, z);
        let wm1 = check(-1, z);
        assert!(w0.re > -1.0 && wm1.re < -1.0);
        assert!(w0.im.abs() < 1e-12 && wm1.im.abs() < 1e-12);
    }

    #[test]
    fn branches_are_distinct() {
        let z = Complex64::new(-2.0, 0.0);
        let ws: Vec<_> = (-4..=4).map(|k| check(k, z)).collect();
        for i in 0..ws.len() {
            for j in i + 1..ws.len() {
                assert!((ws[i] - ws[j]).norm() > 1e-3, "branches {i} and {j} coincide");
            }
        }
    }

    #[test]
    fn log_form_agrees_with_direct_form() {
        let z = Complex64::new(-50.0, 0.0);
        for k in [-3, -1, 1, 2] {
            let a = check(k, z);
            let b = lambert_w_from_log(k, z.ln()).unwrap();
            assert!((a - b).norm() < 1e-10, "branch {k}: {a} vs {b}");
        }
    }
}

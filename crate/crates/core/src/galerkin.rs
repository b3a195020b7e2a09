//! Sine-Galerkin basis on `(0, π)` with Dirichlet conditions.
//!
//! Basis functions are `e_k(x) = √(2/π) sin(kx)`, orthonormal in `L²(0, π)`, so
//! the Euclidean norm of a coefficient vector is the `H` norm. Nonlinear terms
//! are evaluated pseudo-spectrally on the interior points `x_j = jπ/J` of a
//! padded grid; for a polynomial of degree `q` the padding `J > (q+1)N/2`
//! removes all aliasing into the retained modes.

use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct SineGrid {
    n_modes: usize,
    n_points: usize,
    /// `n_points × n_modes`, entry `e_k(x_j)`.
    synthesis: Vec<f64>,
    /// `n_modes × n_points`, entry `(π/J) e_k(x_j)`.
    analysis: Vec<f64>,
}

impl SineGrid {
    /// Grid exact for products up to total polynomial `degree` (at least 1).
    pub fn new(n_modes: usize, degree: usize) -> Self {
        let degree = degree.max(1);
        let j = ((degree + 1) * n_modes) / 2 + 1;
        let j = j.max(n_modes + 1);
        Self::with_intervals(n_modes, j)
    }

    /// Grid with `intervals` subintervals (`intervals − 1` interior points).
    pub fn with_intervals(n_modes: usize, intervals: usize) -> Self {
        assert!(intervals > n_modes, "grid must resolve every retained mode");
        let n_points = intervals - 1;
        let norm = (2.0 / PI).sqrt();
        let dx = PI / intervals as f64;
        let mut synthesis = vec![0.0; n_points * n_modes];
        let mut analysis = vec![0.0; n_modes * n_points];
        for p in 0..n_points {
            let x = (p + 1) as f64 * dx;
            for k in 0..n_modes {
                let e = norm * ((k + 1) as f64 * x).sin();
                synthesis[p * n_modes + k] = e;
                analysis[k * n_points + p] = dx * e;
            }
        }
        Self { n_modes, n_points, synthesis, analysis }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Interior collocation points.
    pub fn points(&self) -> Vec<f64> {
        let dx = PI / (self.n_points + 1) as f64;
        (1..=self.n_points).map(|p| p as f64 * dx).collect()
    }

    pub fn to_physical(&self, coeffs: &[f64], out: &mut [f64]) {
        for (p, o) in out.iter_mut().enumerate() {
            let row = &self.synthesis[p * self.n_modes..(p + 1) * self.n_modes];
            *o = row.iter().zip(coeffs).map(|(e, c)| e * c).sum();
        }
    }

    pub fn to_coefficients(&self, phys: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.analysis[k * self.n_points..(k + 1) * self.n_points];
            *o = row.iter().zip(phys).map(|(e, u)| e * u).sum();
        }
    }

    /// Galerkin projection of the pointwise map `u ↦ f(u)`. `scratch` must hold
    /// `n_points` values.
    pub fn project_pointwise(&self, coeffs: &[f64], f: impl Fn(f64) -> f64, scratch: &mut [f64], out: &mut [f64]) {
        self.to_physical(coeffs, scratch);
        for u in scratch.iter_mut() {
            *u = f(*u);
        }
        self.to_coefficients(scratch, out);
    }
}

/// `Σ_k a_k u^k` with `coeffs[0] = a_1` (no constant term).
pub fn eval_polynomial(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, a| acc * u + a) * u
}

/// Euclidean (= `H`) norm of a coefficient vector.
pub fn h_norm(coeffs: &[f64]) -> f64 {
    coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn transforms_invert_on_retained_modes() {
        let g = SineGrid::new(5, 3);
        let c = [0.3, -1.0, 0.25, 0.0, 2.0];
        let mut phys = vec![0.0; g.n_points()];
        let mut back = vec![0.0; 5];
        g.to_physical(&c, &mut phys);
        g.to_coefficients(&phys, &mut back);
        for (a, b) in c.iter().zip(&back) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn cubic_projection_matches_quadrature() {
        // Oracle: composite Simpson on a fine grid of ∫ u(x)^3 e_k(x) dx.
        let n = 4;
        let g = SineGrid::new(n, 3);
        let c = [0.7, -0.4, 0.2, 0.1];
        let mut scratch = vec![0.0; g.n_points()];
        let mut out = vec![0.0; n];
        g.project_pointwise(&c, |u| u * u * u, &mut scratch, &mut out);

        let norm = (2.0 / PI).sqrt();
        let u = |x: f64| (0..n).map(|k| c[k] * norm * ((k + 1) as f64 * x).sin()).sum::<f64>();
        let m = 20_000;
        let dx = PI / m as f64;
        for (k, &got) in out.iter().enumerate() {
            let mut s = 0.0;
            for i in 0..=m {
                let x = i as f64 * dx;
                let w = if i == 0 || i == m {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                s += w * u(x).powi(3) * norm * ((k + 1) as f64 * x).sin();
            }
            assert_abs_diff_eq!(got, s * dx / 3.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn polynomial_has_no_constant_term() {
        assert_eq!(eval_polynomial(&[1.0, 0.0, -1.0], 2.0), 2.0 - 8.0);
        assert_eq!(eval_polynomial(&[], 3.0), 0.0);
        assert_eq!(eval_polynomial(&[0.0, 0.0, -1.0], 0.5), -0.125);
    }
}

//! History segments: elements of `C([−τ, 0], H)` sampled on a uniform grid of
//! sine-coefficient vectors.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A function `[−τ, 0] → H` sampled at `θ_i = −τ + i·h`, `i = 0..=n_tau`,
/// with `τ = n_tau·h`. Each sample is a vector of `n_modes` sine coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistorySegment {
    tau: f64,
    n_tau: usize,
    n_modes: usize,
    /// Row-major `(n_tau + 1) × n_modes`.
    values: Vec<f64>,
}

impl HistorySegment {
    pub fn zeros(tau: f64, n_tau: usize, n_modes: usize) -> Self {
        Self { tau, n_tau, n_modes, values: vec![0.0; (n_tau + 1) * n_modes] }
    }

    pub fn from_values(tau: f64, n_tau: usize, n_modes: usize, values: Vec<f64>) -> Result<Self> {
        if n_tau == 0 || n_modes == 0 {
            return Err(Error::param("segment", "grid needs at least one step and one mode"));
        }
        if values.len() != (n_tau + 1) * n_modes {
            return Err(Error::param(
                "values",
                format!("expected {} values, got {}", (n_tau + 1) * n_modes, values.len()),
            ));
        }
        Ok(Self { tau, n_tau, n_modes, values })
    }

    /// Samples `f(θ)` at every grid point.
    pub fn from_fn(tau: f64, n_tau: usize, n_modes: usize, mut f: impl FnMut(f64) -> Vec<f64>) -> Self {
        let h = tau / n_tau as f64;
        let mut values = Vec::with_capacity((n_tau + 1) * n_modes);
        for i in 0..=n_tau {
            let theta = -tau + i as f64 * h;
            let v = f(theta);
            assert_eq!(v.len(), n_modes, "sample has wrong number of modes");
            values.extend(v);
        }
        Self { tau, n_tau, n_modes, values }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn grid_step(&self) -> f64 {
        self.tau / self.n_tau as f64
    }

    pub fn n_points(&self) -> usize {
        self.n_tau + 1
    }

    pub fn theta(&self, i: usize) -> f64 {
        -self.tau + i as f64 * self.grid_step()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_modes..(i + 1) * self.n_modes]
    }

    pub fn point_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.n_modes..(i + 1) * self.n_modes]
    }

    /// The value at `θ = 0`.
    pub fn head(&self) -> &[f64] {
        self.point(self.n_tau)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Time series of one spatial mode over the grid.
    pub fn mode_series(&self, k: usize) -> Vec<f64> {
        (0..self.n_points()).map(|i| self.values[i * self.n_modes + k]).collect()
    }

    pub fn set_mode_series(&mut self, k: usize, series: &[f64]) {
        for (i, v) in series.iter().enumerate() {
            self.values[i * self.n_modes + k] = *v;
        }
    }

    /// `sup_θ ‖φ(θ)‖_H` over the grid.
    pub fn norm(&self) -> f64 {
        self.values.chunks(self.n_modes).map(|p| p.iter().map(|x| x * x).sum::<f64>()).fold(0.0, f64::max).sqrt()
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.n_tau == other.n_tau && self.n_modes == other.n_modes && self.tau == other.tau
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert!(self.same_grid(other));
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Self { values, ..*self }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert!(self.same_grid(other));
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Self { values, ..*self }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), ..*self }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.sub(other).norm()
    }

    /// Flattens to the embedding used by point clouds: the `(n_tau + 1)·n_modes`
    /// coefficients in grid order.
    pub fn to_embedding(&self) -> Vec<f64> {
        self.values.clone()
    }

    pub fn from_embedding(tau: f64, n_tau: usize, n_modes: usize, v: &[f64]) -> Result<Self> {
        Self::from_values(tau, n_tau, n_modes, v.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn norm_is_sup_of_euclidean() {
        let seg = HistorySegment::from_values(1.0, 2, 2, vec![3.0, 4.0, 0.0, 1.0, -1.0, 0.0]).unwrap();
        assert_eq!(seg.norm(), 5.0);
        assert_eq!(seg.head(), &[-1.0, 0.0]);
        assert_eq!(seg.theta(0), -1.0);
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(HistorySegment::from_values(1.0, 2, 2, vec![0.0; 5]).is_err());
    }

    proptest! {
        #[test]
        fn embedding_round_trip(v in proptest::collection::vec(-1e3f64..1e3, 12)) {
            let seg = HistorySegment::from_values(0.5, 3, 3, v).unwrap();
            let back = HistorySegment::from_embedding(0.5, 3, 3, &seg.to_embedding()).unwrap();
            prop_assert_eq!(back, seg);
        }
    }
}

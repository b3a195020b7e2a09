//! Linear part of the delayed equation: Laplacian spectrum, characteristic
//! roots, the history-space decomposition `X = X^U ⊕ X^S` and the constants
//! `K`, `M` of the exponential dichotomy.

mod lambert;
mod model;
mod projection;
mod roots;
mod semigroup;

use serde::{Deserialize, Serialize};

pub use lambert::{lambert_w, lambert_w_from_log};
pub use model::{
    build_model, dichotomy_sample, random_unit_history, ArgMax, ConstantSource, EstimationMetadata, ModelOptions,
    SpectralModel, ESTIMATE_CAVEAT,
};
pub use projection::{SpectralProjector, DEFECTIVE_TOL};
pub use roots::{
    characteristic_roots, root_height_bound, winding_count, BranchFailure, CharacteristicRoot, DelayMode, RootSet,
    DEDUP_TOL, RESIDUAL_TOL,
};
pub use semigroup::{phi_functions, semigroup_s, DelayStepper};

use crate::{Error, Result};

/// Dirichlet Laplacian on `(0, π)`: eigenvalues `k²`, `k = 1..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplacianSpectrum {
    eigenvalues: Vec<f64>,
}

impl LaplacianSpectrum {
    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

pub fn laplacian_spectrum(n: usize) -> Result<LaplacianSpectrum> {
    if n == 0 {
        return Err(Error::param("N", "need at least one spatial mode"));
    }
    Ok(LaplacianSpectrum { eigenvalues: (1..=n).map(|k| (k * k) as f64).collect() })
}

/// Characteristic roots of spatial mode `k` (1-based) for `λ + k² + μ + σe^{−λτ} = 0`.
pub fn mode_roots(k: usize, mu: f64, sigma: f64, tau: f64, n_branches: usize) -> Result<RootSet> {
    roots::characteristic_roots_for_mode((k * k) as f64 + mu, sigma, tau, n_branches, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_eigenvalues() {
        assert_eq!(laplacian_spectrum(3).unwrap().eigenvalues(), &[1.0, 4.0, 9.0]);
        assert_eq!(laplacian_spectrum(1).unwrap().eigenvalues(), &[1.0]);
        assert!(laplacian_spectrum(0).is_err());
    }
}

use std::path::{Path, PathBuf};

use rdsdim::solver::{steps_for, ModelConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Everything a run needs. Accepted as JSON or TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub bound_params: BoundParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Overrides `model.h` when present.
    pub h: Option<f64>,
    /// Length of the `simulate` and `ergodic` runs.
    #[serde(rename = "T")]
    pub t: f64,
    pub burn_in: f64,
    /// The first seed drives every stage; `ergodic` reports all of them.
    pub seeds: Vec<u64>,
    pub horizons: Vec<f64>,
    pub n_initial: usize,
    pub n_pairs: usize,
    /// Random histories used to estimate `K` and `M`.
    pub samples: usize,
    pub n_branches: usize,
    pub n_scales: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            h: None,
            t: 1000.0,
            burn_in: 10.0,
            seeds: vec![0],
            horizons: vec![2.0, 4.0, 8.0],
            n_initial: 200,
            n_pairs: 100,
            samples: 200,
            n_branches: 8,
            n_scales: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundParams {
    pub alpha: f64,
    /// Fixed `t0`; when absent the bound is minimised over `t0_grid`.
    pub t0: Option<f64>,
    pub t0_grid: Vec<f64>,
    pub cutoff_index: usize,
    /// Absorbing radius; estimated from a trajectory when absent.
    pub c: Option<f64>,
    #[serde(rename = "K_override")]
    pub k_override: Option<f64>,
    #[serde(rename = "M_override")]
    pub m_override: Option<f64>,
}

impl Default for BoundParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            t0: None,
            t0_grid: (1..=20).map(|i| 0.5 * i as f64).collect(),
            cutoff_index: 2,
            c: None,
            k_override: None,
            m_override: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, path.extension().and_then(|e| e.to_str()))
    }

    /// JSON for a `.json` extension, TOML for `.toml`, otherwise whichever parses.
    pub fn parse(text: &str, extension: Option<&str>) -> Result<Self, CliError> {
        let json = || serde_json::from_str::<Self>(text).map_err(|e| CliError::parse(format!("JSON config: {e}")));
        let toml = || toml::from_str::<Self>(text).map_err(|e| CliError::parse(format!("TOML config: {e}")));
        match extension {
            Some("json") => json(),
            Some("toml") => toml(),
            _ => json().or_else(|_| toml()),
        }
    }

    /// Folds `numerics.h` into the model and applies command-line overrides.
    pub fn resolve(mut self, seed: Option<u64>, quick: bool) -> Result<Self, CliError> {
        if let Some(h) = self.numerics.h.take() {
            self.model.h = h;
        }
        if let Some(s) = seed {
            self.numerics.seeds = vec![s];
        }
        self.validate()?;
        if quick {
            self.shrink();
        }
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.numerics.seeds[0]
    }

    /// Ten times smaller ensembles and runs, with floors that keep every stage meaningful.
    fn shrink(&mut self) {
        let n = &mut self.numerics;
        // Dimension estimators need at least 100 points.
        n.n_initial = (n.n_initial / 10).max(100);
        n.n_pairs = (n.n_pairs / 10).max(10);
        n.samples = (n.samples / 10).max(20);
        let h = self.model.h;
        let steps = ((n.t / h).round() as usize / 10).max(((2.0 * n.burn_in + 10.0) / h).ceil() as usize);
        n.t = steps as f64 * h;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.validate().map_err(|e| CliError::from(e).within("model"))?;
        let h = self.model.h;
        let n = &self.numerics;
        let aligned = |field: &str, t: f64| {
            steps_for(t, h)
                .map(|_| ())
                .map_err(|_| CliError::config(field, format!("{t} is not a multiple of h = {h}")))
        };
        if !(n.t > 0.0) || !n.t.is_finite() {
            return Err(CliError::config("numerics.T", format!("must be positive, got {}", n.t)));
        }
        aligned("numerics.T", n.t)?;
        if !(n.burn_in >= 0.0 && n.burn_in < n.t) {
            return Err(CliError::config("numerics.burn_in", format!("must lie in [0, T), got {}", n.burn_in)));
        }
        if n.seeds.is_empty() {
            return Err(CliError::config("numerics.seeds", "need at least one seed"));
        }
        if n.horizons.is_empty() || n.horizons[0] <= 0.0 || n.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::config("numerics.horizons", "must be nonempty, positive and strictly increasing"));
        }
        for &t in &n.horizons {
            aligned("numerics.horizons", t)?;
        }
        if n.n_initial < 2 {
            return Err(CliError::config("numerics.n_initial", "need at least two initial histories"));
        }
        for (field, v) in
            [("numerics.n_pairs", n.n_pairs), ("numerics.samples", n.samples), ("numerics.n_branches", n.n_branches)]
        {
            if v == 0 {
                return Err(CliError::config(field, "must be positive"));
            }
        }
        if !(3..=30).contains(&n.n_scales) {
            return Err(CliError::config("numerics.n_scales", format!("must lie in 3..=30, got {}", n.n_scales)));
        }

        let b = &self.bound_params;
        if !(b.alpha > 0.0 && b.alpha < 2.0) {
            return Err(CliError::config("bound_params.alpha", format!("must lie in (0, 2), got {}", b.alpha)));
        }
        if let Some(t0) = b.t0 {
            if !(t0 > 0.0) || !t0.is_finite() {
                return Err(CliError::config("bound_params.t0", format!("must be positive, got {t0}")));
            }
            aligned("bound_params.t0", t0)?;
        } else if b.t0_grid.is_empty() || b.t0_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(CliError::config("bound_params.t0_grid", "must be nonempty and positive"));
        }
        if b.cutoff_index == 0 {
            return Err(CliError::config("bound_params.cutoff_index", "must be at least 1"));
        }
        if let Some(c) = b.c {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(CliError::config("bound_params.c", format!("must be finite and nonnegative, got {c}")));
            }
        }
        for (field, v) in [("bound_params.K_override", b.k_override), ("bound_params.M_override", b.m_override)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(CliError::config(field, format!("must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML: &str = r#"
        [model]
        mu = 1.0
        sigma = 0.3
        tau = 0.5
        N = 3
        h = 0.02
        f_kind = { kind = "zero" }
        g_coeffs = [[1.0, 0.3]]
    "#;

    #[test]
    fn toml_and_json_agree() {
        let a = RunConfig::parse(TOML, Some("toml")).unwrap();
        let json = serde_json::to_string(&a).unwrap();
        let b = RunConfig::parse(&json, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.numerics, Numerics::default());
    }

    #[test]
    fn misaligned_delay_names_the_field() {
        let cfg = RunConfig::parse(&TOML.replace("h = 0.02", "h = 0.03"), Some("toml")).unwrap();
        let err = cfg.resolve(None, false).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("model.h"), "{}", err.message);
    }

    #[test]
    fn alpha_range_and_horizon_order() {
        let mut cfg = RunConfig::parse(TOML, Some("toml")).unwrap();
        cfg.bound_params.alpha = 2.0;
        assert!(cfg.validate().unwrap_err().message.contains("bound_params.alpha"));
        cfg.bound_params.alpha = 1.0;
        cfg.numerics.horizons = vec![4.0, 2.0];
        assert!(cfg.validate().unwrap_err().message.contains("numerics.horizons"));
    }

    #[test]
    fn quick_shrinks_sizes() {
        let cfg = RunConfig::parse(TOML, Some("toml")).unwrap().resolve(Some(7), true).unwrap();
        assert_eq!(cfg.seed(), 7);
        assert_eq!(cfg.numerics.n_initial, 100);
        assert!((cfg.numerics.t - 100.0).abs() < 1e-9);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = TOML.replace("[model]", "[numerics]\nbogus = 1\n[model]");
        assert_eq!(RunConfig::parse(&text, Some("toml")).unwrap_err().code, 2);
    }
}

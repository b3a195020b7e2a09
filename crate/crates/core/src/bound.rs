//! The majorant process `R`, its ergodic averages, the feasibility condition
//! and the Hausdorff-dimension bounds.
//!
//! `R(θ_s ω) = Σ_k |a_k| (c + (c+1) r(θ_s ω))^{k−1}` bounds the local Lipschitz
//! constant of the polynomial `F` on the absorbing ball. Absolute values are
//! used so that `R` is a genuine majorant; `0⁰ = 1`.

use serde::{Deserialize, Serialize};

use crate::noise::OUProcessPath;
use crate::spectral::SpectralModel;
use crate::{Error, Result};

pub const BATCHES: usize = 20;

pub const MAJORANT_NOTE: &str = "R uses |a_k| in place of a_k so that it majorizes the Lipschitz constant of F";
pub const LAMBDA_NOTE: &str = "the alpha-independent variant is evaluated with Lambda := k_m";

/// `Σ_k |a_k| (c + (c+1) r)^{k−1}`.
pub fn r_of(r_value: f64, f_coeffs: &[f64], c: f64) -> Result<f64> {
    if !(r_value >= 0.0) || !r_value.is_finite() {
        return Err(Error::param("r_value", format!("must be finite and nonnegative, got {r_value}")));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::param("c", format!("must be finite and nonnegative, got {c}")));
    }
    Ok(r_unchecked(r_value, f_coeffs, c))
}

fn r_unchecked(r_value: f64, f_coeffs: &[f64], c: f64) -> f64 {
    let base = c + (c + 1.0) * r_value;
    // Horner in `base`; the first coefficient multiplies base⁰ = 1.
    f_coeffs.iter().rev().fold(0.0, |acc, a| acc * base + a.abs())
}

/// `(∫ R ds, ∫ R² ds)` by the trapezoid rule over a sampled `r` path.
pub fn r_integrals(r_values: &[f64], h: f64, f_coeffs: &[f64], c: f64) -> (f64, f64) {
    let mut int_r = 0.0;
    let mut int_r2 = 0.0;
    for w in r_values.windows(2) {
        let (a, b) = (r_unchecked(w[0], f_coeffs, c), r_unchecked(w[1], f_coeffs, c));
        int_r += 0.5 * h * (a + b);
        int_r2 += 0.5 * h * (a * a + b * b);
    }
    (int_r, int_r2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicAverages {
    #[serde(rename = "ER")]
    pub er: f64,
    #[serde(rename = "ER2")]
    pub er2: f64,
    pub stderr_r: f64,
    pub stderr_r2: f64,
    pub batches: usize,
    pub burn_in: f64,
    pub averaging_time: f64,
    pub warning: Option<String>,
}

/// Time averages of `R(θ_s ω)` and `R²(θ_s ω)` after `burn_in`, with
/// batch-means standard errors.
pub fn ergodic_averages(z: &OUProcessPath, f_coeffs: &[f64], c: f64, burn_in: f64) -> Result<ErgodicAverages> {
    r_of(0.0, f_coeffs, c)?;
    if !(burn_in >= 0.0) {
        return Err(Error::param("burn_in", format!("must be nonnegative, got {burn_in}")));
    }
    let skip = (burn_in / z.h).ceil() as usize;
    let n = z.r_values.len();
    if n < skip + 2 * BATCHES + 1 {
        return Err(Error::param(
            "z",
            format!("path of {n} points is too short for burn-in {skip} and {BATCHES} batches"),
        ));
    }
    let rs = &z.r_values[skip..];
    let steps = rs.len() - 1;
    let per_batch = steps / BATCHES;
    let used = per_batch * BATCHES;
    let mut means_r = Vec::with_capacity(BATCHES);
    let mut means_r2 = Vec::with_capacity(BATCHES);
    for b in 0..BATCHES {
        let seg = &rs[b * per_batch..=(b + 1) * per_batch];
        let (ir, ir2) = r_integrals(seg, z.h, f_coeffs, c);
        let t = per_batch as f64 * z.h;
        means_r.push(ir / t);
        means_r2.push(ir2 / t);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let stderr = |v: &[f64]| {
        let m = mean(v);
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64 / v.len() as f64).sqrt()
    };
    let er = mean(&means_r);
    let er2 = mean(&means_r2);
    let (se_r, se_r2) = (stderr(&means_r), stderr(&means_r2));
    let mut warning = None;
    if se_r > 0.05 * er.abs() || se_r2 > 0.05 * er2.abs() {
        let msg = format!(
            "batch-means standard error exceeds 5% of the mean (E(R) = {er} ± {se_r}, E(R²) = {er2} ± {se_r2})"
        );
        log::warn!("{msg}");
        warning = Some(msg);
    }
    Ok(ErgodicAverages {
        er,
        er2,
        stderr_r: se_r,
        stderr_r2: se_r2,
        batches: BATCHES,
        burn_in: skip as f64 * z.h,
        averaging_time: used as f64 * z.h,
        warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub alpha: f64,
    pub t0: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub rho1: f64,
    pub rhom: f64,
    pub k_m: usize,
    #[serde(rename = "L_f")]
    pub l_f: f64,
    #[serde(rename = "ER")]
    pub er: f64,
    #[serde(rename = "ER2")]
    pub er2: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(rename = "F_coeffs", default)]
    pub f_coeffs: Vec<f64>,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("alpha", self.alpha),
            ("t0", self.t0),
            ("K", self.k),
            ("M", self.m),
            ("rho1", self.rho1),
            ("rhom", self.rhom),
            ("L_f", self.l_f),
            ("ER", self.er),
            ("ER2", self.er2),
            ("c", self.c),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::config("alpha", format!("must lie in (0, 2), got {}", self.alpha)));
        }
        if self.t0 < 0.0 {
            return Err(Error::config("t0", format!("must be nonnegative, got {}", self.t0)));
        }
        if !(self.rhom < 0.0) {
            return Err(Error::config("rhom", format!("must be negative, got {}", self.rhom)));
        }
        if !(self.rho1 > self.rhom) {
            return Err(Error::config("rho1", format!("must exceed rhom = {}, got {}", self.rhom, self.rho1)));
        }
        if self.k_m == 0 {
            return Err(Error::config("k_m", "must be at least 1"));
        }
        for (name, v) in [("K", self.k), ("M", self.m)] {
            if !(v > 0.0) {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [("L_f", self.l_f), ("ER", self.er), ("ER2", self.er2), ("c", self.c)] {
            if v < 0.0 {
                return Err(Error::config(name, format!("must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    fn gap(&self) -> f64 {
        self.rho1 - self.rhom
    }

    /// `α' M + 2K + 2KML_f/(ϱ₁−ϱ_m) + 2KM/√(2(ϱ₁−ϱ_m))` with `α'` given.
    fn eta_with(&self, alpha: f64) -> f64 {
        let gap = self.gap();
        alpha * self.m
            + 2.0 * self.k
            + 2.0 * self.k * self.m * self.l_f / gap
            + 2.0 * self.k * self.m / (2.0 * gap).sqrt()
    }

    fn exponent(&self) -> f64 {
        (self.m * self.l_f + self.rho1 + 2.0 * self.er + 2.0 * self.er2) * self.t0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub feasible: bool,
    /// `1 − η e^{exponent}`.
    pub margin: f64,
    pub eta: f64,
    pub exponent: f64,
    pub product: f64,
}

pub fn check_condition(inputs: &BoundInputs) -> Result<ConditionCheck> {
    inputs.validate()?;
    let eta = inputs.eta_with(inputs.alpha);
    let exponent = inputs.exponent();
    let product = eta * exponent.exp();
    Ok(ConditionCheck { feasible: product < 1.0, margin: 1.0 - product, eta, exponent, product })
}

/// One evaluation of the dimension formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionFormula {
    pub eta: f64,
    pub product: f64,
    pub feasible: bool,
    pub numerator: f64,
    pub denominator: f64,
    /// Absent when the condition fails.
    pub d_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub eta: f64,
    pub exponent: f64,
    pub product: f64,
    pub margin: f64,
    pub feasible: bool,
    pub numerator: f64,
    pub denominator: f64,
    pub d_bound: Option<f64>,
    /// The variant with `α ↑ 2`, constant `2M` and `ln 4`.
    pub d_bound_alpha2: DimensionFormula,
    pub notes: Vec<String>,
}

fn evaluate(inputs: &BoundInputs, eta: f64, log_factor: f64) -> Result<DimensionFormula> {
    let exponent = inputs.exponent();
    let product = eta * exponent.exp();
    let km = inputs.k_m as f64;
    let numerator = -km.ln() - km * log_factor;
    let denominator = eta.ln() + exponent;
    let feasible = product < 1.0;
    let d_bound = if feasible {
        if denominator >= 0.0 {
            return Err(Error::InternalConsistency(format!(
                "condition holds (η·e^exponent = {product}) but the denominator {denominator} is nonnegative"
            )));
        }
        Some(numerator / denominator)
    } else {
        None
    };
    Ok(DimensionFormula { eta, product, feasible, numerator, denominator, d_bound })
}

pub fn hausdorff_bound(inputs: &BoundInputs) -> Result<BoundReport> {
    let check = check_condition(inputs)?;
    let main = evaluate(inputs, check.eta, (2.0 + 4.0 / inputs.alpha).ln())?;
    let alpha2 = evaluate(inputs, inputs.eta_with(2.0), 4f64.ln())?;
    Ok(BoundReport {
        inputs: inputs.clone(),
        eta: check.eta,
        exponent: check.exponent,
        product: check.product,
        margin: check.margin,
        feasible: check.feasible,
        numerator: main.numerator,
        denominator: main.denominator,
        d_bound: main.d_bound,
        d_bound_alpha2: alpha2,
        notes: vec![MAJORANT_NOTE.to_string(), LAMBDA_NOTE.to_string()],
    })
}

/// Bound inputs from an estimated spectral model and ergodic averages.
pub fn compose_inputs(
    model: &SpectralModel,
    averages: &ErgodicAverages,
    alpha: f64,
    t0: f64,
    l_f: f64,
    c: f64,
    f_coeffs: &[f64],
) -> BoundInputs {
    BoundInputs {
        alpha,
        t0,
        k: model.k,
        m: model.m,
        rho1: model.rho1(),
        rhom: model.rhom(),
        k_m: model.k_m,
        l_f,
        er: averages.er,
        er2: averages.er2,
        c,
        f_coeffs: f_coeffs.to_vec(),
    }
}

/// Evaluates the bound at every `t0` of the grid and keeps the smallest
/// feasible `d_bound`; falls back to the last grid point when none is feasible.
pub fn best_t0(inputs: &BoundInputs, grid: &[f64]) -> Result<BoundReport> {
    let mut best: Option<BoundReport> = None;
    let mut last = None;
    for &t0 in grid {
        let rep = hausdorff_bound(&BoundInputs { t0, ..inputs.clone() })?;
        if let Some(d) = rep.d_bound {
            if best.as_ref().and_then(|b| b.d_bound).is_none_or(|bd| d < bd) {
                best = Some(rep.clone());
            }
        }
        last = Some(rep);
    }
    best.or(last).ok_or_else(|| Error::param("grid", "no t0 values given"))
}

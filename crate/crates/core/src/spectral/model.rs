//! Spectral model of the linear part: roots over all retained spatial modes,
//! the decomposition at a cutoff `ϱ_m`, and sampled dichotomy constants.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::projection::SpectralProjector;
use super::roots::{characteristic_roots_for_mode, winding_count, CharacteristicRoot, DelayMode, DEDUP_TOL};
use super::semigroup::DelayStepper;
use super::LaplacianSpectrum;
use crate::noise::rng_for;
use crate::{Error, HistorySegment, Result};

const PURPOSE_DICHOTOMY: u64 = 1 << 20;

pub const ESTIMATE_CAVEAT: &str = "K and M are sampled suprema over finitely many smooth unit histories and \
     a finite time grid; they are lower estimates of the true constants";

/// Where a dichotomy constant came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantSource {
    Sampled,
    Override,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArgMax {
    pub sample: usize,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationMetadata {
    pub samples: usize,
    pub seed: u64,
    pub horizon: f64,
    pub n_tau: usize,
    pub k_source: ConstantSource,
    pub m_source: ConstantSource,
    /// Largest sampled `‖Q S(t)φ‖ e^{−ϱ_m t}`; `K` is this value floored at 1.
    pub k_sampled: ArgMax,
    /// Largest sampled `max(‖S(t)φ‖, ‖P S(t)φ‖) e^{−ϱ₁ t}`.
    pub m_sampled: ArgMax,
    pub branch_failures: usize,
    pub caveat: String,
}

/// Options for [`build_model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    /// History grid points per delay interval.
    pub n_tau: usize,
    pub n_branches: usize,
    pub seed: u64,
    /// Sampling horizon in units of `τ`.
    pub horizon_taus: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self { n_tau: 50, n_branches: 8, seed: 0, horizon_taus: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub eigenvalues: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
    pub tau: f64,
    pub roots: Vec<CharacteristicRoot>,
    pub rho_list: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub cutoff_index: usize,
    pub k_m: usize,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub gap: f64,
    pub estimation_metadata: EstimationMetadata,
    #[serde(skip)]
    stepper: Option<DelayStepper>,
    #[serde(skip)]
    projector: Option<SpectralProjector>,
}

impl SpectralModel {
    pub fn rho1(&self) -> f64 {
        self.rho_list[0]
    }

    pub fn rhom(&self) -> f64 {
        self.rho_list[self.cutoff_index - 1]
    }

    pub fn n_tau(&self) -> usize {
        self.estimation_metadata.n_tau
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Roots above the cutoff, i.e. those spanning the range of `P`.
    pub fn retained_roots(&self) -> Vec<CharacteristicRoot> {
        let cut = self.rhom() - DEDUP_TOL;
        self.roots.iter().copied().filter(|r| r.re >= cut).collect()
    }

    pub fn stepper(&self) -> Result<&DelayStepper> {
        self.stepper
            .as_ref()
            .ok_or_else(|| Error::InternalConsistency("spectral model was not rebuilt after loading".into()))
    }

    pub fn projector(&self) -> Result<&SpectralProjector> {
        self.projector
            .as_ref()
            .ok_or_else(|| Error::InternalConsistency("spectral model was not rebuilt after loading".into()))
    }

    pub fn project_p(&self, seg: &HistorySegment) -> Result<HistorySegment> {
        self.projector()?.project(seg)
    }

    pub fn project_q(&self, seg: &HistorySegment) -> Result<HistorySegment> {
        self.projector()?.complement(seg)
    }

    pub fn semigroup(&self, t: f64, seg: &HistorySegment) -> Result<HistorySegment> {
        super::semigroup::semigroup_s(t, seg, self.stepper()?)
    }

    /// Replaces sampled constants by user values; the metadata records the source.
    pub fn with_overrides(mut self, k: Option<f64>, m: Option<f64>) -> Result<Self> {
        if let Some(k) = k {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::config("K_override", format!("must be positive, got {k}")));
            }
            self.k = k;
            self.estimation_metadata.k_source = ConstantSource::Override;
        }
        if let Some(m) = m {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::config("M_override", format!("must be positive, got {m}")));
            }
            self.m = m;
            self.estimation_metadata.m_source = ConstantSource::Override;
        }
        Ok(self)
    }

    /// Restores the grid operators after deserialization.
    pub fn rebuild(&mut self) -> Result<()> {
        let rates: Vec<f64> = self.eigenvalues.iter().map(|e| e + self.mu).collect();
        let stepper = DelayStepper::new(&rates, self.sigma, self.tau, self.n_tau())?;
        let projector = SpectralProjector::new(&stepper, &self.retained_roots())?;
        self.stepper = Some(stepper);
        self.projector = Some(projector);
        Ok(())
    }
}

/// Builds the model and estimates `K`, `M` from `samples` random unit histories.
pub fn build_model(
    laplacian: &LaplacianSpectrum,
    mu: f64,
    sigma: f64,
    tau: f64,
    cutoff_index: usize,
    samples: usize,
    opts: &ModelOptions,
) -> Result<SpectralModel> {
    if !(tau > 0.0) {
        return Err(Error::param("tau", format!("delay must be positive, got {tau}")));
    }
    if cutoff_index == 0 {
        return Err(Error::param("cutoff_index", "must be at least 1"));
    }
    if samples == 0 {
        return Err(Error::param("samples", "need at least one sample"));
    }
    let per_mode: Vec<_> = laplacian
        .eigenvalues()
        .par_iter()
        .enumerate()
        .map(|(k, lam)| characteristic_roots_for_mode(lam + mu, sigma, tau, opts.n_branches, k + 1))
        .collect::<Result<_>>()?;
    let branch_failures = per_mode.iter().map(|s| s.failures.len()).sum();
    let mut roots: Vec<CharacteristicRoot> = per_mode.into_iter().flat_map(|s| s.roots).collect();
    roots.sort_by(|p, q| q.re.total_cmp(&p.re).then(p.mode.cmp(&q.mode)).then(q.im.total_cmp(&p.im)));

    let (rho_list, multiplicities) = group_real_parts(&roots);
    if cutoff_index > rho_list.len() {
        return Err(Error::param("cutoff_index", format!("only {} distinct real parts were found", rho_list.len())));
    }
    let rhom = rho_list[cutoff_index - 1];
    if rhom >= 0.0 {
        return Err(Error::param("cutoff_index", format!("cutoff real part ϱ_m = {rhom} is not negative")));
    }
    let k_m = multiplicities[..cutoff_index].iter().sum();
    check_completeness(laplacian, mu, sigma, tau, &roots, &rho_list, cutoff_index)?;

    let mut model = SpectralModel {
        eigenvalues: laplacian.eigenvalues().to_vec(),
        mu,
        sigma,
        tau,
        roots,
        gap: rho_list[0] - rhom,
        rho_list,
        multiplicities,
        cutoff_index,
        k_m,
        k: 1.0,
        m: 1.0,
        estimation_metadata: EstimationMetadata {
            samples,
            seed: opts.seed,
            horizon: opts.horizon_taus as f64 * tau,
            n_tau: opts.n_tau,
            k_source: ConstantSource::Sampled,
            m_source: ConstantSource::Sampled,
            k_sampled: ArgMax { sample: 0, t: 0.0, value: 0.0 },
            m_sampled: ArgMax { sample: 0, t: 0.0, value: 0.0 },
            branch_failures,
            caveat: ESTIMATE_CAVEAT.to_string(),
        },
        stepper: None,
        projector: None,
    };
    model.rebuild()?;
    let (k_hat, m_hat) = estimate_constants(&model, samples, opts)?;
    model.k = k_hat.value.max(1.0);
    model.m = m_hat.value.max(1.0);
    model.estimation_metadata.k_sampled = k_hat;
    model.estimation_metadata.m_sampled = m_hat;
    Ok(model)
}

fn group_real_parts(roots: &[CharacteristicRoot]) -> (Vec<f64>, Vec<usize>) {
    let mut rho: Vec<f64> = Vec::new();
    let mut mult: Vec<usize> = Vec::new();
    for r in roots {
        match rho.last() {
            Some(&last) if (last - r.re).abs() <= DEDUP_TOL => *mult.last_mut().unwrap() += 1,
            _ => {
                rho.push(r.re);
                mult.push(1);
            }
        }
    }
    (rho, mult)
}

/// Every root above the cutoff must have been found: compare with the
/// argument-principle count on a rectangle per mode.
fn check_completeness(
    laplacian: &LaplacianSpectrum,
    mu: f64,
    sigma: f64,
    tau: f64,
    roots: &[CharacteristicRoot],
    rho_list: &[f64],
    cutoff_index: usize,
) -> Result<()> {
    let rhom = rho_list[cutoff_index - 1];
    let c = match rho_list.get(cutoff_index) {
        Some(next) => 0.5 * (rhom + next),
        None => rhom - 1.0,
    };
    for (k, lam) in laplacian.eigenvalues().iter().enumerate() {
        let dm = DelayMode { a: lam + mu, sigma, tau };
        let found = roots.iter().filter(|r| r.mode == k + 1 && r.re > c).count() as i64;
        let right = found_max_re(roots).max(0.0) + 1.0;
        let y = super::roots::root_height_bound(&dm, c);
        match winding_count(&dm, c, right, -y, y) {
            Some(n) if n == found => {}
            Some(n) => {
                return Err(Error::NonConvergence(format!(
                    "mode {}: {found} roots found above Re = {c} but the argument principle counts {n}",
                    k + 1
                )))
            }
            None => log::warn!("mode {}: completeness check skipped, a root lies on the contour", k + 1),
        }
    }
    Ok(())
}

fn found_max_re(roots: &[CharacteristicRoot]) -> f64 {
    roots.iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max)
}

/// A smooth random history of unit norm: per mode `A + Bθ/τ + C sin(jπθ/τ + φ)`
/// with mode weights decaying like `1/k`.
pub fn random_unit_history<R: Rng>(rng: &mut R, tau: f64, n_tau: usize, n_modes: usize) -> HistorySegment {
    let mut params = Vec::with_capacity(n_modes);
    for k in 0..n_modes {
        let w = 1.0 / (k + 1) as f64;
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        let c: f64 = StandardNormal.sample(rng);
        let j = rng.random_range(1..=4) as f64;
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        params.push((w * a, w * b, w * c, j, phase));
    }
    let seg = HistorySegment::from_fn(tau, n_tau, n_modes, |theta| {
        params
            .iter()
            .map(|(a, b, c, j, ph)| a + b * theta / tau + c * (j * std::f64::consts::PI * theta / tau + ph).sin())
            .collect()
    });
    let n = seg.norm();
    if n > 0.0 {
        seg.scaled(1.0 / n)
    } else {
        random_unit_history(rng, tau, n_tau, n_modes)
    }
}

/// Sample `s` of the estimation ensemble; nested across sample counts.
pub fn dichotomy_sample(model: &SpectralModel, seed: u64, s: usize) -> HistorySegment {
    let mut rng = rng_for(seed, PURPOSE_DICHOTOMY + s as u64);
    random_unit_history(&mut rng, model.tau, model.n_tau(), model.n_modes())
}

fn estimate_constants(model: &SpectralModel, samples: usize, opts: &ModelOptions) -> Result<(ArgMax, ArgMax)> {
    let stepper = model.stepper()?;
    let projector = model.projector()?;
    let (rho1, rhom) = (model.rho1(), model.rhom());
    let n_tau = model.n_tau();
    let h = stepper.h();
    let steps = opts.horizon_taus * n_tau;
    let results: Vec<(ArgMax, ArgMax)> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let phi = dichotomy_sample(model, opts.seed, s);
            let norm0 = phi.norm();
            let series: Vec<Vec<f64>> = (0..model.n_modes())
                .map(|k| {
                    let mut v = phi.mode_series(k);
                    stepper.extend_series(k, &mut v, steps);
                    v
                })
                .collect();
            let mut kbest = ArgMax { sample: s, t: 0.0, value: f64::NEG_INFINITY };
            let mut mbest = kbest;
            let mut seg = phi.clone();
            for n in 0..=steps {
                for (k, v) in series.iter().enumerate() {
                    seg.set_mode_series(k, &v[n..n + n_tau + 1]);
                }
                let t = n as f64 * h;
                let p = projector.project(&seg).expect("grid matches by construction");
                let q = seg.sub(&p);
                let kv = q.norm() * (-rhom * t).exp() / norm0;
                let mv = seg.norm().max(p.norm()) * (-rho1 * t).exp() / norm0;
                if kv > kbest.value {
                    kbest = ArgMax { sample: s, t, value: kv };
                }
                if mv > mbest.value {
                    mbest = ArgMax { sample: s, t, value: mv };
                }
            }
            (kbest, mbest)
        })
        .collect();
    let pick = |it: &mut dyn Iterator<Item = ArgMax>| {
        it.fold(ArgMax { sample: 0, t: 0.0, value: f64::NEG_INFINITY }, |a, b| if b.value > a.value { b } else { a })
    };
    let k = pick(&mut results.iter().map(|r| r.0));
    let m = pick(&mut results.iter().map(|r| r.1));
    Ok((k, m))
}

#[cfg(test)]
mod tests {
    use super::super::laplacian_spectrum;
    use super::*;

    fn opts() -> ModelOptions {
        ModelOptions { n_tau: 20, n_branches: 6, seed: 7, horizon_taus: 5 }
    }

    #[test]
    fn decoupled_heat_modes() {
        let laplacian = laplacian_spectrum(2).unwrap();
        let m = build_model(&laplacian, 1.0, 0.0, 0.5, 2, 4, &opts()).unwrap();
        assert_eq!(m.rho_list, vec![-2.0, -5.0]);
        assert_eq!(m.multiplicities, vec![1, 1]);
        assert_eq!(m.k_m, 2);
        let m1 = build_model(&laplacian, 1.0, 0.0, 0.5, 1, 4, &opts()).unwrap();
        assert_eq!(m1.k_m, 1);
    }

    #[test]
    fn rejects_nonnegative_cutoff() {
        let laplacian = laplacian_spectrum(1).unwrap();
        // a = 1 − 3 < 0 makes the principal root positive.
        assert!(build_model(&laplacian, -3.0, 0.0, 0.5, 1, 4, &opts()).is_err());
    }

    #[test]
    fn estimates_are_monotone_in_samples() {
        let laplacian = laplacian_spectrum(1).unwrap();
        let small = build_model(&laplacian, 1.0, 0.1, 0.5, 1, 50, &opts()).unwrap();
        let large = build_model(&laplacian, 1.0, 0.1, 0.5, 1, 200, &opts()).unwrap();
        assert!(small.k >= 1.0 && small.m >= 1.0);
        assert!(large.k >= small.k && large.m >= small.m);
        assert!(large.estimation_metadata.m_sampled.sample < 200);
    }

    #[test]
    fn json_export_has_expected_keys() {
        let laplacian = laplacian_spectrum(2).unwrap();
        let m = build_model(&laplacian, 1.0, 0.1, 0.5, 1, 4, &opts()).unwrap();
        let v = serde_json::to_value(&m).unwrap();
        for key in ["eigenvalues", "roots", "rho_list", "multiplicities", "k_m", "K", "M", "estimation_metadata"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let r = &v["roots"][0];
        for key in ["re", "im", "mode", "branch", "residual"] {
            assert!(r.get(key).is_some(), "root missing {key}");
        }
        let mut back: SpectralModel = serde_json::from_value(v).unwrap();
        back.rebuild().unwrap();
        assert_eq!(back.k_m, m.k_m);
    }

    #[test]
    fn overrides_are_recorded() {
        let laplacian = laplacian_spectrum(1).unwrap();
        let m = build_model(&laplacian, 1.0, 0.1, 0.5, 1, 4, &opts()).unwrap().with_overrides(Some(3.0), None).unwrap();
        assert_eq!(m.k, 3.0);
        assert_eq!(m.estimation_metadata.k_source, ConstantSource::Override);
        assert_eq!(m.estimation_metadata.m_source, ConstantSource::Sampled);
    }
}

//! Pipeline stages. Each stage computes its prerequisites on demand and caches
//! them, so a single subcommand and the full pipeline produce the same reports.

use std::path::PathBuf;

use rdsdim::attractor::{
    estimate_absorbing_radius, pullback_sample, verify_squeezing, PointCloud, SqueezeReport, SqueezeSettings,
};
use rdsdim::bound::{
    best_t0, compose_inputs, ergodic_averages, hausdorff_bound, BoundInputs, BoundReport, ErgodicAverages,
};
use rdsdim::geometry::{
    box_dimension, correlation_dimension, grid_cover, CoverResult, DimensionEstimate, NormKind, PROXY_NOTE,
};
use rdsdim::noise::NoiseRealization;
use rdsdim::solver::{steps_for, Recording, Stepper};
use rdsdim::spectral::{build_model, laplacian_spectrum, ModelOptions, SpectralModel};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{relative_name, OutDir};

type Result<T> = std::result::Result<T, CliError>;

/// Absorbing-radius estimate runs over at most this long after burn-in.
const RADIUS_WINDOW: f64 = 40.0;

pub struct Run {
    pub cfg: RunConfig,
    pub out: OutDir,
    model: Option<SpectralModel>,
    radius: Option<f64>,
    averages: Option<ErgodicAverages>,
    bound: Option<BoundReport>,
    cloud: Option<PointCloud>,
}

#[derive(Serialize)]
struct SimulateReport {
    trajectory_csv: String,
    steps: usize,
    h: f64,
    t_end: f64,
    final_norm: f64,
    max_norm: f64,
    mean_energy_after_burn_in: f64,
    note: &'static str,
}

#[derive(Serialize)]
struct SeedAverages {
    seed: u64,
    averages: ErgodicAverages,
}

#[derive(Serialize)]
struct ErgodicReport {
    c: f64,
    c_source: &'static str,
    runs: Vec<SeedAverages>,
}

#[derive(Serialize)]
struct PullbackReport {
    cloud_file: String,
    dims: usize,
    points: usize,
    horizon: f64,
    diameter: f64,
    metadata: Option<rdsdim::attractor::CloudMetadata>,
}

#[derive(Serialize)]
struct DimensionReport {
    points: usize,
    dims: usize,
    box_counting: DimensionEstimate,
    correlation: DimensionEstimate,
    note: &'static str,
}

#[derive(Serialize)]
struct CoverReport {
    results: Vec<CoverResult>,
    all_hold: bool,
}

#[derive(Serialize)]
struct Summary {
    rho1: f64,
    rhom: f64,
    #[serde(rename = "K")]
    k: f64,
    #[serde(rename = "M")]
    m: f64,
    t0: f64,
    feasible: bool,
    d_bound: Option<f64>,
    box_dimension: f64,
    correlation_dimension: f64,
    box_within_bound: Option<bool>,
    squeeze_rate_p: f64,
    squeeze_rate_q: f64,
    squeeze_rate_both: f64,
}

impl Run {
    pub fn new(cfg: RunConfig, out: OutDir) -> Self {
        Self { cfg, out, model: None, radius: None, averages: None, bound: None, cloud: None }
    }

    fn seed(&self) -> u64 {
        self.cfg.seed()
    }

    pub fn spectrum(&mut self) -> Result<SpectralModel> {
        if let Some(m) = &self.model {
            return Ok(m.clone());
        }
        let model_cfg = &self.cfg.model;
        let n = &self.cfg.numerics;
        let b = &self.cfg.bound_params;
        log::info!("spectrum: {} modes, cutoff {}, {} samples", model_cfg.n_modes, b.cutoff_index, n.samples);
        let opts = ModelOptions {
            n_tau: model_cfg.n_tau(),
            n_branches: n.n_branches,
            seed: self.seed(),
            ..Default::default()
        };
        let laplacian = laplacian_spectrum(model_cfg.n_modes)?;
        let model =
            build_model(&laplacian, model_cfg.mu, model_cfg.sigma, model_cfg.tau, b.cutoff_index, n.samples, &opts)?
                .with_overrides(b.k_override, b.m_override)?;
        self.out.write_report("spectrum.json", &model)?;
        self.model = Some(model.clone());
        Ok(model)
    }

    fn radius(&mut self) -> Result<f64> {
        if let Some(c) = self.radius {
            return Ok(c);
        }
        let c = match self.cfg.bound_params.c {
            Some(c) => c,
            None => {
                let n = &self.cfg.numerics;
                let h = self.cfg.model.h;
                let window = steps_for(RADIUS_WINDOW.min(n.t), h).or_else(|_| steps_for(n.t, h))? as f64 * h;
                let c = estimate_absorbing_radius(&self.cfg.model, self.seed(), n.burn_in, window)?;
                log::info!("absorbing radius estimate c = {c:.4}");
                c
            }
        };
        self.radius = Some(c);
        Ok(c)
    }

    /// Integrates from a zero history and writes the head `u = v + z` every step.
    pub fn simulate(&mut self) -> Result<()> {
        let cfg = &self.cfg.model;
        let n = &self.cfg.numerics;
        let steps = steps_for(n.t, cfg.h)?;
        let n_tau = cfg.n_tau();
        log::info!("simulate: {steps} steps of h = {}", cfg.h);
        let noise = NoiseRealization::generate(
            self.seed(),
            &cfg.g_coeffs,
            cfg.mu,
            cfg.n_modes,
            cfg.h,
            -(n_tau as i64),
            steps + n_tau,
        )?;
        let traj = Stepper::new(cfg)?.integrate(
            &noise.field,
            &cfg.zero_segment(),
            0,
            steps,
            Recording { segment_stride: Some(n_tau) },
        )?;

        // Segments recorded every n_tau steps tile the run without overlap.
        let mut heads: Vec<Vec<f64>> = vec![Vec::new(); steps + 1];
        for (at, seg) in traj.segments.iter().chain(std::iter::once(&(steps, traj.terminal.clone()))) {
            for i in 0..=n_tau {
                if let Some(step) = (at + i).checked_sub(n_tau) {
                    if step <= steps {
                        heads[step] = seg.point(i).to_vec();
                    }
                }
            }
        }
        let rows: Vec<Vec<f64>> = heads
            .iter()
            .enumerate()
            .map(|(step, v)| {
                let z = noise.field.z_at(step as i64);
                let mut row = vec![traj.times[step], traj.energy[step].sqrt()];
                row.extend(v.iter().zip(z).map(|(a, b)| a + b));
                row
            })
            .collect();
        let mut header = vec!["t".to_string(), "v_norm".to_string()];
        header.extend((1..=cfg.n_modes).map(|k| format!("u_{k}")));
        let csv = self.out.write_csv("trajectory.csv", &header, &rows)?;

        let skip = steps_for(n.burn_in, cfg.h).unwrap_or(0).min(steps);
        let tail = &traj.energy[skip..];
        let report = SimulateReport {
            trajectory_csv: relative_name(&csv),
            steps,
            h: cfg.h,
            t_end: traj.times[steps],
            final_norm: traj.energy[steps].sqrt(),
            max_norm: traj.energy.iter().fold(0.0f64, |m, e| m.max(e.sqrt())),
            mean_energy_after_burn_in: tail.iter().sum::<f64>() / tail.len() as f64,
            note: "v_norm is the H norm of the transformed variable v = u − z; u_k are sine coefficients of u",
        };
        self.out.write_report("simulate.json", &report)?;
        Ok(())
    }

    pub fn ergodic(&mut self) -> Result<ErgodicAverages> {
        if let Some(a) = &self.averages {
            return Ok(a.clone());
        }
        let c = self.radius()?;
        let cfg = &self.cfg.model;
        let n = &self.cfg.numerics;
        let steps = steps_for(n.t, cfg.h)?;
        let mut runs = Vec::with_capacity(n.seeds.len());
        for &seed in &n.seeds {
            log::info!("ergodic: seed {seed}, {steps} steps");
            let noise = NoiseRealization::generate(seed, &cfg.g_coeffs, cfg.mu, cfg.n_modes, cfg.h, 0, steps)?;
            runs.push(SeedAverages { seed, averages: ergodic_averages(&noise.ou, &cfg.f_coeffs, c, n.burn_in)? });
        }
        let primary = runs[0].averages.clone();
        let c_source = if self.cfg.bound_params.c.is_some() { "config" } else { "estimated" };
        self.out.write_report("ergodic.json", &ErgodicReport { c, c_source, runs })?;
        self.averages = Some(primary.clone());
        Ok(primary)
    }

    pub fn bound(&mut self) -> Result<BoundReport> {
        if let Some(b) = &self.bound {
            return Ok(b.clone());
        }
        let model = self.spectrum()?;
        let averages = self.ergodic()?;
        let c = self.radius()?;
        let cfg = &self.cfg.model;
        let b = &self.cfg.bound_params;
        let t0 = b.t0.unwrap_or(b.t0_grid[0]);
        let inputs = compose_inputs(&model, &averages, b.alpha, t0, cfg.f_kind.lipschitz(), c, &cfg.f_coeffs);
        let report = match b.t0 {
            Some(_) => hausdorff_bound(&inputs)?,
            None => best_t0(&inputs, &b.t0_grid)?,
        };
        log::info!("bound: feasible {}, d_bound {:?} at t0 = {}", report.feasible, report.d_bound, report.inputs.t0);
        self.out.write_report("bound.json", &report)?;
        self.bound = Some(report.clone());
        Ok(report)
    }

    pub fn pullback(&mut self) -> Result<PointCloud> {
        if let Some(c) = &self.cloud {
            return Ok(c.clone());
        }
        let c = self.radius()?;
        let n = &self.cfg.numerics;
        log::info!("pullback: {} histories, horizons {:?}", n.n_initial, n.horizons);
        let cloud = pullback_sample(&self.cfg.model, self.seed(), &n.horizons, n.n_initial, c)?;
        self.store_cloud(&cloud)?;
        let report = PullbackReport {
            cloud_file: "cloud.bin".into(),
            dims: cloud.dims,
            points: cloud.len(),
            horizon: cloud.horizon,
            diameter: cloud.diameter(),
            metadata: cloud.metadata.clone(),
        };
        self.out.write_report("pullback.json", &report)?;
        self.cloud = Some(cloud.clone());
        Ok(cloud)
    }

    fn store_cloud(&self, cloud: &PointCloud) -> Result<()> {
        let mut side: serde_json::Value = serde_json::from_str(&cloud.sidecar_json()?)
            .map_err(|e| CliError::io("encoding cloud sidecar".into(), e))?;
        side["provenance"] =
            serde_json::to_value(&self.out.provenance).map_err(|e| CliError::io("encoding provenance".into(), e))?;
        let text =
            serde_json::to_string_pretty(&side).map_err(|e| CliError::io("encoding cloud sidecar".into(), e))? + "\n";
        // Payload first: a reader that finds the sidecar also finds a complete payload.
        self.out.write_bytes("cloud.bin", &cloud.binary_bytes())?;
        self.out.write_bytes("cloud.bin.json", text.as_bytes())?;
        Ok(())
    }

    pub fn boxdim(&mut self, cloud_path: Option<PathBuf>) -> Result<(DimensionEstimate, DimensionEstimate)> {
        let cloud = match cloud_path {
            Some(p) => PointCloud::read(&p)?,
            None => self.pullback()?,
        };
        log::info!("boxdim: {} points in {} dimensions", cloud.len(), cloud.dims);
        let boxed = box_dimension(&cloud, self.cfg.numerics.n_scales)?;
        let corr = correlation_dimension(&cloud)?;
        let report = DimensionReport {
            points: cloud.len(),
            dims: cloud.dims,
            box_counting: boxed.clone(),
            correlation: corr.clone(),
            note: PROXY_NOTE,
        };
        self.out.write_report("boxdim.json", &report)?;
        Ok((boxed, corr))
    }

    pub fn verify_squeeze(&mut self) -> Result<SqueezeReport> {
        let model = self.spectrum()?;
        let cloud = self.pullback()?;
        let c = self.radius()?;
        let cfg = &self.cfg.model;
        let settings = SqueezeSettings {
            t0: self.cfg.bound_params.t0.unwrap_or(2.0 * cfg.tau),
            n_pairs: self.cfg.numerics.n_pairs,
            seed: self.seed(),
            c,
        };
        log::info!("verify-squeeze: {} pairs at t0 = {}", settings.n_pairs, settings.t0);
        let report = verify_squeezing(&cloud, cfg, &model, &settings)?;
        log::info!(
            "verify-squeeze: P {:.1}%, Q {:.1}%, both {:.1}%",
            100.0 * report.rate_p,
            100.0 * report.rate_q,
            100.0 * report.rate_both
        );
        self.out.write_report("squeeze.json", &report)?;
        Ok(report)
    }

    /// Every stage in dependency order, then a summary.
    pub fn pipeline(&mut self) -> Result<()> {
        let model = self.spectrum()?;
        self.simulate()?;
        self.ergodic()?;
        let bound = self.bound()?;
        self.pullback()?;
        let (boxed, corr) = self.boxdim(None)?;
        let m = model.k_m.clamp(1, 4);
        let cases: Vec<_> = [1.0, 2.0, 5.0].iter().map(|&r| (m, 1.0, r)).collect();
        cover_audit(&self.out, &cases, NormKind::Sup)?;
        let squeeze = self.verify_squeeze()?;
        let summary = Summary {
            rho1: model.rho1(),
            rhom: model.rhom(),
            k: model.k,
            m: model.m,
            t0: bound.inputs.t0,
            feasible: bound.feasible,
            d_bound: bound.d_bound,
            box_dimension: boxed.slope,
            correlation_dimension: corr.slope,
            box_within_bound: bound.d_bound.map(|d| boxed.slope <= d + 0.3),
            squeeze_rate_p: squeeze.rate_p,
            squeeze_rate_q: squeeze.rate_q,
            squeeze_rate_both: squeeze.rate_both,
        };
        self.out.write_report("summary.json", &summary)?;
        Ok(())
    }
}

/// `bound --inputs`: evaluates a hand-written set of inputs.
pub fn bound_from_inputs(out: &OutDir, inputs: &BoundInputs) -> Result<BoundReport> {
    let report = hausdorff_bound(inputs)?;
    out.write_report("bound.json", &report)?;
    Ok(report)
}

/// Audits the covering lemma on explicit `(m, r1, r2)` triples.
pub fn cover_audit(out: &OutDir, cases: &[(usize, f64, f64)], norm: NormKind) -> Result<bool> {
    let results = cases.iter().map(|&(m, r1, r2)| grid_cover(m, r1, r2, norm)).collect::<rdsdim::Result<Vec<_>>>()?;
    let all_hold = results.iter().all(|r| r.lemma_holds);
    if !all_hold {
        log::warn!("cover: constructed count exceeds the lemma bound for some cases");
    }
    out.write_report("cover.json", &CoverReport { results, all_hold })?;
    Ok(all_hold)
}

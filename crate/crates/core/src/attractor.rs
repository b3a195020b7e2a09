//! Pullback sampling of the random attractor and an empirical audit of the
//! squeezing estimates on sampled trajectory pairs.
//!
//! Clouds only approximate `A(ω)`: membership cannot be certified, so the
//! squeeze audit reports satisfaction rates, not proofs.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound::r_integrals;
use crate::noise::{rng_for, NoiseRealization};
use crate::solver::{steps_for, ModelConfig, Recording, Stepper};
use crate::spectral::{random_unit_history, SpectralModel, ESTIMATE_CAVEAT};
use crate::{Error, HistorySegment, Result};

const PURPOSE_INITIAL: u64 = 3 << 20;
const PURPOSE_PAIRS: u64 = 5 << 20;

pub const MEMBERSHIP_CAVEAT: &str = "cloud points are pullback approximations of the attractor; the inequalities \
     are stated for exact attractor members, so this audit is not a proof";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudMetadata {
    pub tau: f64,
    pub n_tau: usize,
    pub n_modes: usize,
    pub h: f64,
    pub horizons: Vec<f64>,
    /// Cloud diameter after each horizon.
    pub diameters: Vec<f64>,
    /// Hausdorff distance between the clouds of consecutive horizons.
    pub hausdorff_between_horizons: Vec<f64>,
    /// Radius of the initial ball used for each horizon.
    pub initial_radius: Vec<f64>,
    pub c: f64,
}

/// Points are segments embedded as `(n_tau+1)·N` vectors (oldest grid point first).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub dims: usize,
    pub data: Vec<f64>,
    pub horizon: f64,
    pub seed: u64,
    pub metadata: Option<CloudMetadata>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    dims: usize,
    count: usize,
    horizon: f64,
    seed: u64,
    metadata: Option<CloudMetadata>,
}

impl PointCloud {
    pub fn from_flat(dims: usize, data: Vec<f64>) -> Result<Self> {
        if dims == 0 || !data.len().is_multiple_of(dims) {
            return Err(Error::param("dims", format!("{} values do not split into points of size {dims}", data.len())));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("data", "non-finite coordinate"));
        }
        Ok(Self { dims, data, horizon: 0.0, seed: 0, metadata: None })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dims)
    }

    /// Decodes point `i` back into a history segment.
    pub fn segment(&self, i: usize) -> Result<HistorySegment> {
        let md = self.metadata.as_ref().ok_or_else(|| Error::param("cloud", "no segment grid metadata"))?;
        HistorySegment::from_embedding(md.tau, md.n_tau, md.n_modes, self.point(i))
    }

    /// Points per grid sample: the phase-space norm is a sup over blocks of
    /// this size. Without metadata the whole vector is one block.
    fn block(&self) -> usize {
        self.metadata.as_ref().map_or(self.dims, |m| m.n_modes)
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        block_distance(a, b, self.block())
    }

    pub fn diameter(&self) -> f64 {
        let n = self.len();
        (0..n)
            .into_par_iter()
            .map(|i| (i + 1..n).map(|j| self.distance(self.point(i), self.point(j))).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max)
    }

    /// Writes the binary payload and a JSON sidecar at `<path>.json`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&(self.dims as u64).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for x in &self.data {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        std::fs::write(sidecar_path(path), self.sidecar_json()?)?;
        Ok(())
    }

    pub fn sidecar_json(&self) -> Result<String> {
        let sc = Sidecar {
            dims: self.dims,
            count: self.len(),
            horizon: self.horizon,
            seed: self.seed,
            metadata: self.metadata.clone(),
        };
        Ok(serde_json::to_string_pretty(&sc)?)
    }

    pub fn binary_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.data.len());
        out.extend((self.dims as u64).to_le_bytes());
        out.extend((self.len() as u64).to_le_bytes());
        for x in &self.data {
            out.extend(x.to_le_bytes());
        }
        out
    }

    /// Reads a cloud written by [`PointCloud::write`]; the sidecar is optional.
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let dims = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let count = u64::from_le_bytes(word) as usize;
        let mut data = Vec::with_capacity(dims * count);
        for _ in 0..dims * count {
            r.read_exact(&mut word)?;
            data.push(f64::from_le_bytes(word));
        }
        let mut cloud = Self::from_flat(dims, data)?;
        let side = sidecar_path(path);
        if side.exists() {
            let sc: Sidecar = serde_json::from_str(&std::fs::read_to_string(side)?)?;
            if sc.dims != dims || sc.count != count {
                return Err(Error::param("sidecar", "header does not match the binary payload"));
            }
            cloud.horizon = sc.horizon;
            cloud.seed = sc.seed;
            cloud.metadata = sc.metadata;
        }
        Ok(cloud)
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Sup over grid samples of the Euclidean distance of each `block`.
fn block_distance(a: &[f64], b: &[f64], block: usize) -> f64 {
    a.chunks(block)
        .zip(b.chunks(block))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>], block: usize) -> f64 {
    let one_way = |x: &[Vec<f64>], y: &[Vec<f64>]| {
        x.par_iter()
            .map(|p| y.iter().map(|q| block_distance(p, q, block)).fold(f64::INFINITY, f64::min))
            .reduce(|| 0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

fn diameter_of(points: &[Vec<f64>], block: usize) -> f64 {
    (0..points.len())
        .into_par_iter()
        .map(|i| (i + 1..points.len()).map(|j| block_distance(&points[i], &points[j], block)).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

/// The noise realization shared by a cloud and its squeeze audit: global
/// steps from `−(n_T + n_τ)` to `forward_steps`, with `n_T` the steps of the
/// largest horizon.
pub fn cloud_noise(cfg: &ModelConfig, seed: u64, max_horizon: f64, forward_steps: usize) -> Result<NoiseRealization> {
    let back = steps_for(max_horizon, cfg.h)? + cfg.n_tau();
    NoiseRealization::generate(seed, &cfg.g_coeffs, cfg.mu, cfg.n_modes, cfg.h, -(back as i64), back + forward_steps)
}

/// Absorbing-radius estimate: `1.5 · sup ‖v(t)‖` over `[burn_in, burn_in + duration]`
/// started from zero, floored at 1.
pub fn estimate_absorbing_radius(cfg: &ModelConfig, seed: u64, burn_in: f64, duration: f64) -> Result<f64> {
    let steps = steps_for(burn_in + duration, cfg.h)?;
    let skip = steps_for(burn_in, cfg.h)?;
    let n_tau = cfg.n_tau();
    let noise =
        NoiseRealization::generate(seed, &cfg.g_coeffs, cfg.mu, cfg.n_modes, cfg.h, -(n_tau as i64), steps + n_tau)?;
    let traj = Stepper::new(cfg)?.integrate(&noise.field, &cfg.zero_segment(), 0, steps, Recording::default())?;
    let sup = traj.energy[skip..].iter().fold(0.0f64, |m, e| m.max(e.sqrt()));
    Ok((1.5 * sup).max(1.0))
}

/// Evolves `n_initial` histories from the ball of radius `c + (c+1)·r(θ_{−T}ω)`
/// over `[−T, 0]` for each horizon `T`, on one noise realization. The cloud of
/// the largest horizon is returned.
pub fn pullback_sample(cfg: &ModelConfig, seed: u64, horizons: &[f64], n_initial: usize, c: f64) -> Result<PointCloud> {
    cfg.validate()?;
    if n_initial < 2 {
        return Err(Error::param("n_initial", "need at least two initial histories"));
    }
    if horizons.is_empty() || horizons.windows(2).any(|w| w[1] <= w[0]) || horizons[0] < 0.0 {
        return Err(Error::param("horizons", "must be nonempty, nonnegative and strictly increasing"));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::param("c", format!("must be finite and nonnegative, got {c}")));
    }
    let max_h = *horizons.last().expect("nonempty");
    let noise = cloud_noise(cfg, seed, max_h, 0)?;
    let stepper = Stepper::new(cfg)?;
    let n_tau = cfg.n_tau();
    let n = cfg.n_modes;

    // Shapes and radial fractions are shared across horizons.
    let shapes: Vec<(HistorySegment, f64)> = (0..n_initial)
        .map(|i| {
            let mut rng = rng_for(seed, PURPOSE_INITIAL + i as u64);
            let shape = random_unit_history(&mut rng, cfg.tau, n_tau, n);
            let frac: f64 = rng.random();
            (shape, frac)
        })
        .collect();

    let mut clouds: Vec<Vec<Vec<f64>>> = Vec::with_capacity(horizons.len());
    let mut radii = Vec::with_capacity(horizons.len());
    for &t in horizons {
        let steps = steps_for(t, cfg.h)?;
        let start = -(steps as i64);
        let radius = c + (c + 1.0) * noise.r_at(start);
        radii.push(radius);
        let points = shapes
            .par_iter()
            .map(|(shape, frac)| {
                let phi = shape.scaled(radius * frac);
                stepper.evolve(&noise.field, &phi, start, steps).map(|s| s.to_embedding())
            })
            .collect::<Result<Vec<_>>>()?;
        clouds.push(points);
    }

    let diameters: Vec<f64> = clouds.iter().map(|p| diameter_of(p, n)).collect();
    let hausdorff_between_horizons: Vec<f64> = clouds.windows(2).map(|w| hausdorff(&w[0], &w[1], n)).collect();
    let dims = (n_tau + 1) * n;
    let data: Vec<f64> = clouds.pop().expect("nonempty").into_iter().flatten().collect();
    let mut cloud = PointCloud::from_flat(dims, data)?;
    cloud.horizon = max_h;
    cloud.seed = seed;
    cloud.metadata = Some(CloudMetadata {
        tau: cfg.tau,
        n_tau,
        n_modes: n,
        h: cfg.h,
        horizons: horizons.to_vec(),
        diameters,
        hausdorff_between_horizons,
        initial_radius: radii,
        c,
    });
    Ok(cloud)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub i: usize,
    pub j: usize,
    /// `‖φ − ψ‖`.
    pub initial_distance: f64,
    /// `‖PΔ(t₀)‖` and `‖(I−P)Δ(t₀)‖`.
    pub p_norm: f64,
    pub q_norm: f64,
    pub rhs_p: f64,
    pub rhs_q: f64,
    pub pass_p: bool,
    pub pass_q: bool,
    /// Smallest `M` (resp. `K`) that would make the inequality hold for this pair.
    pub m_needed: f64,
    pub k_needed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezeReport {
    pub t0: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "L_f")]
    pub l_f: f64,
    pub rho1: f64,
    pub rhom: f64,
    pub c: f64,
    pub f_coeffs: Vec<f64>,
    /// `∫₀^{t₀} R(θ_s ω) ds` and `∫₀^{t₀} R²(θ_s ω) ds`.
    pub int_r: f64,
    pub int_r2: f64,
    pub pairs: Vec<PairRecord>,
    pub rate_p: f64,
    pub rate_q: f64,
    pub rate_both: f64,
    pub caveats: Vec<String>,
}

/// Right-hand side of the P-estimate per unit initial distance.
pub fn squeeze_rhs_p(m: f64, l_f: f64, rho1: f64, int_r: f64, t: f64) -> f64 {
    m * ((m * l_f + rho1) * t + m * int_r).exp()
}

/// Right-hand side of the Q-estimate per unit initial distance.
#[allow(clippy::too_many_arguments)]
pub fn squeeze_rhs_q(k: f64, m: f64, l_f: f64, rho1: f64, rhom: f64, int_r: f64, int_r2: f64, t: f64) -> f64 {
    let gap = rho1 - rhom;
    let base = (m * l_f + rho1) * t + m * int_r;
    k * (rhom * t).exp() + k * m / (2.0 * gap).sqrt() * (base + int_r2).exp() + k * m * l_f * base.exp() / gap
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqueezeSettings {
    pub t0: f64,
    pub n_pairs: usize,
    pub seed: u64,
    pub c: f64,
}

/// Evolves sampled pairs of cloud points by `Φ(t₀, ω, ·)` on the cloud's noise
/// and checks both squeezing inequalities with the model's constants.
pub fn verify_squeezing(
    cloud: &PointCloud,
    cfg: &ModelConfig,
    model: &SpectralModel,
    s: &SqueezeSettings,
) -> Result<SqueezeReport> {
    let md = cloud.metadata.as_ref().ok_or_else(|| Error::param("cloud", "no segment grid metadata"))?;
    if md.n_modes != cfg.n_modes || md.n_tau != cfg.n_tau() || md.n_tau != model.n_tau() {
        return Err(Error::param("cloud", "cloud grid does not match the model configuration"));
    }
    if cloud.len() < 2 {
        return Err(Error::param("cloud", "need at least two points"));
    }
    let steps = steps_for(s.t0, cfg.h)?;
    let noise = cloud_noise(cfg, cloud.seed, cloud.horizon, steps)?;
    let r_path: Vec<f64> = (0..=steps as i64).map(|k| noise.r_at(k)).collect();
    let (int_r, int_r2) = r_integrals(&r_path, cfg.h, &cfg.f_coeffs, s.c);
    let l_f = cfg.f_kind.lipschitz();
    let (k, m, rho1, rhom) = (model.k, model.m, model.rho1(), model.rhom());
    if !(rho1 > rhom) {
        return Err(Error::param(
            "cutoff_index",
            "the Q-estimate needs ϱ₁ > ϱ_m, so the cutoff must retain at least two real parts",
        ));
    }
    let unit_p = squeeze_rhs_p(m, l_f, rho1, int_r, s.t0);
    let unit_q = squeeze_rhs_q(k, m, l_f, rho1, rhom, int_r, int_r2, s.t0);

    let pairs = sample_pairs(cloud.len(), s.n_pairs, s.seed);
    let stepper = Stepper::new(cfg)?;
    let records = pairs
        .par_iter()
        .map(|&(i, j)| {
            let phi = cloud.segment(i)?;
            let psi = cloud.segment(j)?;
            let d0 = phi.distance(&psi);
            let a = stepper.evolve(&noise.field, &phi, 0, steps)?;
            let b = stepper.evolve(&noise.field, &psi, 0, steps)?;
            let diff = a.sub(&b);
            let p_part = model.project_p(&diff)?;
            let p_norm = p_part.norm();
            let q_norm = diff.sub(&p_part).norm();
            let (rhs_p, rhs_q) = (unit_p * d0, unit_q * d0);
            let ok = |lhs: f64, rhs: f64| lhs <= rhs * (1.0 + 1e-9) + 1e-300;
            let ratio = |lhs: f64, rhs: f64, c: f64| if rhs > 0.0 { c * lhs / rhs } else { 0.0 };
            Ok(PairRecord {
                i,
                j,
                initial_distance: d0,
                p_norm,
                q_norm,
                rhs_p,
                rhs_q,
                pass_p: ok(p_norm, rhs_p),
                pass_q: ok(q_norm, rhs_q),
                m_needed: ratio(p_norm, rhs_p, m),
                k_needed: ratio(q_norm, rhs_q, k),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total = records.len().max(1) as f64;
    let rate = |f: &dyn Fn(&PairRecord) -> bool| records.iter().filter(|r| f(r)).count() as f64 / total;
    Ok(SqueezeReport {
        t0: s.t0,
        k,
        m,
        l_f,
        rho1,
        rhom,
        c: s.c,
        f_coeffs: cfg.f_coeffs.clone(),
        int_r,
        int_r2,
        rate_p: rate(&|r| r.pass_p),
        rate_q: rate(&|r| r.pass_q),
        rate_both: rate(&|r| r.pass_p && r.pass_q),
        pairs: records,
        caveats: vec![MEMBERSHIP_CAVEAT.into(), ESTIMATE_CAVEAT.into()],
    })
}

/// Distinct unordered pairs, all of them when fewer than `n_pairs` exist.
fn sample_pairs(n: usize, n_pairs: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = n * (n - 1) / 2;
    if total <= n_pairs {
        return (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    }
    let mut rng = rng_for(seed, PURPOSE_PAIRS);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n_pairs);
    while out.len() < n_pairs {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let key = (i.min(j), i.max(j));
        if seen.insert(key) {
            out.push(key);
        }
    }
    out
}

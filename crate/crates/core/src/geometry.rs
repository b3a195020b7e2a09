//! Covering numbers of finite-dimensional balls and fractal-dimension
//! estimators for point clouds.
//!
//! Box-counting dimension dominates Hausdorff dimension, so a box estimate
//! below a Hausdorff upper bound is the meaningful consistency direction.

use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attractor::PointCloud;
use crate::{Error, Result};

pub const PROXY_NOTE: &str =
    "box-counting and correlation dimensions are computable proxies; box-counting dimension dominates Hausdorff dimension";

/// `m 2^m (1 + r₂/r₁)^m`.
pub fn covering_bound(m: usize, r1: f64, r2: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::param("m", "dimension must be at least 1"));
    }
    if !(r1 > 0.0) || !(r2 > 0.0) {
        return Err(Error::param("r", format!("radii must be positive, got r1 = {r1}, r2 = {r2}")));
    }
    let m_f = m as f64;
    Ok(m_f * 2f64.powi(m as i32) * (1.0 + r2 / r1).powf(m_f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Sup,
    Euclidean,
}

impl NormKind {
    fn dist(self, a: &[f64], b: &[f64]) -> f64 {
        let it = a.iter().zip(b).map(|(x, y)| (x - y).abs());
        match self {
            NormKind::Sup => it.fold(0.0, f64::max),
            NormKind::Euclidean => it.map(|d| d * d).sum::<f64>().sqrt(),
        }
    }

    fn norm(self, a: &[f64]) -> f64 {
        self.dist(a, &vec![0.0; a.len()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverResult {
    pub m: usize,
    pub r1: f64,
    pub r2: f64,
    pub lemma_bound: f64,
    pub constructed_count: usize,
    pub norm_kind: NormKind,
    pub lemma_holds: bool,
    pub probe_points: usize,
}

const MAX_COVER_DIM: usize = 6;

/// Explicit cover of `B_{r₂}` by balls of radius `r₁` in `R^m`, audited on a
/// probe grid.
pub fn grid_cover(m: usize, r1: f64, r2: f64, norm_kind: NormKind) -> Result<CoverResult> {
    let lemma_bound = covering_bound(m, r1, r2)?;
    if m > MAX_COVER_DIM {
        return Err(Error::param("m", format!("dimension {m} exceeds the limit {MAX_COVER_DIM}")));
    }
    // Cell pitch and per-axis cell count of the cube lattice.
    let (pitch, per_axis) = match norm_kind {
        NormKind::Sup => (2.0 * r1, ceil_ratio(r2, r1)),
        NormKind::Euclidean => {
            let p = 2.0 * r1 / (m as f64).sqrt();
            (p, ceil_ratio(2.0 * r2, p))
        }
    };
    let total = per_axis
        .checked_pow(m as u32)
        .filter(|t| *t <= 50_000_000)
        .ok_or_else(|| Error::param("r2", format!("cover would need {per_axis}^{m} lattice cells")))?;
    let origin = -(per_axis as f64) * pitch / 2.0;
    let mut centers: HashMap<Vec<i64>, Vec<f64>> = HashMap::new();
    let mut idx = vec![0usize; m];
    for _ in 0..total {
        let center: Vec<f64> = idx.iter().map(|&i| origin + pitch * (i as f64 + 0.5)).collect();
        let keep = match norm_kind {
            NormKind::Sup => true,
            // Keep the cell if it meets the ball: distance from the origin to the cell.
            NormKind::Euclidean => {
                let d2: f64 = center.iter().map(|c| (c.abs() - pitch / 2.0).max(0.0).powi(2)).sum();
                d2 <= r2 * r2 * (1.0 + 1e-12)
            }
        };
        if keep {
            centers.insert(idx.iter().map(|&i| i as i64).collect(), center);
        }
        increment(&mut idx, per_axis);
    }

    // Probe grid over the bounding cube of B_{r₂}, restricted to the ball.
    let probes_per_axis = match m {
        1 => 4 * per_axis + 1,
        2 => 2 * per_axis + 3,
        _ => ((200_000f64).powf(1.0 / m as f64) as usize).max(3),
    };
    let mut probe_points = 0;
    let mut pidx = vec![0usize; m];
    let step = 2.0 * r2 / (probes_per_axis - 1) as f64;
    for _ in 0..probes_per_axis.pow(m as u32) {
        let p: Vec<f64> = pidx.iter().map(|&i| -r2 + step * i as f64).collect();
        increment(&mut pidx, probes_per_axis);
        if norm_kind.norm(&p) > r2 * (1.0 + 1e-12) {
            continue;
        }
        probe_points += 1;
        let cell: Vec<i64> = p.iter().map(|x| ((x - origin) / pitch).floor() as i64).collect();
        let covered =
            neighbours(&cell).any(|key| centers.get(&key).is_some_and(|c| norm_kind.dist(c, &p) <= r1 * (1.0 + 1e-9)));
        if !covered {
            return Err(Error::CoverageAudit(format!("probe point {p:?} is farther than {r1} from every center")));
        }
    }
    let constructed_count = centers.len();
    let lemma_holds = constructed_count as f64 <= lemma_bound;
    if norm_kind == NormKind::Sup && !lemma_holds {
        return Err(Error::CoverageAudit(format!(
            "sup-norm cover uses {constructed_count} balls, above the lemma bound {lemma_bound}"
        )));
    }
    Ok(CoverResult { m, r1, r2, lemma_bound, constructed_count, norm_kind, lemma_holds, probe_points })
}

fn ceil_ratio(a: f64, b: f64) -> usize {
    let q = a / b;
    let r = q.round();
    if (q - r).abs() <= 1e-12 * q.max(1.0) {
        (r as usize).max(1)
    } else {
        (q.ceil() as usize).max(1)
    }
}

fn increment(idx: &mut [usize], base: usize) {
    for i in idx.iter_mut() {
        *i += 1;
        if *i < base {
            return;
        }
        *i = 0;
    }
}

fn neighbours(cell: &[i64]) -> impl Iterator<Item = Vec<i64>> + '_ {
    let m = cell.len();
    (0..3usize.pow(m as u32)).map(move |mut code| {
        cell.iter()
            .map(|c| {
                let off = (code % 3) as i64 - 1;
                code /= 3;
                c + off
            })
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionMethod {
    BoxCounting,
    Correlation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub method: DimensionMethod,
    /// Decreasing scales `ε`.
    pub scales: Vec<f64>,
    /// Occupied boxes, or the correlation sum, at each scale.
    pub counts: Vec<f64>,
    /// Inclusive index range of the scales used in the fit.
    pub fit_window: (usize, usize),
    pub slope: f64,
    pub r2_fit: f64,
    pub warning: Option<String>,
    pub note: String,
}

const MIN_POINTS: usize = 100;

fn degenerate(method: DimensionMethod, scales: Vec<f64>, counts: Vec<f64>) -> DimensionEstimate {
    let last = scales.len().saturating_sub(1);
    DimensionEstimate {
        method,
        scales,
        counts,
        fit_window: (0, last),
        slope: 0.0,
        r2_fit: 1.0,
        warning: Some("cloud is a single point up to rounding".into()),
        note: PROXY_NOTE.into(),
    }
}

/// Box origin and largest side of the bounding box of `points` (rows of `dims`).
fn extent(points: &[f64], dims: usize) -> (Vec<f64>, f64) {
    let mut lo = vec![f64::INFINITY; dims];
    let mut hi = vec![f64::NEG_INFINITY; dims];
    for p in points.chunks_exact(dims) {
        for i in 0..dims {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let side = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    (lo, side)
}

/// Coordinates of the cloud in its principal axes. Box dimension is invariant
/// under this isometry, while axis-aligned boxes then follow the set instead
/// of cutting it obliquely in every ambient coordinate.
fn principal_coordinates(cloud: &PointCloud) -> Vec<f64> {
    let d = cloud.dims;
    let n = cloud.len() as f64;
    let mut mean = vec![0.0; d];
    for p in cloud.iter() {
        mean.iter_mut().zip(p).for_each(|(m, x)| *m += x / n);
    }
    let cov = cloud
        .data
        .par_chunks_exact(d)
        .fold(
            || DMatrix::<f64>::zeros(d, d),
            |mut acc, p| {
                let c = DVector::from_iterator(d, p.iter().zip(&mean).map(|(x, m)| x - m));
                acc.ger(1.0, &c, &c, 1.0);
                acc
            },
        )
        .reduce(|| DMatrix::zeros(d, d), |a, b| a + b);
    let axes = SymmetricEigen::new(cov).eigenvectors;
    let mut out = Vec::with_capacity(cloud.data.len());
    for p in cloud.iter() {
        let c = DVector::from_iterator(d, p.iter().zip(&mean).map(|(x, m)| x - m));
        out.extend((axes.transpose() * c).iter());
    }
    out
}

fn is_degenerate(cloud: &PointCloud, side: f64) -> bool {
    let scale = cloud.data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    side <= 1e-12 * (1.0 + scale)
}

/// Box counting at dyadic scales `side/4, side/8, …, side/2^{n_scales}`.
pub fn box_dimension(cloud: &PointCloud, n_scales: usize) -> Result<DimensionEstimate> {
    check_cloud(cloud)?;
    if n_scales < 5 {
        return Err(Error::param("n_scales", "need at least 5 scales"));
    }
    let (_, raw_side) = extent(&cloud.data, cloud.dims);
    let scales: Vec<f64> = (2..=n_scales).map(|i| raw_side / 2f64.powi(i as i32)).collect();
    if is_degenerate(cloud, raw_side) {
        return Ok(degenerate(DimensionMethod::BoxCounting, scales, vec![1.0; n_scales - 1]));
    }
    let coords = principal_coordinates(cloud);
    let dims = cloud.dims;
    let (lo, side) = extent(&coords, dims);
    let scales: Vec<f64> = (2..=n_scales).map(|i| side / 2f64.powi(i as i32)).collect();
    let counts: Vec<f64> = scales
        .par_iter()
        .map(|&eps| {
            let mut boxes: HashSet<Vec<i64>> = HashSet::with_capacity(cloud.len());
            for p in coords.chunks_exact(dims) {
                boxes.insert(p.iter().zip(&lo).map(|(x, l)| ((x - l) / eps).floor() as i64).collect());
            }
            boxes.len() as f64
        })
        .collect();
    // Scales with fewer than ~4 points per occupied box no longer resolve the
    // set; coarse scales carry boundary effects, so fit the finest four left.
    let saturated = cloud.len() as f64 / 4.0;
    let last = counts.iter().rposition(|&c| c <= saturated).unwrap_or(0);
    let first = if last >= 2 { last.saturating_sub(3).max(1) } else { 0 };
    fit(DimensionMethod::BoxCounting, scales, counts, first, last)
}

/// Grassberger–Procaccia correlation sums `C(ε)` over all pairs.
pub fn correlation_dimension(cloud: &PointCloud) -> Result<DimensionEstimate> {
    check_cloud(cloud)?;
    let (_, side) = extent(&cloud.data, cloud.dims);
    let n_scales = 40;
    let ratio = 2f64.sqrt();
    let scales: Vec<f64> = (0..n_scales).map(|i| side / ratio.powi(i as i32 + 2)).collect();
    if is_degenerate(cloud, side) {
        return Ok(degenerate(DimensionMethod::Correlation, scales, vec![1.0; n_scales]));
    }
    let n = cloud.len();
    // hist[i]: pairs with distance in [scales[i+1], scales[i]); hist[n_scales] below the finest scale.
    let hist = (0..n)
        .into_par_iter()
        .fold(
            || vec![0u64; n_scales + 1],
            |mut h, i| {
                let p = cloud.point(i);
                for j in i + 1..n {
                    let d = NormKind::Euclidean.dist(p, cloud.point(j));
                    if d >= scales[0] {
                        continue;
                    }
                    let k = if d > 0.0 { ((scales[0] / d).ln() / ratio.ln()).floor() as usize } else { n_scales };
                    h[k.min(n_scales)] += 1;
                }
                h
            },
        )
        .reduce(
            || vec![0u64; n_scales + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let total_pairs = (n * (n - 1) / 2) as f64;
    let mut counts = vec![0.0; n_scales];
    let mut below = hist[n_scales];
    for i in (0..n_scales).rev() {
        // Pairs closer than scales[i]: everything at finer bins.
        if i < n_scales - 1 {
            below += hist[i + 1];
        }
        counts[i] = below as f64 / total_pairs;
    }
    // Fit where the sum is small (no edge effects) but rests on enough pairs.
    let min_sum = 1000.0 / total_pairs;
    let window: Vec<usize> = (0..n_scales).filter(|&i| counts[i] <= 0.05 && counts[i] >= min_sum).collect();
    let (first, last) = match (window.first(), window.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        _ => (0, n_scales - 1),
    };
    fit(DimensionMethod::Correlation, scales, counts, first, last)
}

fn check_cloud(cloud: &PointCloud) -> Result<()> {
    if cloud.len() < MIN_POINTS {
        return Err(Error::param("cloud", format!("need at least {MIN_POINTS} points, got {}", cloud.len())));
    }
    if cloud.data.iter().any(|x| !x.is_finite()) {
        return Err(Error::param("cloud", "non-finite coordinates"));
    }
    Ok(())
}

/// Least-squares slope of `ln count` against `ln(1/ε)` over `first..=last`.
fn fit(
    method: DimensionMethod,
    scales: Vec<f64>,
    counts: Vec<f64>,
    first: usize,
    last: usize,
) -> Result<DimensionEstimate> {
    let pts: Vec<(f64, f64)> =
        (first..=last).filter(|&i| counts[i] > 0.0).map(|i| (-(scales[i].ln()), counts[i].ln())).collect();
    if pts.len() < 2 {
        return Err(Error::param("cloud", "fewer than two usable scales for the fit"));
    }
    let (slope, r2_fit) = least_squares(&pts);
    let slope = orient(method, slope);
    let mut warning = None;
    if r2_fit < 0.98 {
        let msg = format!("no clean scaling regime: r² = {r2_fit:.4}");
        log::warn!("{msg}");
        warning = Some(msg);
    }
    Ok(DimensionEstimate {
        method,
        scales,
        counts,
        fit_window: (first, last),
        slope,
        r2_fit,
        warning,
        note: PROXY_NOTE.into(),
    })
}

fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, r2)
}

/// Slope over the fit window with one extreme scale removed; used to check
/// that the estimate does not hinge on a single scale.
pub fn trimmed_slope(est: &DimensionEstimate, drop_finest: bool) -> Option<f64> {
    let (a, b) = est.fit_window;
    let (a, b) = if drop_finest { (a, b.checked_sub(1)?) } else { (a + 1, b) };
    if b <= a {
        return None;
    }
    let pts: Vec<(f64, f64)> =
        (a..=b).filter(|&i| est.counts[i] > 0.0).map(|i| (-(est.scales[i].ln()), est.counts[i].ln())).collect();
    (pts.len() >= 2).then(|| orient(est.method, least_squares(&pts).0))
}

/// Box counts grow as `ε` shrinks, correlation sums decay.
fn orient(method: DimensionMethod, slope: f64) -> f64 {
    match method {
        DimensionMethod::BoxCounting => slope,
        DimensionMethod::Correlation => -slope,
    }
}

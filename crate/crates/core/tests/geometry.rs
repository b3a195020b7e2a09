use rand::Rng;
use rdsdim::attractor::PointCloud;
use rdsdim::geometry::{box_dimension, correlation_dimension, covering_bound, grid_cover, trimmed_slope, NormKind};
use rdsdim::noise::rng_for;

const DIM: usize = 50;

fn unit_vector<R: Rng>(rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn segment(n: usize, seed: u64) -> PointCloud {
    let mut rng = rng_for(seed, 0);
    let dir = unit_vector(&mut rng);
    let mut data = Vec::with_capacity(n * DIM);
    for _ in 0..n {
        let t: f64 = rng.random();
        data.extend(dir.iter().map(|d| 3.0 * t * d));
    }
    PointCloud::from_flat(DIM, data).unwrap()
}

pub fn square(n: usize, seed: u64) -> PointCloud {
    let mut rng = rng_for(seed, 0);
    let e1 = unit_vector(&mut rng);
    let raw = unit_vector(&mut rng);
    let dot: f64 = e1.iter().zip(&raw).map(|(a, b)| a * b).sum();
    let mut e2: Vec<f64> = raw.iter().zip(&e1).map(|(r, a)| r - dot * a).collect();
    let n2 = e2.iter().map(|x| x * x).sum::<f64>().sqrt();
    e2.iter_mut().for_each(|x| *x /= n2);
    let mut data = Vec::with_capacity(n * DIM);
    for _ in 0..n {
        let (s, t): (f64, f64) = (rng.random(), rng.random());
        data.extend(e1.iter().zip(&e2).map(|(a, b)| s * a + t * b));
    }
    PointCloud::from_flat(DIM, data).unwrap()
}

#[test]
fn segment_estimates_near_one() {
    let cloud = segment(10_000, 1);
    let b = box_dimension(&cloud, 12).unwrap();
    let c = correlation_dimension(&cloud).unwrap();
    assert!((b.slope - 1.0).abs() <= 0.15, "box {b:?}");
    assert!((c.slope - 1.0).abs() <= 0.15, "corr {c:?}");
}

#[test]
fn square_estimates_near_two() {
    let cloud = square(10_000, 2);
    let b = box_dimension(&cloud, 12).unwrap();
    let c = correlation_dimension(&cloud).unwrap();
    assert!((b.slope - 2.0).abs() <= 0.2, "box {b:?}");
    assert!((c.slope - 2.0).abs() <= 0.2, "corr {c:?}");
}

#[test]
fn repeated_point_has_dimension_zero() {
    let cloud = PointCloud::from_flat(DIM, vec![0.25; DIM * 10_000]).unwrap();
    assert_eq!(box_dimension(&cloud, 10).unwrap().slope, 0.0);
    assert_eq!(correlation_dimension(&cloud).unwrap().slope, 0.0);
}

#[test]
fn counts_nonincreasing_in_scale() {
    for cloud in [segment(2000, 3), square(2000, 4)] {
        let b = box_dimension(&cloud, 10).unwrap();
        // scales are decreasing, so counts must be nondecreasing along the table
        assert!(b.counts.windows(2).all(|w| w[1] >= w[0]));
        let c = correlation_dimension(&cloud).unwrap();
        assert!(c.counts.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn dropping_an_extreme_scale_is_stable() {
    for (cloud, name) in [(segment(10_000, 5), "segment"), (square(10_000, 6), "square")] {
        for est in [box_dimension(&cloud, 12).unwrap(), correlation_dimension(&cloud).unwrap()] {
            for drop_finest in [true, false] {
                if let Some(s) = trimmed_slope(&est, drop_finest) {
                    assert!((s - est.slope).abs() < 0.1, "{name} {:?}: {s} vs {}", est.method, est.slope);
                }
            }
        }
    }
}

#[test]
fn lemma_audit_sup_norm() {
    for m in 1..=4 {
        for ratio in [1.0, 2.0, 5.0] {
            let c = grid_cover(m, 1.0, ratio, NormKind::Sup).unwrap();
            assert!(c.constructed_count as f64 <= covering_bound(m, 1.0, ratio).unwrap());
            assert_eq!(c.constructed_count, (ratio as usize).pow(m as u32));
        }
    }
}

#[test]
fn euclidean_covers_pass_the_probe_audit() {
    for m in 1..=3 {
        let c = grid_cover(m, 0.5, 1.0, NormKind::Euclidean).unwrap();
        assert!(c.constructed_count >= 1 && c.probe_points > 0);
    }
}

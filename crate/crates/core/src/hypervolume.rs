//! Hypervolume of a detector: the share of the training data's minimal
//! enclosing ball that the detector classifies as normal, estimated by
//! uniform Monte Carlo sampling inside the ball.

use log::warn;
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::NormalityClassifier;
use crate::error::{Error, Result};
use crate::features::Deadline;
use crate::rng::{derive_seed, rng_from_seed};

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_SAMPLES: usize = 200_000;
/// Samples generated per chunk; each chunk has its own derived seed.
pub const CHUNK_SIZE: usize = 4096;
/// Above this many dimensions the ball is mostly empty space.
pub const WARN_DIMENSION: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnclosingBall {
    pub center: Vec<f64>,
    pub radius: f64,
    pub epsilon: f64,
}

impl EnclosingBall {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist(&self.center, x) <= self.radius * (1.0 + 1e-9)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// (1+epsilon)-approximate minimal enclosing ball.
///
/// Bădoiu–Clarkson iteration: starting at the first point, move the centre
/// towards the farthest point by `1/(t+1)` of the gap. The centre is always
/// a convex combination `sum_i u_i p_i`, so the dual value
/// `sum_i u_i |p_i|^2 - |c|^2` is a lower bound on the optimal squared
/// radius; iteration stops once the current radius is within `1+epsilon` of
/// that bound, or after `ceil(1/epsilon^2)` steps. The returned radius is the
/// exact farthest distance from the final centre, so containment is exact.
pub fn fit_enclosing_ball(x: ArrayView2<'_, f64>, epsilon: f64) -> Result<EnclosingBall> {
    let (n, d) = x.dim();
    if n == 0 || d == 0 {
        return Err(Error::invalid("enclosing ball of empty data"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon {epsilon} must be positive")));
    }
    // work relative to the first point to limit cancellation in the dual
    let origin: Vec<f64> = x.row(0).to_vec();
    let pts: Vec<f64> = x
        .rows()
        .into_iter()
        .flat_map(|r| r.iter().zip(&origin).map(|(v, o)| v - o).collect::<Vec<_>>())
        .collect();
    let p = |i: usize| &pts[i * d..(i + 1) * d];
    let norm2: Vec<f64> = (0..n).map(|i| p(i).iter().map(|v| v * v).sum()).collect();

    let mut c = vec![0.0; d];
    let mut weighted_norm2 = 0.0; // sum_i u_i |p_i|^2
    let max_iter = (1.0 / (epsilon * epsilon)).ceil() as usize;
    let target = (1.0 + epsilon) * (1.0 + epsilon);
    for t in 1..=max_iter {
        let (far, far_d2) = farthest(&pts, d, &c);
        let dual = weighted_norm2 - c.iter().map(|v| v * v).sum::<f64>();
        if far_d2 <= target * dual.max(0.0) || far_d2 == 0.0 {
            break;
        }
        let step = 1.0 / (t as f64 + 1.0);
        for (cj, pj) in c.iter_mut().zip(p(far)) {
            *cj += (pj - *cj) * step;
        }
        weighted_norm2 += (norm2[far] - weighted_norm2) * step;
    }
    let center: Vec<f64> = c.iter().zip(&origin).map(|(v, o)| v + o).collect();
    let radius = x
        .rows()
        .into_iter()
        .map(|r| r.iter().zip(&center).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    Ok(EnclosingBall {
        center,
        radius,
        epsilon,
    })
}

fn farthest(pts: &[f64], d: usize, c: &[f64]) -> (usize, f64) {
    pts.chunks_exact(d)
        .map(|p| p.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .enumerate()
        .fold((0, -1.0), |best, (i, v)| if v > best.1 { (i, v) } else { best })
}

/// Writes `count` uniform points of the ball into `out` (row-major).
fn fill_uniform<R: Rng>(ball: &EnclosingBall, count: usize, rng: &mut R, out: &mut Vec<f64>) {
    let d = ball.dim();
    let mut dir = vec![0.0; d];
    for _ in 0..count {
        let norm = loop {
            for v in dir.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                break norm;
            }
        };
        let u: f64 = rng.random();
        let r = ball.radius * u.powf(1.0 / d as f64);
        out.extend(dir.iter().zip(&ball.center).map(|(v, c)| c + v / norm * r));
    }
}

fn chunk_len(n: usize, chunk: usize) -> usize {
    CHUNK_SIZE.min(n - chunk * CHUNK_SIZE)
}

/// `n` i.i.d. uniform points of the ball: Gaussian direction, radius
/// `R * u^(1/d)`. Chunk `k` draws from `derive_seed(seed, k)`.
pub fn sample_uniform_in_ball(ball: &EnclosingBall, n: usize, seed: u64) -> Array2<f64> {
    let d = ball.dim();
    let chunks = n.div_ceil(CHUNK_SIZE);
    let mut data = Vec::with_capacity(n * d);
    for k in 0..chunks {
        let mut rng = rng_from_seed(derive_seed(seed, k as u64));
        fill_uniform(ball, chunk_len(n, k), &mut rng, &mut data);
    }
    Array2::from_shape_vec((n, d), data).expect("shape matches")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypervolumeEstimate {
    pub fraction: f64,
    pub n_samples: usize,
    pub std_error: f64,
    pub seed: u64,
}

impl HypervolumeEstimate {
    fn from_count(normal: u64, n: usize, seed: u64) -> Self {
        let fraction = normal as f64 / n as f64;
        Self {
            fraction,
            n_samples: n,
            std_error: (fraction * (1.0 - fraction) / n as f64).sqrt(),
            seed,
        }
    }
}

/// Fraction of `n` uniform ball samples the detector predicts normal.
///
/// Chunks are classified in parallel on the current rayon pool; counts are
/// integers, so the result does not depend on the number of workers.
pub fn estimate_hypervolume<C: NormalityClassifier + ?Sized>(
    detector: &C,
    ball: &EnclosingBall,
    n: usize,
    seed: u64,
) -> Result<HypervolumeEstimate> {
    estimate_hypervolume_until(detector, ball, n, seed, &Deadline::none())
}

pub fn estimate_hypervolume_until<C: NormalityClassifier + ?Sized>(
    detector: &C,
    ball: &EnclosingBall,
    n: usize,
    seed: u64,
    deadline: &Deadline,
) -> Result<HypervolumeEstimate> {
    let d = ball.dim();
    if detector.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: detector.dim(),
            found: d,
        });
    }
    if n == 0 {
        return Err(Error::invalid("hypervolume needs at least one sample"));
    }
    if d > WARN_DIMENSION {
        warn!("hypervolume in {d} dimensions: Monte Carlo estimate is likely vacuous");
    }
    let chunks = n.div_ceil(CHUNK_SIZE);
    let normal: u64 = (0..chunks)
        .into_par_iter()
        .map(|k| -> Result<u64> {
            deadline.check()?;
            let mut rng = rng_from_seed(derive_seed(seed, k as u64));
            let mut buf = Vec::with_capacity(CHUNK_SIZE * d);
            fill_uniform(ball, chunk_len(n, k), &mut rng, &mut buf);
            Ok(buf.chunks_exact(d).filter(|x| !detector.is_anomaly(x)).count() as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(HypervolumeEstimate::from_count(normal, n, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    struct Fixed(bool, usize);

    impl NormalityClassifier for Fixed {
        fn dim(&self) -> usize {
            self.1
        }
        fn is_anomaly(&self, _: &[f64]) -> bool {
            self.0
        }
    }

    #[test]
    fn symmetric_pair() {
        let b = fit_enclosing_ball(array![[-1.0, 0.0], [1.0, 0.0]].view(), 1e-3).unwrap();
        assert!(b.center.iter().all(|v| v.abs() < 1e-12), "{:?}", b.center);
        assert!((b.radius - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_point() {
        let b = fit_enclosing_ball(array![[3.0, -2.0, 1.0]].view(), 1e-3).unwrap();
        assert_eq!(b.center, vec![3.0, -2.0, 1.0]);
        assert_eq!(b.radius, 0.0);
    }

    #[test]
    fn samples_stay_inside() {
        let ball = EnclosingBall {
            center: vec![1.0, -1.0, 2.0],
            radius: 2.5,
            epsilon: 1e-3,
        };
        let s = sample_uniform_in_ball(&ball, 10_000, 3);
        assert_eq!(s.dim(), (10_000, 3));
        assert!(s.rows().into_iter().all(|r| dist(r.as_slice().unwrap(), &ball.center) <= ball.radius + 1e-12));
        assert_eq!(s, sample_uniform_in_ball(&ball, 10_000, 3));
    }

    #[test]
    fn sample_mean_near_center() {
        let ball = EnclosingBall {
            center: vec![0.5, -0.5],
            radius: 1.0,
            epsilon: 1e-3,
        };
        let n = 50_000;
        let s = sample_uniform_in_ball(&ball, n, 8);
        // per-coordinate variance of a uniform disk of radius R is R^2/4
        let sigma = (0.25 / n as f64).sqrt();
        for j in 0..2 {
            let m = s.column(j).sum() / n as f64;
            assert!((m - ball.center[j]).abs() < 3.0 * sigma, "coord {j}: {m}");
        }
    }

    #[test]
    fn trivial_detectors() {
        let ball = EnclosingBall {
            center: vec![0.0; 2],
            radius: 1.0,
            epsilon: 1e-3,
        };
        let all_normal = estimate_hypervolume(&Fixed(false, 2), &ball, 5000, 1).unwrap();
        assert_eq!(all_normal.fraction, 1.0);
        assert_eq!(all_normal.std_error, 0.0);
        let none = estimate_hypervolume(&Fixed(true, 2), &ball, 5000, 1).unwrap();
        assert_eq!(none.fraction, 0.0);
        assert!(matches!(
            estimate_hypervolume(&Fixed(true, 3), &ball, 5000, 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn worker_count_does_not_matter() {
        struct HalfPlane;
        impl NormalityClassifier for HalfPlane {
            fn dim(&self) -> usize {
                3
            }
            fn is_anomaly(&self, x: &[f64]) -> bool {
                x[0] + 0.3 * x[2] > 0.2
            }
        }
        let ball = EnclosingBall {
            center: vec![0.0; 3],
            radius: 2.0,
            epsilon: 1e-3,
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_hypervolume(&HalfPlane, &ball, 30_001, 5).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}

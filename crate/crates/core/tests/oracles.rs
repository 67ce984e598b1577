mod common;

use adsel::detectors::NormalityClassifier;
use adsel::hypervolume::{estimate_hypervolume, fit_enclosing_ball, EnclosingBall};
use adsel::ranking::ConfusionCounts;
use adsel::rng::rng_from_seed;
use ndarray::Array2;
use rand::Rng;

/// Accepts points within `rho * R` of the ball centre.
struct Nested<'a> {
    ball: &'a EnclosingBall,
    rho: f64,
}

impl NormalityClassifier for Nested<'_> {
    fn dim(&self) -> usize {
        self.ball.dim()
    }
    fn is_anomaly(&self, x: &[f64]) -> bool {
        let d2: f64 = x.iter().zip(&self.ball.center).map(|(a, b)| (a - b) * (a - b)).sum();
        d2.sqrt() > self.rho * self.ball.radius
    }
}

fn unit_ball(d: usize) -> EnclosingBall {
    EnclosingBall { center: vec![0.5; d], radius: 2.0, epsilon: 1e-3 }
}

#[test]
fn ball_matches_welzl_on_small_sets() {
    for seed in 0..20u64 {
        let mut rng = rng_from_seed(seed);
        let n = 3 + (seed as usize % 7);
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0)]).collect();
        let x = Array2::from_shape_fn((n, 2), |(i, j)| pts[i][j]);
        let ball = fit_enclosing_ball(x.view(), 1e-3).unwrap();
        let (_, r) = common::welzl(&pts, seed);
        assert!(ball.radius >= r * (1.0 - 1e-9) && ball.radius <= r * (1.0 + 1e-3), "seed {seed}");
        for p in &pts {
            assert!(ball.contains(p));
        }
    }
}

#[test]
fn nested_detectors_are_monotone() {
    let ball = unit_ball(3);
    let mut prev = 0.0;
    for rho in [0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
        let f = estimate_hypervolume(&Nested { ball: &ball, rho }, &ball, 40_000, 17).unwrap().fraction;
        assert!(f >= prev, "rho {rho}: {f} < {prev}");
        prev = f;
    }
    assert_eq!(prev, 1.0);
}

#[test]
fn estimator_consistency() {
    let ball = unit_ball(2);
    let det = Nested { ball: &ball, rho: 0.6 };
    let small = estimate_hypervolume(&det, &ball, 10_000, 1).unwrap();
    let large = estimate_hypervolume(&det, &ball, 160_000, 1).unwrap();
    let ratio = small.std_error / large.std_error;
    assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    let other = estimate_hypervolume(&det, &ball, 160_000, 2).unwrap();
    let pooled = (large.std_error.powi(2) + other.std_error.powi(2)).sqrt();
    assert!((large.fraction - other.fraction).abs() < 6.0 * pooled);
}

#[test]
fn hypervolume_ignores_training_row_order() {
    use adsel::detectors::{Algorithm, DetectorConfig};
    use rand::seq::SliceRandom;
    let mut rng = rng_from_seed(3);
    let x = Array2::from_shape_fn((100, 2), |_| rng.random_range(-1.0..1.0));
    let mut order: Vec<usize> = (0..100).collect();
    order.shuffle(&mut rng);
    let xs = x.select(ndarray::Axis(0), &order);
    let cfg = DetectorConfig::default_for(Algorithm::Gaussian);
    let est = |m: &Array2<f64>| {
        let ball = fit_enclosing_ball(m.view(), 1e-3).unwrap();
        estimate_hypervolume(&cfg.fit_matrix(m.view()).unwrap(), &ball, 50_000, 9).unwrap()
    };
    let (a, b) = (est(&x), est(&xs));
    assert!((a.fraction - b.fraction).abs() <= 3.0 * a.std_error.max(b.std_error));
}

#[test]
fn mcc_matches_definition_on_all_small_matrices() {
    for tp in 0..=5 {
        for fp in 0..=5 {
            for fn_ in 0..=5 {
                for tn in 0..=5 {
                    let got = ConfusionCounts { tp, fp, fn_, tn }.mcc();
                    assert_eq!(got, common::mcc_direct(tp, fp, fn_, tn), "{tp} {fp} {fn_} {tn}");
                }
            }
        }
    }
}

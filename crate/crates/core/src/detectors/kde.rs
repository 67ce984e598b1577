use ndarray::Array2;

use super::{row, sq_dist, ScoreModel};

/// Negative log of a Gaussian kernel density estimate (normalising
/// constants dropped).
#[derive(Debug)]
pub(crate) struct Kde {
    train: Array2<f64>,
    inv_two_h2: f64,
}

impl Kde {
    pub(crate) fn fit(train: Array2<f64>, bandwidth: f64) -> Self {
        Self {
            train,
            inv_two_h2: 1.0 / (2.0 * bandwidth * bandwidth),
        }
    }
}

impl ScoreModel for Kde {
    fn score(&self, x: &[f64]) -> f64 {
        let n = self.train.nrows();
        let exps: Vec<f64> = (0..n)
            .map(|i| -sq_dist(x, row(&self.train, i)) * self.inv_two_h2)
            .collect();
        let max = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = exps.iter().map(|e| (e - max).exp()).sum();
        -(max + (sum / n as f64).ln())
    }

    fn training_scores(&self) -> Vec<f64> {
        (0..self.train.nrows())
            .map(|i| self.score(row(&self.train, i)))
            .collect()
    }
}

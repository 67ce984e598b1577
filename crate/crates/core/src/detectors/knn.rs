use std::str::FromStr;

use ndarray::Array2;

use super::{row, sq_dist, ScoreModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Aggregation {
    Largest,
    Mean,
    Median,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "largest" => Ok(Aggregation::Largest),
            "mean" => Ok(Aggregation::Mean),
            "median" => Ok(Aggregation::Median),
            other => Err(Error::invalid(format!("unknown k-NN aggregation '{other}'"))),
        }
    }
}

/// Distance to the k nearest training points.
#[derive(Debug)]
pub(crate) struct Knn {
    train: Array2<f64>,
    k: usize,
    method: Aggregation,
}

impl Knn {
    pub(crate) fn fit(train: Array2<f64>, k: usize, method: Aggregation) -> Result<Self> {
        if train.nrows() <= k {
            return Err(Error::fit(
                "knn",
                format!("k = {k} needs more than {k} training rows, got {}", train.nrows()),
            ));
        }
        Ok(Self { train, k, method })
    }

    fn aggregate(&self, dists: &mut [f64]) -> f64 {
        let k = self.k;
        dists.select_nth_unstable_by(k - 1, f64::total_cmp);
        let nearest = &mut dists[..k];
        nearest.sort_by(f64::total_cmp);
        match self.method {
            Aggregation::Largest => nearest[k - 1].sqrt(),
            Aggregation::Mean => nearest.iter().map(|d| d.sqrt()).sum::<f64>() / k as f64,
            Aggregation::Median => {
                if k % 2 == 1 {
                    nearest[k / 2].sqrt()
                } else {
                    (nearest[k / 2 - 1].sqrt() + nearest[k / 2].sqrt()) / 2.0
                }
            }
        }
    }
}

impl ScoreModel for Knn {
    fn score(&self, x: &[f64]) -> f64 {
        let mut dists: Vec<f64> = (0..self.train.nrows())
            .map(|i| sq_dist(x, row(&self.train, i)))
            .collect();
        self.aggregate(&mut dists)
    }

    /// Leave-self-out: a training row is not its own neighbour.
    fn training_scores(&self) -> Vec<f64> {
        let n = self.train.nrows();
        (0..n)
            .map(|i| {
                let xi = row(&self.train, i);
                let mut dists: Vec<f64> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| sq_dist(xi, row(&self.train, j)))
                    .collect();
                self.aggregate(&mut dists)
            })
            .collect()
    }
}

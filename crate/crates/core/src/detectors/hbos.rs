use ndarray::ArrayView2;

use super::ScoreModel;

/// Height added to every bin before taking logs.
const ALPHA: f64 = 0.1;
/// Values this many bin widths outside the range fall into the edge bin.
const TOLERANCE: f64 = 0.5;

#[derive(Debug)]
struct Histogram {
    lo: f64,
    width: f64,
    /// Bin heights normalised so the tallest bin is 1.
    heights: Vec<f64>,
}

impl Histogram {
    fn fit(values: impl Iterator<Item = f64> + Clone, bins: usize) -> Self {
        let (lo, hi) = values
            .clone()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if hi <= lo {
            return Self {
                lo,
                width: 0.0,
                heights: vec![1.0],
            };
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for v in values {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let max = *counts.iter().max().expect("non-empty") as f64;
        Self {
            lo,
            width,
            heights: counts.iter().map(|&c| c as f64 / max).collect(),
        }
    }

    fn height(&self, v: f64) -> f64 {
        if self.width == 0.0 {
            return if v == self.lo { 1.0 } else { 0.0 };
        }
        let bins = self.heights.len();
        let pos = (v - self.lo) / self.width;
        if pos < -TOLERANCE || pos > bins as f64 + TOLERANCE {
            return 0.0;
        }
        let b = (pos.max(0.0) as usize).min(bins - 1);
        self.heights[b]
    }
}

/// Histogram-based outlier score: sum over features of `-ln(height + alpha)`.
#[derive(Debug)]
pub(crate) struct Hbos {
    hists: Vec<Histogram>,
    train_scores: Vec<f64>,
}

impl Hbos {
    pub(crate) fn fit(x: ArrayView2<'_, f64>, bins: usize) -> Self {
        let hists = x
            .columns()
            .into_iter()
            .map(|c| Histogram::fit(c.into_iter().copied(), bins))
            .collect();
        let mut model = Self {
            hists,
            train_scores: Vec::new(),
        };
        model.train_scores = x.rows().into_iter().map(|r| model.score(&r.to_vec())).collect();
        model
    }
}

impl ScoreModel for Hbos {
    fn score(&self, x: &[f64]) -> f64 {
        self.hists
            .iter()
            .zip(x)
            .map(|(h, &v)| -(h.height(v) + ALPHA).ln())
            .sum()
    }

    fn training_scores(&self) -> Vec<f64> {
        self.train_scores.clone()
    }
}

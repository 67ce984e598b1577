use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Random-forest regressor settings. The defaults mirror the usual library
/// defaults: 100 trees, bootstrap sampling, every feature considered at each
/// split, unlimited depth, squared-error splits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            bootstrap: true,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_depth: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Regression tree; samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: &'a ForestParams,
    nodes: Vec<TreeNode>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let value = rows.iter().map(|&r| self.y[r]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(TreeNode::Leaf { value });
        self.nodes.len() - 1
    }

    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let n = rows.len();
        let pure = rows.iter().all(|&r| self.y[r] == self.y[rows[0]]);
        let too_deep = self.params.max_depth.is_some_and(|m| depth >= m);
        if pure || too_deep || n < self.params.min_samples_split || n < 2 * self.params.min_samples_leaf {
            return self.leaf(rows);
        }
        let Some(best) = self.best_split(rows) else {
            return self.leaf(rows);
        };
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: f64::NAN });
        let (f, t) = (best.feature, best.threshold);
        rows.sort_by(|&a, &b| {
            (self.x[a][f] > t).cmp(&(self.x[b][f] > t)).then(a.cmp(&b))
        });
        let split_at = rows.iter().take_while(|&&r| self.x[r][f] <= t).count();
        let (l, r) = rows.split_at_mut(split_at);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: f,
            threshold: t,
            left,
            right,
        };
        id
    }

    /// Maximises `S_L^2/n_L + S_R^2/n_R`, which is equivalent to minimising
    /// the children's summed squared error. Features and thresholds are
    /// scanned in ascending order and only strict improvements replace the
    /// incumbent, so ties go to the lowest feature, then lowest threshold.
    fn best_split(&self, rows: &[usize]) -> Option<BestSplit> {
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let total: f64 = rows.iter().map(|&r| self.y[r]).sum();
        let mut best: Option<BestSplit> = None;
        let mut order = rows.to_vec();
        for f in 0..self.x[rows[0]].len() {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for i in 0..n - 1 {
                left_sum += self.y[order[i]];
                let (v, next) = (self.x[order[i]][f], self.x[order[i + 1]][f]);
                let n_left = i + 1;
                if v == next || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / n_left as f64
                    + right_sum * right_sum / (n - n_left) as f64;
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let mut threshold = v + (next - v) / 2.0;
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }
}

impl RegressionTree {
    pub fn fit(x: &[Vec<f64>], y: &[f64], rows: &mut [usize], params: &ForestParams) -> Self {
        let mut b = Builder {
            x,
            y,
            params,
            nodes: Vec::new(),
        };
        b.build(rows, 0);
        RegressionTree { nodes: b.nodes }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub params: ForestParams,
    pub n_features: usize,
    pub trees: Vec<RegressionTree>,
}

impl Forest {
    /// Fits `params.n_trees` trees in parallel; tree `t` draws its bootstrap
    /// sample from `derive_seed(params.seed, t)`.
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: ForestParams) -> Result<Self> {
        let n = x.len();
        if n == 0 {
            return Err(Error::invalid("random forest needs training instances"));
        }
        if y.len() != n {
            return Err(Error::invalid(format!("{} targets for {n} rows", y.len())));
        }
        if params.n_trees == 0 {
            return Err(Error::invalid("random forest needs at least one tree"));
        }
        let d = x[0].len();
        if x.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("ragged feature rows"));
        }
        if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite training value"));
        }
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rows: Vec<usize> = if params.bootstrap {
                    let mut rng = rng_from_seed(derive_seed(params.seed, t as u64));
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                RegressionTree::fit(x, y, &mut rows, &params)
            })
            .collect();
        Ok(Self {
            params,
            n_features: d,
            trees,
        })
    }

    /// Mean of the per-tree predictions, summed in tree order.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64)
    }

    pub fn tree_predictions(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
        let y = vec![0.7; 30];
        let f = Forest::fit(&x, &y, ForestParams { n_trees: 10, ..Default::default() }).unwrap();
        for p in [[0.0, 0.0], [100.0, -3.0], [4.5, 2.0]] {
            assert!((f.predict(&p).unwrap() - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn stump_predicts_global_mean() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| (i % 3) as f64).collect();
        let params = ForestParams {
            n_trees: 1,
            bootstrap: false,
            min_samples_split: 11,
            ..Default::default()
        };
        let f = Forest::fit(&x, &y, params).unwrap();
        let mean = y.iter().sum::<f64>() / 10.0;
        assert!((f.predict(&[3.0]).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn single_tree_interpolates() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i * 37 % 41) as f64, (i % 5) as f64]).collect();
        let y: Vec<f64> = (0..40).map(|i| ((i * 13) % 17) as f64 / 17.0).collect();
        let params = ForestParams {
            n_trees: 1,
            bootstrap: false,
            ..Default::default()
        };
        let f = Forest::fit(&x, &y, params).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(f.predict(xi).unwrap(), *yi);
        }
    }

    #[test]
    fn ties_pick_lowest_feature() {
        // both features separate the targets identically
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let y = vec![0.0, 1.0];
        let params = ForestParams { n_trees: 1, bootstrap: false, ..Default::default() };
        let f = Forest::fit(&x, &y, params).unwrap();
        match &f.trees[0].nodes[0] {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 0.5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn prediction_is_mean_of_trees_and_within_range() {
        let x: Vec<Vec<f64>> = (0..60).map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos()]).collect();
        let y: Vec<f64> = (0..60).map(|i| ((i * 7) % 11) as f64 / 10.0).collect();
        let f = Forest::fit(&x, &y, ForestParams { n_trees: 25, seed: 3, ..Default::default() }).unwrap();
        let (lo, hi) = y.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        for p in [[0.1, 0.2], [-0.9, 0.9], [3.0, -3.0]] {
            let per = f.tree_predictions(&p);
            let mean = per.iter().sum::<f64>() / per.len() as f64;
            let pred = f.predict(&p).unwrap();
            assert_eq!(pred, mean);
            assert!(lo <= pred && pred <= hi);
        }
    }

    #[test]
    fn errors() {
        assert!(Forest::fit(&[], &[], ForestParams::default()).is_err());
        let f = Forest::fit(&[vec![1.0], vec![2.0]], &[0.0, 1.0], ForestParams::default()).unwrap();
        assert!(f.predict(&[1.0, 2.0]).is_err());
    }
}

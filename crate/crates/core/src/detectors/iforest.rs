use ndarray::ArrayView2;
use rand::seq::index;
use rand::Rng;

use super::ScoreModel;
use crate::rng::{derive_seed, rng_from_seed};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average path length of an unsuccessful BST search over `n` points.
fn c_factor(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

#[derive(Debug)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

#[derive(Debug)]
struct ITree {
    nodes: Vec<Node>,
}

impl ITree {
    fn grow<R: Rng>(x: ArrayView2<'_, f64>, rows: Vec<usize>, height_limit: usize, rng: &mut R) -> Self {
        let mut tree = ITree { nodes: Vec::new() };
        tree.build(x, rows, 0, height_limit, rng);
        tree
    }

    fn build<R: Rng>(
        &mut self,
        x: ArrayView2<'_, f64>,
        rows: Vec<usize>,
        depth: usize,
        limit: usize,
        rng: &mut R,
    ) -> usize {
        let id = self.nodes.len();
        if depth >= limit || rows.len() <= 1 {
            self.nodes.push(Node::Leaf { size: rows.len() });
            return id;
        }
        // features with spread inside this node
        let spans: Vec<(usize, f64, f64)> = (0..x.ncols())
            .filter_map(|f| {
                let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                    (lo.min(x[[r, f]]), hi.max(x[[r, f]]))
                });
                (hi > lo).then_some((f, lo, hi))
            })
            .collect();
        if spans.is_empty() {
            self.nodes.push(Node::Leaf { size: rows.len() });
            return id;
        }
        let (feature, lo, hi) = spans[rng.random_range(0..spans.len())];
        let threshold = rng.random_range(lo..hi);
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| x[[r, feature]] < threshold);
        self.nodes.push(Node::Leaf { size: 0 });
        let left = self.build(x, left_rows, depth + 1, limit, rng);
        let right = self.build(x, right_rows, depth + 1, limit, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[node] {
                Node::Leaf { size } => return depth + c_factor(size),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[feature] < threshold { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }
}

/// Isolation forest; score is `2^(-E[h(x)] / c(psi))`.
#[derive(Debug)]
pub(crate) struct IsolationForest {
    trees: Vec<ITree>,
    psi: usize,
    train_scores: Vec<f64>,
}

impl IsolationForest {
    pub(crate) fn fit(x: ArrayView2<'_, f64>, n_estimators: usize, max_samples: usize, seed: u64) -> Self {
        let n = x.nrows();
        let psi = max_samples.min(n);
        let limit = (psi.max(2) as f64).log2().ceil() as usize;
        let trees = (0..n_estimators)
            .map(|t| {
                let mut rng = rng_from_seed(derive_seed(seed, t as u64));
                let mut rows = index::sample(&mut rng, n, psi).into_vec();
                rows.sort_unstable();
                ITree::grow(x, rows, limit, &mut rng)
            })
            .collect();
        let mut forest = Self {
            trees,
            psi,
            train_scores: Vec::new(),
        };
        forest.train_scores = x.rows().into_iter().map(|r| forest.score(&r.to_vec())).collect();
        forest
    }
}

impl ScoreModel for IsolationForest {
    fn score(&self, x: &[f64]) -> f64 {
        let mean_path =
            self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64;
        let c = c_factor(self.psi);
        if c == 0.0 {
            return 0.5;
        }
        2f64.powf(-mean_path / c)
    }

    fn training_scores(&self) -> Vec<f64> {
        self.train_scores.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use ndarray::Array2;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn score_drops_towards_dense_cluster() {
        // two clusters: a dense one at (0,0), a sparse one at (6,6)
        let mut rng = rng_from_seed(17);
        let tight = Normal::new(0.0, 0.3).unwrap();
        let loose = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        for _ in 0..200 {
            rows.push([tight.sample(&mut rng), tight.sample(&mut rng)]);
        }
        for _ in 0..40 {
            rows.push([6.0 + loose.sample(&mut rng), 6.0 + loose.sample(&mut rng)]);
        }
        let x = Array2::from_shape_fn((rows.len(), 2), |(i, j)| rows[i][j]);
        let forest = IsolationForest::fit(x.view(), 100, 256, 99);
        let path: Vec<f64> = (0..=6)
            .map(|s| {
                let t = 3.0 - s as f64 * 0.5; // from (3,3) to (0,0)
                forest.score(&[t, t])
            })
            .collect();
        for w in path.windows(2) {
            assert!(w[1] < w[0] + 1e-3, "{path:?}");
        }
        assert!(path[0] > path[6] + 0.1);
    }

    #[test]
    fn c_factor_values() {
        assert_eq!(c_factor(1), 0.0);
        assert_eq!(c_factor(2), 1.0);
        assert!((c_factor(256) - 10.2448).abs() < 1e-3);
    }
}

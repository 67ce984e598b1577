use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::ArrayView2;

use super::ScoreModel;
use crate::error::{Error, Result};

/// Reconstruction error after projecting onto the leading principal
/// components that explain `retained` of the variance.
///
/// At most `d - 1` components are kept when `d > 1`, so the score is never
/// identically zero in more than one dimension.
#[derive(Debug)]
pub(crate) struct Pca {
    mean: Vec<f64>,
    /// Discarded (minor) components, one per row.
    minor: Vec<Vec<f64>>,
    train_scores: Vec<f64>,
}

impl Pca {
    pub(crate) fn fit(x: ArrayView2<'_, f64>, retained: f64) -> Result<Self> {
        let (n, d) = x.dim();
        let mean: Vec<f64> = x.columns().into_iter().map(|c| c.sum() / n as f64).collect();
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for r in x.rows() {
            let c = DVector::from_iterator(d, r.iter().zip(&mean).map(|(v, m)| v - m));
            cov += &c * c.transpose();
        }
        cov /= n as f64;
        let eig = SymmetricEigen::new(cov);
        if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::fit("pca", "eigen decomposition failed"));
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
        let mut kept = 0;
        let mut acc = 0.0;
        while kept < d && (total == 0.0 || acc / total < retained) {
            acc += eig.eigenvalues[order[kept]].max(0.0);
            kept += 1;
            if total == 0.0 {
                break;
            }
        }
        if d > 1 {
            kept = kept.min(d - 1);
        }
        let minor = order[kept..]
            .iter()
            .map(|&j| eig.eigenvectors.column(j).iter().copied().collect())
            .collect();
        let mut model = Self {
            mean,
            minor,
            train_scores: Vec::new(),
        };
        model.train_scores = x.rows().into_iter().map(|r| model.score(&r.to_vec())).collect();
        Ok(model)
    }
}

impl ScoreModel for Pca {
    fn score(&self, x: &[f64]) -> f64 {
        self.minor
            .iter()
            .map(|v| {
                let proj: f64 = v.iter().zip(x.iter().zip(&self.mean)).map(|(a, (b, m))| a * (b - m)).sum();
                proj * proj
            })
            .sum()
    }

    fn training_scores(&self) -> Vec<f64> {
        self.train_scores.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn points_on_the_line_reconstruct() {
        // data along y = 2x with small noise in the orthogonal direction
        let x = Array2::from_shape_fn((50, 2), |(i, j)| {
            let t = i as f64 / 10.0;
            let eps = if i % 2 == 0 { 0.01 } else { -0.01 };
            if j == 0 { t - 2.0 * eps } else { 2.0 * t + eps }
        });
        let p = Pca::fit(x.view(), 0.9).unwrap();
        assert_eq!(p.minor.len(), 1);
        assert!(p.score(&[1.0, 2.0]) < 1e-3);
        assert!(p.score(&[2.0, -1.0]) > 1.0);
    }
}

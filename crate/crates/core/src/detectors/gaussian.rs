use nalgebra::{Cholesky, DMatrix, DVector};
use ndarray::ArrayView2;

use super::ScoreModel;
use crate::error::{Error, Result};

/// Squared Mahalanobis distance under a ridge-regularised covariance.
#[derive(Debug)]
pub(crate) struct Gaussian {
    mean: DVector<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
    train_scores: Vec<f64>,
}

impl Gaussian {
    pub(crate) fn fit(x: ArrayView2<'_, f64>, ridge: f64) -> Result<Self> {
        let (n, d) = x.dim();
        let mean = DVector::from_iterator(d, x.columns().into_iter().map(|c| c.sum() / n as f64));
        let mut cov = DMatrix::<f64>::zeros(d, d);
        for r in x.rows() {
            let c = DVector::from_iterator(d, r.iter().copied()) - &mean;
            cov += &c * c.transpose();
        }
        cov /= n as f64;
        for i in 0..d {
            cov[(i, i)] += ridge;
        }
        let chol = Cholesky::new(cov)
            .ok_or_else(|| Error::fit("gaussian", "covariance not positive definite"))?;
        let mut model = Self {
            mean,
            chol,
            train_scores: Vec::new(),
        };
        model.train_scores = x.rows().into_iter().map(|r| model.score(&r.to_vec())).collect();
        Ok(model)
    }
}

impl ScoreModel for Gaussian {
    fn score(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(x) - &self.mean;
        let y = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&diff)
            .expect("cholesky factor is invertible");
        y.norm_squared()
    }

    fn training_scores(&self) -> Vec<f64> {
        self.train_scores.clone()
    }
}

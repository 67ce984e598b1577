//! The surrogate model: mean imputation, min-max scaling and a random-forest
//! regressor predicting a detector's scaled MCC from meta-features.

mod forest;
mod prep;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use forest::{Forest, ForestParams, RegressionTree, TreeNode};
pub use prep::{drop_empty_landmarks, FeatureScaler, Imputer};

use crate::error::{Error, Result};
use crate::features::MetaDataset;

pub const MODEL_FORMAT: &str = "adsel-metamodel";
pub const MODEL_VERSION: u32 = 1;

/// Fitted preprocessing plus forest, bound to a column schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaModel {
    pub format: String,
    pub version: u32,
    pub columns: Vec<String>,
    pub imputer: Imputer,
    pub scaler: FeatureScaler,
    pub forest: Forest,
}

impl MetaModel {
    /// Imputes, scales and fits on `train`. Targets must lie in [0, 1].
    pub fn fit(train: &MetaDataset, params: ForestParams) -> Result<Self> {
        if train.rows.len() < 2 {
            return Err(Error::invalid(format!(
                "meta-model needs at least 2 training instances, got {}",
                train.rows.len()
            )));
        }
        if let Some(r) = train.rows.iter().find(|r| !(0.0..=1.0).contains(&r.target)) {
            return Err(Error::invalid(format!(
                "target {} of '{}' outside [0, 1]",
                r.target, r.config_id
            )));
        }
        let imputer = Imputer::fit(train);
        let imputed = imputer.transform(train);
        let scaler = FeatureScaler::fit(&imputed);
        let x = scaler.transform(&imputed);
        let y: Vec<f64> = train.rows.iter().map(|r| r.target).collect();
        let forest = Forest::fit(&x, &y, params)?;
        Ok(Self {
            format: MODEL_FORMAT.to_owned(),
            version: MODEL_VERSION,
            columns: train.columns.clone(),
            imputer,
            scaler,
            forest,
        })
    }

    /// Prediction for raw (unimputed, unscaled) values in model column order.
    pub fn predict_values(&self, values: &[Option<f64>]) -> Result<f64> {
        if values.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                found: values.len(),
            });
        }
        let row = self.scaler.transform_row(&self.imputer.transform_row(values));
        self.forest.predict(&row)
    }

    /// Predicts every row of `data`, matching columns by name. Model
    /// columns missing from `data` count as absent and get imputed.
    pub fn predict(&self, data: &MetaDataset) -> Result<Vec<f64>> {
        let map: Vec<Option<usize>> = self.columns.iter().map(|c| data.column_index(c)).collect();
        if map.iter().all(Option::is_none) {
            return Err(Error::invalid("instances share no column with the model"));
        }
        data.rows
            .iter()
            .map(|r| {
                let values: Vec<Option<f64>> = map.iter().map(|m| m.and_then(|j| r.values[j])).collect();
                self.predict_values(&values)
            })
            .collect()
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let header: Header =
            serde_json::from_slice(bytes).map_err(|e| Error::Model(format!("corrupt model file: {e}")))?;
        if header.format != MODEL_FORMAT {
            return Err(Error::Model(format!("unexpected format tag '{}'", header.format)));
        }
        if header.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "model version {} not supported (expected {MODEL_VERSION})",
                header.version
            )));
        }
        serde_json::from_slice(bytes).map_err(|e| Error::Model(format!("corrupt model file: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.to_writer(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_slice(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::MetaInstance;

    fn toy(n: usize) -> MetaDataset {
        MetaDataset {
            columns: vec!["landmark_hv_a".into(), "detector_hv".into(), "detector_fpr".into()],
            rows: (0..n)
                .map(|i| {
                    let t = i as f64 / n as f64;
                    MetaInstance {
                        dataset_id: "d".into(),
                        config_id: format!("c{i}"),
                        values: vec![if i % 4 == 0 { None } else { Some(0.3) }, Some(t), Some(1.0 - t)],
                        target: t,
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn save_load_bitwise() {
        let m = MetaModel::fit(&toy(40), ForestParams { n_trees: 20, seed: 4, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        m.to_writer(&mut buf).unwrap();
        let back = MetaModel::from_slice(&buf).unwrap();
        assert_eq!(back, m);
        let probe = toy(100);
        let a = m.predict(&probe).unwrap();
        let b = back.predict(&probe).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn version_and_corruption() {
        let m = MetaModel::fit(&toy(10), ForestParams { n_trees: 2, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        m.to_writer(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let wrong = text.replacen("\"version\":1", "\"version\":99", 1);
        assert!(matches!(MetaModel::from_slice(wrong.as_bytes()), Err(Error::Model(m)) if m.contains("version")));
        let truncated = &buf[..buf.len() / 2];
        assert!(matches!(MetaModel::from_slice(truncated), Err(Error::Model(_))));
    }

    #[test]
    fn fit_rejects_bad_targets() {
        let mut t = toy(5);
        t.rows[0].target = 1.5;
        assert!(MetaModel::fit(&t, ForestParams::default()).is_err());
        assert!(MetaModel::fit(&toy(1), ForestParams::default()).is_err());
    }

    #[test]
    fn missing_columns_are_imputed() {
        let m = MetaModel::fit(&toy(20), ForestParams { n_trees: 5, ..Default::default() }).unwrap();
        let partial = toy(3).project(&[1, 2]);
        assert_eq!(m.predict(&partial).unwrap().len(), 3);
    }
}

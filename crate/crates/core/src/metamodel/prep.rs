use log::warn;
use serde::{Deserialize, Serialize};

use crate::features::MetaDataset;

/// Removes every landmark column that has no value anywhere in `test` from
/// both tables. Detector-feature columns are always kept.
pub fn drop_empty_landmarks(train: &MetaDataset, test: &MetaDataset) -> (MetaDataset, MetaDataset) {
    assert_eq!(train.columns, test.columns, "meta-train and meta-test schemas differ");
    let keep: Vec<usize> = (0..test.columns.len())
        .filter(|&j| {
            !MetaDataset::is_landmark(&test.columns[j]) || test.rows.iter().any(|r| r.values[j].is_some())
        })
        .collect();
    (train.project(&keep), test.project(&keep))
}

/// Mean imputation fitted on meta-train. Columns with no values at all are
/// filled with 0.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    pub fill: Vec<f64>,
}

impl Imputer {
    pub fn fit(data: &MetaDataset) -> Self {
        let fill = (0..data.columns.len())
            .map(|j| {
                let present: Vec<f64> = data.rows.iter().filter_map(|r| r.values[j]).collect();
                if present.is_empty() {
                    warn!("column '{}' has no values; imputing 0.0", data.columns[j]);
                    0.0
                } else {
                    present.iter().sum::<f64>() / present.len() as f64
                }
            })
            .collect();
        Self { fill }
    }

    pub fn transform_row(&self, values: &[Option<f64>]) -> Vec<f64> {
        values
            .iter()
            .zip(&self.fill)
            .map(|(v, f)| v.unwrap_or(*f))
            .collect()
    }

    pub fn transform(&self, data: &MetaDataset) -> Vec<Vec<f64>> {
        data.rows.iter().map(|r| self.transform_row(&r.values)).collect()
    }
}

/// Per-column min-max scaling fitted on meta-train. Constant columns map
/// to 0.0; values outside the fitted range are not clipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for r in rows {
            for j in 0..d {
                min[j] = min[j].min(r[j]);
                max[j] = max[j].max(r[j]);
            }
        }
        Self { min, max }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let span = self.max[j] - self.min[j];
                if span > 0.0 {
                    (v - self.min[j]) / span
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

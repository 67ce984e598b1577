//! Labeled datasets and their assimilation into semi-supervised splits.
//!
//! A base dataset is turned into a [`SemiSupervisedSplit`] in four steps:
//! sub-sample anomalies down to a minority fraction, split stratified by
//! label into train/test/holdout, strip anomalies from train, and scale all
//! partitions with mean/IQR statistics fitted on train.

use std::io::Read;
use std::path::Path;

use log::warn;
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats::quantile_sorted;

pub const DEFAULT_LABEL_COLUMN: &str = "label";

/// Feature matrix with one binary label per row (0 = normal, 1 = anomaly).
///
/// `origin` records, per row, the row index in the dataset this one was
/// derived from, so partitions can be traced back and checked for overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    name: String,
    feature_names: Vec<String>,
    features: Array2<f64>,
    labels: Vec<u8>,
    origin: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<u8>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(Error::invalid(format!("dataset must be non-empty, got {n}x{d}")));
        }
        let origin = (0..n).collect();
        let feature_names =
            feature_names.unwrap_or_else(|| (0..d).map(|j| format!("x{j}")).collect());
        let ds = Self::from_parts(name.into(), feature_names, features, labels, origin)?;
        Ok(ds)
    }

    fn from_parts(
        name: String,
        feature_names: Vec<String>,
        features: Array2<f64>,
        labels: Vec<u8>,
        origin: Vec<usize>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if labels.len() != n || origin.len() != n {
            return Err(Error::invalid(format!(
                "{} labels for {n} rows",
                labels.len()
            )));
        }
        if feature_names.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: feature_names.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::invalid(format!("label {bad} outside {{0,1}}")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
        Ok(Self {
            name,
            feature_names,
            features,
            labels,
            origin,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn origin(&self) -> &[usize] {
        &self.origin
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_anomalies(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn n_normals(&self) -> usize {
        self.n_rows() - self.n_anomalies()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows at `rows`, in the given order. May produce an empty dataset.
    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            origin: rows.iter().map(|&i| self.origin[i]).collect(),
        }
    }

    /// Normal rows only, in original order.
    pub fn normals(&self) -> Self {
        let keep: Vec<usize> = (0..self.n_rows()).filter(|&i| self.labels[i] == 0).collect();
        self.select(&keep)
    }
}

/// Loads a CSV file with a header row. Every column except `label_column`
/// must be numeric; the label column must hold 0 or 1.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_owned());
    read_csv(file, &name, Some(label_column))
}

/// Like [`load_csv`], but a missing label column yields an all-normal
/// dataset instead of an error.
pub fn load_csv_unlabeled(path: impl AsRef<Path>, label_column: &str) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_owned());
    let mut rdr = csv::Reader::from_reader(file);
    let has_label = rdr.headers()?.iter().any(|h| h == label_column);
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, &name, has_label.then_some(label_column))
}

/// Parses CSV text. `label_column = None` treats every row as normal.
pub fn read_csv<R: Read>(
    reader: R,
    name: &str,
    label_column: Option<&str>,
) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let label_idx = match label_column {
        Some(col) => Some(headers.iter().position(|h| h == col).ok_or_else(|| Error::Parse {
            row: 0,
            column: col.to_owned(),
            message: "label column not found in header".to_owned(),
        })?),
        None => None,
    };
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&j| Some(j) != label_idx).collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&j| headers[j].to_owned()).collect();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        for &j in &feature_cols {
            let cell = record.get(j).unwrap_or("").trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: headers[j].to_owned(),
                message: format!("non-numeric value '{cell}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: headers[j].to_owned(),
                    message: format!("non-finite value '{cell}'"),
                });
            }
            values.push(v);
        }
        let label = match label_idx {
            Some(j) => {
                let cell = record.get(j).unwrap_or("").trim();
                match cell.parse::<f64>() {
                    Ok(v) if v == 0.0 => 0,
                    Ok(v) if v == 1.0 => 1,
                    _ => {
                        return Err(Error::Parse {
                            row,
                            column: headers[j].to_owned(),
                            message: format!("label '{cell}' outside {{0,1}}"),
                        })
                    }
                }
            }
            None => 0,
        };
        labels.push(label);
    }
    let n = labels.len();
    let features = Array2::from_shape_vec((n, feature_cols.len()), values)
        .map_err(|e| Error::invalid(e.to_string()))?;
    LabeledDataset::new(name, features, labels, Some(feature_names))
}

/// Keeps all normals and the largest uniformly drawn subset of anomalies
/// whose share of the result does not exceed `hi`. Datasets already at or
/// below `hi` are returned unchanged.
pub fn subsample_outliers(
    data: &LabeledDataset,
    lo: f64,
    hi: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if !(0.0 < lo && lo <= hi && hi < 1.0) {
        return Err(Error::invalid(format!("outlier band ({lo}, {hi}) must satisfy 0 < lo <= hi < 1")));
    }
    let n_normal = data.n_normals();
    let n_anomaly = data.n_anomalies();
    if n_normal == 0 {
        return Err(Error::invalid(format!(
            "dataset '{}' has no normal rows; anomaly fraction undefined",
            data.name()
        )));
    }
    if (n_anomaly as f64) / (data.n_rows() as f64) <= hi {
        return Ok(data.clone());
    }
    let keep = max_anomalies(n_normal, hi).min(n_anomaly);
    let frac = keep as f64 / (n_normal + keep) as f64;
    if frac < lo {
        warn!(
            "dataset '{}': sub-sampled anomaly fraction {frac:.4} below lower bound {lo}",
            data.name()
        );
    }
    let anomaly_rows: Vec<usize> = (0..data.n_rows()).filter(|&i| data.labels[i] == 1).collect();
    let mut rng = rng_from_seed(seed);
    let mut picked: Vec<usize> = index::sample(&mut rng, anomaly_rows.len(), keep)
        .into_iter()
        .map(|k| anomaly_rows[k])
        .collect();
    picked.sort_unstable();
    let mut rows: Vec<usize> = (0..data.n_rows()).filter(|&i| data.labels[i] == 0).collect();
    rows.extend(picked);
    rows.sort_unstable();
    Ok(data.select(&rows))
}

/// Largest `a` with `a / (n_normal + a) <= hi`.
fn max_anomalies(n_normal: usize, hi: f64) -> usize {
    let ok = |a: usize| (a as f64) / ((n_normal + a) as f64) <= hi;
    let mut a = (hi * n_normal as f64 / (1.0 - hi)).floor().max(0.0) as usize;
    while ok(a + 1) {
        a += 1;
    }
    while a > 0 && !ok(a) {
        a -= 1;
    }
    a
}

/// Mean and IQR per feature, fitted on a training partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub means: Vec<f64>,
    pub iqrs: Vec<f64>,
    pub fitted_on: String,
}

/// Fits `(x - mean) / IQR` scaling; zero-IQR columns get divisor 1.0.
pub fn fit_robust_scaler(train: &LabeledDataset) -> Result<ScalingParams> {
    fit_robust_scaler_matrix(train.features(), train.name())
}

pub fn fit_robust_scaler_matrix(x: ArrayView2<'_, f64>, fitted_on: &str) -> Result<ScalingParams> {
    if x.nrows() == 0 {
        return Err(Error::invalid("cannot fit scaler on empty data"));
    }
    let mut means = Vec::with_capacity(x.ncols());
    let mut iqrs = Vec::with_capacity(x.ncols());
    for col in x.columns() {
        let mut sorted = col.to_vec();
        means.push(sorted.iter().sum::<f64>() / sorted.len() as f64);
        sorted.sort_by(f64::total_cmp);
        let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
        iqrs.push(if iqr > 0.0 { iqr } else { 1.0 });
    }
    Ok(ScalingParams {
        means,
        iqrs,
        fitted_on: fitted_on.to_owned(),
    })
}

impl ScalingParams {
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                found: x.ncols(),
            });
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.means[j], self.iqrs[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }
}

pub fn apply_scaler(params: &ScalingParams, data: &LabeledDataset) -> Result<LabeledDataset> {
    let features = params.transform(data.features())?;
    Ok(LabeledDataset {
        features,
        ..data.clone()
    })
}

/// Train/test/holdout partition of one base dataset.
#[derive(Debug, Clone)]
pub struct SemiSupervisedSplit {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub holdout: LabeledDataset,
    /// `None` until [`SemiSupervisedSplit::scale`] has run.
    pub scaler: Option<ScalingParams>,
    pub seed: u64,
}

/// Shuffles, then assigns each class to the three partitions with
/// largest-remainder rounding of `fractions` (ties favour the earlier
/// partition). Partition rows keep the shuffled order.
pub fn stratified_split(
    data: &LabeledDataset,
    fractions: [f64; 3],
    seed: u64,
) -> Result<SemiSupervisedSplit> {
    if data.is_empty() {
        return Err(Error::invalid("cannot split an empty dataset"));
    }
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f))
        || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::invalid(format!("split fractions {fractions:?} must sum to 1")));
    }
    let mut order: Vec<usize> = (0..data.n_rows()).collect();
    order.shuffle(&mut rng_from_seed(seed));

    let mut quota = [[0usize; 3]; 2];
    for class in 0..2u8 {
        let m = data.labels.iter().filter(|&&l| l == class).count();
        quota[class as usize] = largest_remainder(m, fractions);
    }
    let mut parts: [Vec<usize>; 3] = Default::default();
    let mut taken = [[0usize; 3]; 2];
    for &i in &order {
        let c = data.labels[i] as usize;
        let p = (0..3).find(|&p| taken[c][p] < quota[c][p]).expect("quotas cover class");
        taken[c][p] += 1;
        parts[p].push(i);
    }
    Ok(SemiSupervisedSplit {
        train: data.select(&parts[0]),
        test: data.select(&parts[1]),
        holdout: data.select(&parts[2]),
        scaler: None,
        seed,
    })
}

/// Splits `m` items by `fractions`: floors first, then one extra item to
/// each of the largest fractional remainders.
pub fn largest_remainder(m: usize, fractions: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| f * m as f64).collect();
    let mut counts = [0usize; 3];
    for p in 0..3 {
        counts[p] = exact[p].floor() as usize;
    }
    let mut left = m - counts.iter().sum::<usize>();
    let mut by_rem: Vec<usize> = (0..3).collect();
    by_rem.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &p in by_rem.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[p] += 1;
        left -= 1;
    }
    counts
}

impl SemiSupervisedSplit {
    /// Removes label-1 rows from train; test and holdout are untouched.
    pub fn strip_anomalies(mut self) -> Self {
        self.train = self.train.normals();
        self
    }

    /// Fits the scaler on train and applies it to all three partitions.
    pub fn scale(mut self) -> Result<Self> {
        let params = fit_robust_scaler(&self.train)?;
        self.train = apply_scaler(&params, &self.train)?;
        self.test = apply_scaler(&params, &self.test)?;
        if !self.holdout.is_empty() {
            self.holdout = apply_scaler(&params, &self.holdout)?;
        }
        self.scaler = Some(params);
        Ok(self)
    }

    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            dataset: self.train.name().to_owned(),
            seed: self.seed,
            origin_indices: PartitionIndices {
                train: self.train.origin().to_vec(),
                test: self.test.origin().to_vec(),
                holdout: self.holdout.origin().to_vec(),
            },
            scaler: self.scaler.clone(),
        }
    }
}

pub fn strip_anomalies(split: SemiSupervisedSplit) -> SemiSupervisedSplit {
    split.strip_anomalies()
}

/// Parameters of the assimilation steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssimilationParams {
    pub outlier_band: (f64, f64),
    pub fractions: [f64; 3],
}

impl Default for AssimilationParams {
    fn default() -> Self {
        Self {
            outlier_band: (0.05, 0.10),
            fractions: [0.70, 0.20, 0.10],
        }
    }
}

/// Sub-sample, split, strip and scale a base dataset.
pub fn assimilate(
    data: &LabeledDataset,
    params: &AssimilationParams,
    seed: u64,
) -> Result<SemiSupervisedSplit> {
    let (lo, hi) = params.outlier_band;
    let reduced = subsample_outliers(data, lo, hi, derive_seed(seed, 1))?;
    let split = stratified_split(&reduced, params.fractions, derive_seed(seed, 2))?;
    let split = split.strip_anomalies();
    if split.train.is_empty() {
        return Err(Error::invalid(format!("dataset '{}' has an empty train partition", data.name())));
    }
    split.scale()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub holdout: Vec<usize>,
}

/// JSON record of a split: enough to rebuild it from the base dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub dataset: String,
    pub seed: u64,
    pub origin_indices: PartitionIndices,
    pub scaler: Option<ScalingParams>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy(n_normal: usize, n_anomaly: usize) -> LabeledDataset {
        let n = n_normal + n_anomaly;
        let x = Array2::from_shape_fn((n, 2), |(i, j)| (i * 2 + j) as f64);
        let mut labels = vec![0u8; n_normal];
        labels.extend(std::iter::repeat(1).take(n_anomaly));
        LabeledDataset::new("toy", x, labels, None).unwrap()
    }

    #[test]
    fn csv_round_trip_basic() {
        let text = "a,b,label\n1,2,0\n3,4,0\n5,6,1\n7,8,0\n";
        let ds = read_csv(text.as_bytes(), "t", Some("label")).unwrap();
        assert_eq!(ds.n_rows(), 4);
        assert_eq!(ds.n_anomalies(), 1);
        assert_eq!(ds.labels(), &[0, 0, 1, 0]);
        assert_eq!(ds.feature_names(), &["a".to_owned(), "b".to_owned()]);
        assert_eq!(ds.row(2).to_vec(), vec![5.0, 6.0]);
    }

    #[test]
    fn csv_custom_label_column() {
        let text = "class,x\n1,0.5\n0,0.25\n";
        let ds = read_csv(text.as_bytes(), "t", Some("class")).unwrap();
        assert_eq!(ds.labels(), &[1, 0]);
        assert_eq!(ds.n_features(), 1);
    }

    #[test]
    fn csv_text_cell_names_row_and_column() {
        let text = "a,b,label\n1,2,0\n3,oops,1\n";
        match read_csv(text.as_bytes(), "t", Some("label")) {
            Err(Error::Parse { row, column, message }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
                assert!(message.contains("oops"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_bad_label_and_missing_column() {
        let bad = "a,label\n1,2\n";
        assert!(matches!(read_csv(bad.as_bytes(), "t", Some("label")), Err(Error::Parse { .. })));
        let missing = "a,b\n1,2\n";
        assert!(matches!(read_csv(missing.as_bytes(), "t", Some("label")), Err(Error::Parse { .. })));
        assert!(load_csv("/nonexistent/file.csv", "label").is_err());
    }

    #[test]
    fn subsample_counts() {
        let out = subsample_outliers(&toy(70, 30), 0.05, 0.10, 1).unwrap();
        assert_eq!(out.n_normals(), 70);
        assert_eq!(out.n_anomalies(), 7);

        let same = toy(95, 5);
        assert_eq!(subsample_outliers(&same, 0.05, 0.10, 1).unwrap(), same);

        let out = subsample_outliers(&toy(90, 90), 0.05, 0.10, 1).unwrap();
        assert_eq!(out.n_anomalies(), 10);

        assert!(subsample_outliers(&toy(0, 5), 0.05, 0.10, 1).is_err());
        assert!(subsample_outliers(&toy(5, 5), 0.2, 0.1, 1).is_err());
    }

    #[test]
    fn subsample_is_seeded() {
        let d = toy(70, 30);
        assert_eq!(
            subsample_outliers(&d, 0.05, 0.1, 9).unwrap(),
            subsample_outliers(&d, 0.05, 0.1, 9).unwrap()
        );
    }

    #[test]
    fn split_proportions() {
        let s = stratified_split(&toy(90, 10), [0.7, 0.2, 0.1], 3).unwrap();
        assert_eq!((s.train.n_rows(), s.test.n_rows(), s.holdout.n_rows()), (70, 20, 10));
        assert_eq!(
            (s.train.n_anomalies(), s.test.n_anomalies(), s.holdout.n_anomalies()),
            (7, 2, 1)
        );
    }

    #[test]
    fn split_tiny_single_anomaly() {
        let s = stratified_split(&toy(9, 1), [0.7, 0.2, 0.1], 3).unwrap();
        assert_eq!((s.train.n_rows(), s.test.n_rows(), s.holdout.n_rows()), (7, 2, 1));
        let total = s.train.n_anomalies() + s.test.n_anomalies() + s.holdout.n_anomalies();
        assert_eq!(total, 1);
    }

    #[test]
    fn split_rejects_bad_fractions() {
        assert!(stratified_split(&toy(9, 1), [0.5, 0.2, 0.1], 3).is_err());
    }

    #[test]
    fn strip_only_touches_train() {
        let s = stratified_split(&toy(90, 10), [0.7, 0.2, 0.1], 5).unwrap();
        let test_anoms = s.test.n_anomalies();
        let s = s.strip_anomalies();
        assert_eq!(s.train.n_rows(), 63);
        assert_eq!(s.train.n_anomalies(), 0);
        assert_eq!(s.test.n_anomalies(), test_anoms);
        let again = s.clone().strip_anomalies();
        assert_eq!(again.train, s.train);
    }

    #[test]
    fn scaler_example_column() {
        let x = array![[1.0, 4.0], [2.0, 4.0], [3.0, 4.0], [4.0, 4.0], [5.0, 4.0]];
        let ds = LabeledDataset::new("s", x, vec![0; 5], None).unwrap();
        let p = fit_robust_scaler(&ds).unwrap();
        assert_eq!(p.means, vec![3.0, 4.0]);
        assert_eq!(p.iqrs, vec![2.0, 1.0]);
        let scaled = apply_scaler(&p, &ds).unwrap();
        let col: Vec<f64> = scaled.features().column(0).to_vec();
        assert_eq!(col, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(scaled.features().column(1).iter().all(|&v| v == 0.0));

        let test = LabeledDataset::new("t", array![[7.0, 4.0]], vec![1], None).unwrap();
        assert_eq!(apply_scaler(&p, &test).unwrap().row(0)[0], 2.0);
    }

    #[test]
    fn largest_remainder_sums() {
        for m in 0..50 {
            let c = largest_remainder(m, [0.7, 0.2, 0.1]);
            assert_eq!(c.iter().sum::<usize>(), m);
        }
        assert_eq!(largest_remainder(9, [0.7, 0.2, 0.1]), [6, 2, 1]);
        assert_eq!(largest_remainder(1, [0.7, 0.2, 0.1]), [1, 0, 0]);
    }
}

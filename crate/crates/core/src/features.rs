//! Meta-features and the meta-learning dataset.
//!
//! A detector is described by its hypervolume and its Monte Carlo
//! cross-validated false-positive rate on the (normal-only) train partition.
//! A dataset is described by its *landmarks*: the same two features for every
//! default-configured portfolio detector. Each meta-instance joins a dataset's
//! landmarks with one randomly configured detector's features and that
//! detector's scaled MCC on the labeled test partition.

use std::io::{Read, Write};
use std::time::{Duration, Instant};

use log::{info, warn};
use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, SemiSupervisedSplit};
use crate::detectors::{
    default_configs, sample_random_config, Algorithm, DetectorConfig, DetectorFactory,
    NormalityClassifier,
};
use crate::error::{Error, Result};
use crate::hypervolume::{estimate_hypervolume_until, fit_enclosing_ball, EnclosingBall};
use crate::ranking::{scaled_mcc, ConfusionCounts};
use crate::rng::{derive_seed, rng_from_seed, PipelineRng};

pub const DETECTOR_HV: &str = "detector_hv";
pub const DETECTOR_FPR: &str = "detector_fpr";
pub const TARGET: &str = "target_scaled_mcc";
pub const LANDMARK_PREFIX: &str = "landmark_";

/// Cooperative time limit checked between units of work.
#[derive(Debug, Clone, Copy)]
pub struct Deadline {
    at: Option<(Instant, Duration)>,
}

impl Deadline {
    pub fn none() -> Self {
        Self { at: None }
    }

    pub fn after(budget: Option<Duration>) -> Self {
        Self {
            at: budget.map(|b| (Instant::now() + b, b)),
        }
    }

    pub fn check(&self) -> Result<()> {
        match self.at {
            Some((at, budget)) if Instant::now() >= at => Err(Error::Timeout(budget)),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSettings {
    pub hv_samples: usize,
    pub ball_epsilon: f64,
    pub fpr_test_fraction: f64,
    pub fpr_repetitions: usize,
    pub landmark_budget: Option<Duration>,
    pub detector_budget: Option<Duration>,
    /// Replacement configurations drawn after a random detector fails.
    pub max_replacements: usize,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        Self {
            hv_samples: crate::hypervolume::DEFAULT_SAMPLES,
            ball_epsilon: crate::hypervolume::DEFAULT_EPSILON,
            fpr_test_fraction: 0.3,
            fpr_repetitions: 10,
            landmark_budget: Some(Duration::from_secs(300)),
            detector_budget: Some(Duration::from_secs(300)),
            max_replacements: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FprEstimate {
    pub mean: f64,
    pub per_repetition: Vec<f64>,
}

/// Monte Carlo cross-validated false-positive rate on normal-only data.
///
/// Each repetition shuffles the rows with its own derived seed, holds out
/// `floor(n * test_fraction)` of them, fits on the rest and records the
/// share of held-out rows flagged anomalous.
pub fn mc_cv_fpr<F: DetectorFactory + ?Sized>(
    factory: &F,
    train: ArrayView2<'_, f64>,
    test_fraction: f64,
    repetitions: usize,
    seed: u64,
) -> Result<FprEstimate> {
    mc_cv_fpr_until(factory, train, test_fraction, repetitions, seed, &Deadline::none())
}

pub fn mc_cv_fpr_until<F: DetectorFactory + ?Sized>(
    factory: &F,
    train: ArrayView2<'_, f64>,
    test_fraction: f64,
    repetitions: usize,
    seed: u64,
    deadline: &Deadline,
) -> Result<FprEstimate> {
    let n = train.nrows();
    let n_test = (n as f64 * test_fraction).floor() as usize;
    if repetitions == 0 || n_test == 0 || n_test >= n {
        return Err(Error::invalid(format!(
            "MC-CV with {n} rows and test fraction {test_fraction} leaves {n_test} held-out rows"
        )));
    }
    let mut per_repetition = Vec::with_capacity(repetitions);
    for r in 0..repetitions {
        deadline.check()?;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng_from_seed(derive_seed(seed, r as u64)));
        let (held, fit_rows) = idx.split_at(n_test);
        let det = factory.fit(train.select(Axis(0), fit_rows).view())?;
        let flagged = held
            .iter()
            .filter(|&&i| det.is_anomaly(&train.row(i).to_vec()))
            .count();
        per_repetition.push(flagged as f64 / n_test as f64);
    }
    let mean = per_repetition.iter().sum::<f64>() / repetitions as f64;
    Ok(FprEstimate {
        mean,
        per_repetition,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorFeatures {
    pub hypervolume: f64,
    pub fpr: f64,
    pub config_id: String,
}

/// Fits on all of `train`, then measures hypervolume and MC-CV FPR.
/// Returns the fitted detector as well.
pub fn detector_features<F: DetectorFactory + ?Sized>(
    factory: &F,
    train: ArrayView2<'_, f64>,
    ball: &EnclosingBall,
    settings: &FeatureSettings,
    seed: u64,
    deadline: &Deadline,
) -> Result<(DetectorFeatures, F::Detector)> {
    let det = factory.fit(train)?;
    deadline.check()?;
    let hv = estimate_hypervolume_until(&det, ball, settings.hv_samples, derive_seed(seed, 1), deadline)?;
    let fpr = mc_cv_fpr_until(
        factory,
        train,
        settings.fpr_test_fraction,
        settings.fpr_repetitions,
        derive_seed(seed, 2),
        deadline,
    )?;
    deadline.check()?;
    Ok((
        DetectorFeatures {
            hypervolume: hv.fraction,
            fpr: fpr.mean,
            config_id: factory.id().to_owned(),
        },
        det,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkPair {
    pub hypervolume: f64,
    pub fpr: f64,
}

/// Landmark features of one dataset, one optional pair per landmark detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkVector {
    pub dataset_id: String,
    pub names: Vec<String>,
    pub values: Vec<Option<LandmarkPair>>,
}

impl LandmarkVector {
    /// `[hv_1, fpr_1, ..., hv_P, fpr_P]`
    pub fn flat(&self) -> Vec<Option<f64>> {
        self.values
            .iter()
            .flat_map(|v| [v.map(|p| p.hypervolume), v.map(|p| p.fpr)])
            .collect()
    }

    pub fn column_names(&self) -> Vec<String> {
        landmark_columns(&self.names)
    }
}

pub fn landmark_columns(names: &[String]) -> Vec<String> {
    names
        .iter()
        .flat_map(|n| [format!("{LANDMARK_PREFIX}hv_{n}"), format!("{LANDMARK_PREFIX}fpr_{n}")])
        .collect()
}

/// Landmarks from the default configuration of every portfolio algorithm.
pub fn build_landmarks(
    train: &LabeledDataset,
    ball: &EnclosingBall,
    settings: &FeatureSettings,
    seed: u64,
) -> LandmarkVector {
    let configs = default_configs();
    let names = configs.iter().map(|c| c.algorithm().to_string()).collect();
    build_landmarks_with(&configs, names, train.features(), train.name(), ball, settings, seed)
}

/// Landmarks from arbitrary factories. A factory that fails or exceeds the
/// landmark budget leaves its pair absent.
pub fn build_landmarks_with<F: DetectorFactory>(
    factories: &[F],
    names: Vec<String>,
    train: ArrayView2<'_, f64>,
    dataset_id: &str,
    ball: &EnclosingBall,
    settings: &FeatureSettings,
    seed: u64,
) -> LandmarkVector {
    assert_eq!(factories.len(), names.len());
    let values = factories
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let deadline = Deadline::after(settings.landmark_budget);
            match detector_features(f, train, ball, settings, derive_seed(seed, i as u64), &deadline) {
                Ok((feat, _)) => Some(LandmarkPair {
                    hypervolume: feat.hypervolume,
                    fpr: feat.fpr,
                }),
                Err(e) => {
                    warn!("dataset '{dataset_id}': landmark {} absent: {e}", f.id());
                    None
                }
            }
        })
        .collect();
    LandmarkVector {
        dataset_id: dataset_id.to_owned(),
        names,
        values,
    }
}

/// Detector features plus the test-set target of one random detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorFragment {
    pub dataset_id: String,
    pub features: DetectorFeatures,
    pub config: Option<DetectorConfig>,
    pub mcc: f64,
    pub target_scaled_mcc: f64,
    /// Configurations tried before this one succeeded.
    pub replaced: usize,
}

/// Confusion counts of `det` on a labeled set (anomaly = positive).
pub fn confusion<C: NormalityClassifier + ?Sized>(det: &C, data: &LabeledDataset) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (i, &label) in data.labels().iter().enumerate() {
        let flagged = det.is_anomaly(&data.row(i).to_vec());
        match (flagged, label == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

pub fn build_detector_instance(
    split: &SemiSupervisedSplit,
    ball: &EnclosingBall,
    config: DetectorConfig,
    settings: &FeatureSettings,
    seed: u64,
) -> Result<DetectorFragment> {
    build_detector_instance_with(
        split,
        ball,
        config,
        |rng| sample_random_config(None, rng),
        settings,
        seed,
    )
}

/// Computes one meta-instance fragment. When a configuration fails or runs
/// past the detector budget, a replacement from `resample` is tried, up to
/// `settings.max_replacements` times.
pub fn build_detector_instance_with<F, S>(
    split: &SemiSupervisedSplit,
    ball: &EnclosingBall,
    first: F,
    mut resample: S,
    settings: &FeatureSettings,
    seed: u64,
) -> Result<DetectorFragment>
where
    F: DetectorFactory + FactoryConfig,
    S: FnMut(&mut PipelineRng) -> F,
{
    let dataset_id = split.train.name();
    let mut replace_rng = rng_from_seed(derive_seed(seed, 0xFEED));
    let mut current = first;
    let mut last_err = String::new();
    for attempt in 0..=settings.max_replacements {
        if attempt > 0 {
            current = resample(&mut replace_rng);
        }
        let deadline = Deadline::after(settings.detector_budget);
        let outcome = detector_features(
            &current,
            split.train.features(),
            ball,
            settings,
            derive_seed(seed, attempt as u64),
            &deadline,
        );
        match outcome {
            Ok((features, det)) => {
                let mcc = confusion(&det, &split.test).mcc();
                return Ok(DetectorFragment {
                    dataset_id: dataset_id.to_owned(),
                    features,
                    config: current.detector_config().cloned(),
                    mcc,
                    target_scaled_mcc: scaled_mcc(mcc),
                    replaced: attempt,
                });
            }
            Err(e) => {
                info!("dataset '{dataset_id}': replacing {} after attempt {attempt}: {e}", current.id());
                last_err = format!("{}: {e}", current.id());
            }
        }
    }
    warn!("dataset '{dataset_id}': detector slot skipped, {last_err}");
    Err(Error::RetriesExhausted {
        attempts: settings.max_replacements + 1,
        last: last_err,
    })
}

/// Exposes the underlying configuration, when a factory has one.
pub trait FactoryConfig {
    fn detector_config(&self) -> Option<&DetectorConfig> {
        None
    }
}

impl FactoryConfig for DetectorConfig {
    fn detector_config(&self) -> Option<&DetectorConfig> {
        Some(self)
    }
}

/// One row of the meta-learning dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaInstance {
    pub dataset_id: String,
    pub config_id: String,
    /// Feature values aligned with [`MetaDataset::columns`]; `None` = absent.
    pub values: Vec<Option<f64>>,
    pub target: f64,
}

/// Meta-instances with a shared, ordered feature schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaDataset {
    pub columns: Vec<String>,
    pub rows: Vec<MetaInstance>,
}

/// Joins every fragment with its dataset's landmarks. Columns are the
/// landmark pairs in portfolio order, then `detector_hv`, `detector_fpr`.
pub fn assemble_meta_dataset(
    landmarks: &[LandmarkVector],
    fragments: &[DetectorFragment],
) -> Result<MetaDataset> {
    let names = match landmarks.first() {
        Some(l) => l.names.clone(),
        None => return Err(Error::invalid("no landmark vectors")),
    };
    if let Some(l) = landmarks.iter().find(|l| l.names != names) {
        return Err(Error::invalid(format!("landmark schema of '{}' differs", l.dataset_id)));
    }
    let mut columns = landmark_columns(&names);
    columns.push(DETECTOR_HV.to_owned());
    columns.push(DETECTOR_FPR.to_owned());
    let rows = fragments
        .iter()
        .map(|f| {
            let lm = landmarks
                .iter()
                .find(|l| l.dataset_id == f.dataset_id)
                .ok_or_else(|| {
                    Error::invalid(format!("no landmarks for dataset '{}'", f.dataset_id))
                })?;
            let mut values = lm.flat();
            values.push(Some(f.features.hypervolume));
            values.push(Some(f.features.fpr));
            Ok(MetaInstance {
                dataset_id: f.dataset_id.clone(),
                config_id: f.features.config_id.clone(),
                values,
                target: f.target_scaled_mcc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetaDataset { columns, rows })
}

impl MetaDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn is_landmark(column: &str) -> bool {
        column.starts_with(LANDMARK_PREFIX)
    }

    /// Distinct dataset ids in first-seen order.
    pub fn dataset_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for r in &self.rows {
            if !ids.contains(&r.dataset_id) {
                ids.push(r.dataset_id.clone());
            }
        }
        ids
    }

    pub fn concat(parts: &[MetaDataset]) -> Result<MetaDataset> {
        let Some(first) = parts.first() else {
            return Err(Error::invalid("nothing to concatenate"));
        };
        if parts.iter().any(|p| p.columns != first.columns) {
            return Err(Error::invalid("meta-datasets have different schemas"));
        }
        Ok(MetaDataset {
            columns: first.columns.clone(),
            rows: parts.iter().flat_map(|p| p.rows.iter().cloned()).collect(),
        })
    }

    /// Keeps only the named columns, in the given order.
    pub fn project(&self, keep: &[usize]) -> MetaDataset {
        MetaDataset {
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| MetaInstance {
                    values: keep.iter().map(|&j| r.values[j]).collect(),
                    ..r.clone()
                })
                .collect(),
        }
    }

    pub fn column_values(&self, j: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.values[j]).collect()
    }

    /// CSV: `dataset_id,config_id,<columns...>,target_scaled_mcc`; absent
    /// values are empty cells.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["dataset_id".to_owned(), "config_id".to_owned()];
        header.extend(self.columns.iter().cloned());
        header.push(TARGET.to_owned());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.dataset_id.clone(), r.config_id.clone()];
            rec.extend(r.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            rec.push(r.target.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<meta csv>", e))?;
        Ok(())
    }

    /// Reads the CSV layout written by [`MetaDataset::write_csv`]. The
    /// target column may be missing, in which case targets are NaN.
    pub fn read_csv<R: Read>(reader: R) -> Result<MetaDataset> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let id_col = col("dataset_id");
        let cfg_col = col("config_id");
        let target_col = col(TARGET);
        let feature_cols: Vec<usize> = (0..headers.len())
            .filter(|&j| Some(j) != id_col && Some(j) != cfg_col && Some(j) != target_col)
            .collect();
        let columns = feature_cols.iter().map(|&j| headers[j].to_owned()).collect();
        let parse = |row: usize, j: usize, cell: &str| -> Result<Option<f64>> {
            let cell = cell.trim();
            if cell.is_empty() {
                return Ok(None);
            }
            cell.parse::<f64>().map(Some).map_err(|_| Error::Parse {
                row,
                column: headers[j].to_owned(),
                message: format!("non-numeric value '{cell}'"),
            })
        };
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 1;
            let get = |j: Option<usize>| j.and_then(|j| rec.get(j)).unwrap_or("").to_owned();
            let values = feature_cols
                .iter()
                .map(|&j| parse(row, j, rec.get(j).unwrap_or("")))
                .collect::<Result<Vec<_>>>()?;
            let target = match target_col {
                Some(j) => parse(row, j, rec.get(j).unwrap_or(""))?.unwrap_or(f64::NAN),
                None => f64::NAN,
            };
            rows.push(MetaInstance {
                dataset_id: get(id_col),
                config_id: if cfg_col.is_some() { get(cfg_col) } else { format!("row-{row}") },
                values,
                target,
            });
        }
        Ok(MetaDataset { columns, rows })
    }
}

/// Portfolio algorithm names in landmark order.
pub fn portfolio_names() -> Vec<String> {
    Algorithm::ALL.iter().map(|a| a.to_string()).collect()
}

/// Convenience: fits the enclosing ball of a train partition.
pub fn train_ball(train: &LabeledDataset, settings: &FeatureSettings) -> Result<EnclosingBall> {
    fit_enclosing_ball(train.features(), settings.ball_epsilon)
}

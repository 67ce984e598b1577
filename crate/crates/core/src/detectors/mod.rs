//! Native portfolio of semi-supervised anomaly detectors.
//!
//! Every detector is fitted on normal-only rows and maps a point to a score
//! where higher means more anomalous. The binary decision is calibrated from
//! the training scores: the threshold is their `(1 - contamination)`
//! interpolated quantile and a point is an anomaly iff its score exceeds it.

mod gaussian;
mod hbos;
mod iforest;
mod knn;
mod kde;
mod lof;
mod pca;
mod space;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use space::{
    HyperparameterSpace, ParamKind, ParamSpec, ParamValue, CONTAMINATION_RANGE,
    DEFAULT_CONTAMINATION, KNN_METHODS,
};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::stats::quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Knn,
    Lof,
    #[serde(rename = "iforest")]
    IsolationForest,
    Hbos,
    Pca,
    Gaussian,
    Kde,
}

impl Algorithm {
    /// Portfolio order; landmark columns follow it.
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Knn,
        Algorithm::Lof,
        Algorithm::IsolationForest,
        Algorithm::Hbos,
        Algorithm::Pca,
        Algorithm::Gaussian,
        Algorithm::Kde,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Knn => "knn",
            Algorithm::Lof => "lof",
            Algorithm::IsolationForest => "iforest",
            Algorithm::Hbos => "hbos",
            Algorithm::Pca => "pca",
            Algorithm::Gaussian => "gaussian",
            Algorithm::Kde => "kde",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigRepr {
    algorithm: Algorithm,
    params: BTreeMap<String, ParamValue>,
    contamination: f64,
    #[serde(default)]
    seed: u64,
}

/// An algorithm plus a full hyperparameter assignment.
///
/// Serialises as `{algorithm, params, contamination, seed}`; the
/// `config_id` is derived from that content and is therefore stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigRepr", into = "ConfigRepr")]
pub struct DetectorConfig {
    algorithm: Algorithm,
    params: BTreeMap<String, ParamValue>,
    contamination: f64,
    seed: u64,
    config_id: String,
}

impl From<DetectorConfig> for ConfigRepr {
    fn from(c: DetectorConfig) -> Self {
        ConfigRepr {
            algorithm: c.algorithm,
            params: c.params,
            contamination: c.contamination,
            seed: c.seed,
        }
    }
}

impl TryFrom<ConfigRepr> for DetectorConfig {
    type Error = Error;

    fn try_from(r: ConfigRepr) -> Result<Self> {
        DetectorConfig::new(r.algorithm, r.params, r.contamination, r.seed)
    }
}

impl DetectorConfig {
    pub fn new(
        algorithm: Algorithm,
        params: BTreeMap<String, ParamValue>,
        contamination: f64,
        seed: u64,
    ) -> Result<Self> {
        HyperparameterSpace::of(algorithm)
            .validate(&params)
            .map_err(Error::InvalidInput)?;
        if !(contamination > 0.0 && contamination < 0.5) {
            return Err(Error::invalid(format!("contamination {contamination} outside (0, 0.5)")));
        }
        let mut cfg = Self {
            algorithm,
            params,
            contamination,
            seed,
            config_id: String::new(),
        };
        cfg.config_id = cfg.content_id();
        Ok(cfg)
    }

    pub fn default_for(algorithm: Algorithm) -> Self {
        Self::new(
            algorithm,
            HyperparameterSpace::of(algorithm).defaults(),
            DEFAULT_CONTAMINATION,
            0,
        )
        .expect("default configuration is valid")
    }

    fn content_id(&self) -> String {
        let repr = ConfigRepr {
            algorithm: self.algorithm,
            params: self.params.clone(),
            contamination: self.contamination,
            seed: self.seed,
        };
        let json = serde_json::to_vec(&repr).expect("config serialises");
        let digest = Sha256::digest(&json);
        let hex: String = digest[..5].iter().map(|b| format!("{b:02x}")).collect();
        format!("{}-{hex}", self.algorithm)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn params(&self) -> &BTreeMap<String, ParamValue> {
        &self.params
    }

    pub fn contamination(&self) -> f64 {
        self.contamination
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config_id(&self) -> &str {
        &self.config_id
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    fn int(&self, name: &str) -> usize {
        match self.params.get(name) {
            Some(ParamValue::Int(v)) => *v as usize,
            other => panic!("validated config lacks integer '{name}': {other:?}"),
        }
    }

    fn real(&self, name: &str) -> f64 {
        match self.params.get(name) {
            Some(ParamValue::Real(v)) => *v,
            Some(ParamValue::Int(v)) => *v as f64,
            other => panic!("validated config lacks real '{name}': {other:?}"),
        }
    }

    fn cat(&self, name: &str) -> &str {
        match self.params.get(name) {
            Some(ParamValue::Cat(v)) => v,
            other => panic!("validated config lacks categorical '{name}': {other:?}"),
        }
    }

    /// Fits on normal-only rows. Rows labeled anomalous are used anyway,
    /// with a warning.
    pub fn fit(&self, train: &LabeledDataset) -> Result<TrainedDetector> {
        if train.n_anomalies() > 0 {
            warn!(
                "fitting {} on '{}' which contains {} anomalies",
                self.config_id,
                train.name(),
                train.n_anomalies()
            );
        }
        let mut det = self.fit_matrix(train.features())?;
        det.trained_on = train.name().to_owned();
        Ok(det)
    }

    pub fn fit_matrix(&self, x: ArrayView2<'_, f64>) -> Result<TrainedDetector> {
        let (n, d) = x.dim();
        if n == 0 || d == 0 {
            return Err(Error::fit(self.algorithm.as_str(), "empty training data"));
        }
        let data = canonical_rows(x);
        let model: Box<dyn ScoreModel> = match self.algorithm {
            Algorithm::Knn => Box::new(knn::Knn::fit(data, self.int("k"), self.cat("method").parse()?)?),
            Algorithm::Lof => Box::new(lof::Lof::fit(data, self.int("n_neighbors"))?),
            Algorithm::IsolationForest => Box::new(iforest::IsolationForest::fit(
                data.view(),
                self.int("n_estimators"),
                self.int("max_samples"),
                self.seed,
            )),
            Algorithm::Hbos => Box::new(hbos::Hbos::fit(data.view(), self.int("n_bins"))),
            Algorithm::Pca => Box::new(pca::Pca::fit(data.view(), self.real("retained_variance"))?),
            Algorithm::Gaussian => Box::new(gaussian::Gaussian::fit(data.view(), self.real("ridge"))?),
            Algorithm::Kde => Box::new(kde::Kde::fit(data, self.real("bandwidth"))),
        };
        let train_scores = model.training_scores();
        if train_scores.iter().any(|s| s.is_nan()) {
            return Err(Error::fit(self.algorithm.as_str(), "training scores are not finite"));
        }
        let threshold = quantile(&train_scores, 1.0 - self.contamination);
        Ok(TrainedDetector {
            config: self.clone(),
            model,
            threshold,
            dim: d,
            trained_on: String::new(),
        })
    }
}

/// Sorts rows lexicographically so every fitted statistic is independent of
/// the order the training rows arrive in.
fn canonical_rows(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    order.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b).iter())
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    x.select(Axis(0), &order)
}

/// Default configuration of every portfolio algorithm, in portfolio order.
pub fn default_configs() -> Vec<DetectorConfig> {
    Algorithm::ALL.into_iter().map(DetectorConfig::default_for).collect()
}

/// Draws a configuration: the algorithm uniformly from the portfolio unless
/// given, every parameter uniformly within its kind (log-uniform for
/// log-reals), the contamination uniformly in its range.
pub fn sample_random_config<R: Rng + ?Sized>(
    algorithm: Option<Algorithm>,
    rng: &mut R,
) -> DetectorConfig {
    let algorithm =
        algorithm.unwrap_or_else(|| Algorithm::ALL[rng.random_range(0..Algorithm::ALL.len())]);
    let params = HyperparameterSpace::of(algorithm).sample(rng);
    let (lo, hi) = CONTAMINATION_RANGE;
    let contamination = rng.random_range(lo..=hi);
    let seed = rng.random::<u64>();
    DetectorConfig::new(algorithm, params, contamination, seed).expect("sampled config is valid")
}

/// Algorithm-specific fitted state.
pub(crate) trait ScoreModel: Send + Sync + fmt::Debug {
    fn score(&self, x: &[f64]) -> f64;
    /// Scores of the training rows used for threshold calibration.
    fn training_scores(&self) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Normal,
    Anomaly,
}

/// A binary normal/anomaly decision over points of a fixed dimension.
///
/// Implemented by [`TrainedDetector`]; test doubles implement it to drive
/// the feature computations with known behaviour.
pub trait NormalityClassifier: Send + Sync {
    fn dim(&self) -> usize;
    /// Caller guarantees `x.len() == self.dim()`.
    fn is_anomaly(&self, x: &[f64]) -> bool;
}

/// Something that fits a [`NormalityClassifier`] on normal-only rows.
pub trait DetectorFactory: Send + Sync {
    type Detector: NormalityClassifier;

    fn id(&self) -> &str;
    fn fit(&self, train: ArrayView2<'_, f64>) -> Result<Self::Detector>;
}

impl DetectorFactory for DetectorConfig {
    type Detector = TrainedDetector;

    fn id(&self) -> &str {
        self.config_id()
    }

    fn fit(&self, train: ArrayView2<'_, f64>) -> Result<TrainedDetector> {
        self.fit_matrix(train)
    }
}

/// A fitted detector with its calibrated decision threshold.
#[derive(Debug)]
pub struct TrainedDetector {
    config: DetectorConfig,
    model: Box<dyn ScoreModel>,
    threshold: f64,
    dim: usize,
    trained_on: String,
}

impl TrainedDetector {
    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn trained_on(&self) -> &str {
        &self.trained_on
    }

    /// Same model with another threshold.
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.model.score(x))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        Ok(if self.score(x)? > self.threshold {
            Prediction::Anomaly
        } else {
            Prediction::Normal
        })
    }

    pub fn training_scores(&self) -> Vec<f64> {
        self.model.training_scores()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }
}

impl NormalityClassifier for TrainedDetector {
    fn dim(&self) -> usize {
        self.dim
    }

    fn is_anomaly(&self, x: &[f64]) -> bool {
        self.model.score(x) > self.threshold
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// One row of a standard-layout matrix as a slice.
pub(crate) fn row(x: &Array2<f64>, i: usize) -> &[f64] {
    let d = x.ncols();
    &x.as_slice().expect("standard layout")[i * d..(i + 1) * d]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    pub(crate) fn gaussian_sample(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng_from_seed(seed);
        Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn default_configs_are_complete() {
        let defaults = default_configs();
        assert_eq!(defaults.len(), Algorithm::ALL.len());
        let mut ids: Vec<&str> = defaults.iter().map(|c| c.config_id()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), defaults.len());
        for c in &defaults {
            HyperparameterSpace::of(c.algorithm()).validate(c.params()).unwrap();
        }
        assert_eq!(default_configs(), defaults);
    }

    #[test]
    fn random_config_is_seeded() {
        let a = sample_random_config(None, &mut rng_from_seed(4));
        let b = sample_random_config(None, &mut rng_from_seed(4));
        assert_eq!(a, b);
        let c = sample_random_config(Some(Algorithm::Kde), &mut rng_from_seed(4));
        assert_eq!(c.algorithm(), Algorithm::Kde);
        let (lo, hi) = CONTAMINATION_RANGE;
        assert!((lo..=hi).contains(&c.contamination()));
    }

    #[test]
    fn config_json_round_trip() {
        let c = sample_random_config(None, &mut rng_from_seed(8));
        let back = DetectorConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.config_id(), c.config_id());
        let bad = r#"{"algorithm":"knn","params":{"k":0,"method":"largest"},"contamination":0.1,"seed":1}"#;
        assert!(DetectorConfig::from_json(bad).is_err());
        let bad = r#"{"algorithm":"knn","params":{"k":3,"method":"largest"},"contamination":0.6}"#;
        assert!(DetectorConfig::from_json(bad).is_err());
    }

    #[test]
    fn calibration_bound_for_every_algorithm() {
        let x = gaussian_sample(120, 3, 21);
        let mut rng = rng_from_seed(3);
        for alg in Algorithm::ALL {
            for _ in 0..4 {
                let cfg = sample_random_config(Some(alg), &mut rng);
                let Ok(det) = cfg.fit_matrix(x.view()) else { continue };
                let n = x.nrows() as f64;
                let flagged = det.training_scores().iter().filter(|&&s| s > det.threshold()).count();
                assert!(
                    flagged as f64 / n <= cfg.contamination() + 1.0 / n + 1e-12,
                    "{}: {flagged} flagged",
                    cfg.config_id()
                );
            }
        }
    }

    #[test]
    fn approximately_contamination_flagged() {
        let x = gaussian_sample(200, 2, 2);
        let cfg = DetectorConfig::default_for(Algorithm::Gaussian);
        let det = cfg.fit_matrix(x.view()).unwrap();
        let flagged = (0..x.nrows())
            .filter(|&i| det.predict(x.row(i).as_slice().unwrap()).unwrap() == Prediction::Anomaly)
            .count();
        assert!((flagged as f64 - 20.0).abs() <= 1.0, "{flagged}");
    }

    #[test]
    fn fit_is_deterministic_and_order_free() {
        let x = gaussian_sample(80, 2, 9);
        let mut rev = x.clone();
        rev.invert_axis(Axis(0));
        let rev = rev.as_standard_layout().to_owned();
        let probes = gaussian_sample(50, 2, 10);
        let mut rng = rng_from_seed(1);
        for alg in Algorithm::ALL {
            let cfg = sample_random_config(Some(alg), &mut rng);
            let (Ok(a), Ok(b)) = (cfg.fit_matrix(x.view()), cfg.fit_matrix(rev.view())) else {
                continue;
            };
            assert_eq!(a.threshold(), b.threshold(), "{alg}");
            for p in probes.rows() {
                let p = p.as_slice().unwrap();
                assert_eq!(a.score(p).unwrap(), b.score(p).unwrap(), "{alg}");
            }
        }
    }

    #[test]
    fn threshold_monotonicity_and_limit() {
        let x = gaussian_sample(60, 2, 4);
        let det = DetectorConfig::default_for(Algorithm::Knn).fit_matrix(x.view()).unwrap();
        let probes = gaussian_sample(100, 2, 5) * 3.0;
        let t = det.threshold();
        let raised = DetectorConfig::default_for(Algorithm::Knn)
            .fit_matrix(x.view())
            .unwrap()
            .with_threshold(t * 1.5);
        for p in probes.rows() {
            let p = p.as_slice().unwrap();
            if det.predict(p).unwrap() == Prediction::Normal {
                assert_eq!(raised.predict(p).unwrap(), Prediction::Normal);
            }
        }
        let never = det.with_threshold(f64::INFINITY);
        assert!(probes
            .rows()
            .into_iter()
            .all(|p| never.predict(p.as_slice().unwrap()).unwrap() == Prediction::Normal));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let x = gaussian_sample(30, 2, 4);
        for cfg in default_configs() {
            let Ok(det) = cfg.fit_matrix(x.view()) else { continue };
            assert!(matches!(det.score(&[0.0; 3]), Err(Error::DimensionMismatch { .. })));
            assert!(det.predict(&[0.0]).is_err());
        }
    }
}

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::dataset::{AssimilationParams, DEFAULT_LABEL_COLUMN};
use crate::error::{Error, Result};
use crate::features::FeatureSettings;
use crate::hypervolume::{DEFAULT_EPSILON, DEFAULT_SAMPLES};
use crate::metamodel::ForestParams;
use crate::ranking::{EvaluationSettings, CHERRY_PICK_THRESHOLD, RANDOM_REPETITIONS};

/// Everything that determines a run's artifacts, read from a TOML file and
/// adjusted by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// CSV paths, or `builtin:<task>` for bundled tasks.
    pub datasets: Vec<String>,
    pub label_column: String,
    pub seed: u64,
    pub splits: [f64; 3],
    pub outlier_band: [f64; 2],
    pub hv_samples: usize,
    pub ball_epsilon: f64,
    pub mc_cv: McCvConfig,
    pub n_detectors: usize,
    pub budgets: Budgets,
    pub forest_trees: usize,
    pub cherry_pick_threshold: f64,
    pub random_repetitions: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McCvConfig {
    pub test_fraction: f64,
    pub repetitions: usize,
}

/// Seconds; 0 disables the limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub landmark_timeout_secs: f64,
    pub detector_timeout_secs: f64,
    pub retries: usize,
}

impl Default for McCvConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.3,
            repetitions: 10,
        }
    }
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            landmark_timeout_secs: 300.0,
            detector_timeout_secs: 300.0,
            retries: 10,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            label_column: DEFAULT_LABEL_COLUMN.to_owned(),
            seed: 0,
            splits: [0.7, 0.2, 0.1],
            outlier_band: [0.05, 0.10],
            hv_samples: DEFAULT_SAMPLES,
            ball_epsilon: DEFAULT_EPSILON,
            mc_cv: McCvConfig::default(),
            n_detectors: 50,
            budgets: Budgets::default(),
            forest_trees: 100,
            cherry_pick_threshold: CHERRY_PICK_THRESHOLD,
            random_repetitions: RANDOM_REPETITIONS,
            out: PathBuf::from("adsel-out"),
        }
    }
}

fn budget(secs: f64) -> Option<Duration> {
    (secs > 0.0).then(|| Duration::from_secs_f64(secs))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.splits.iter().any(|f| !(0.0..=1.0).contains(f)) || (self.splits.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("splits {:?} must be fractions summing to 1", self.splits));
        }
        if self.splits[0] == 0.0 || self.splits[1] == 0.0 {
            return bad("train and test fractions must be positive".into());
        }
        let [lo, hi] = self.outlier_band;
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return bad(format!("outlier band [{lo}, {hi}] must satisfy 0 < lo <= hi < 1"));
        }
        if !(self.mc_cv.test_fraction > 0.0 && self.mc_cv.test_fraction < 1.0) {
            return bad(format!("mc_cv.test_fraction {} outside (0, 1)", self.mc_cv.test_fraction));
        }
        if !(self.ball_epsilon > 0.0) {
            return bad(format!("ball_epsilon {} must be positive", self.ball_epsilon));
        }
        for (name, v) in [
            ("hv_samples", self.hv_samples),
            ("mc_cv.repetitions", self.mc_cv.repetitions),
            ("n_detectors", self.n_detectors),
            ("forest_trees", self.forest_trees),
            ("random_repetitions", self.random_repetitions),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.budgets.landmark_timeout_secs < 0.0 || self.budgets.detector_timeout_secs < 0.0 {
            return bad("timeouts must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.cherry_pick_threshold) {
            return bad(format!("cherry_pick_threshold {} outside [0, 1]", self.cherry_pick_threshold));
        }
        Ok(())
    }

    pub fn assimilation(&self) -> AssimilationParams {
        AssimilationParams {
            outlier_band: (self.outlier_band[0], self.outlier_band[1]),
            fractions: self.splits,
        }
    }

    pub fn features(&self) -> FeatureSettings {
        FeatureSettings {
            hv_samples: self.hv_samples,
            ball_epsilon: self.ball_epsilon,
            fpr_test_fraction: self.mc_cv.test_fraction,
            fpr_repetitions: self.mc_cv.repetitions,
            landmark_budget: budget(self.budgets.landmark_timeout_secs),
            detector_budget: budget(self.budgets.detector_timeout_secs),
            max_replacements: self.budgets.retries,
        }
    }

    pub fn evaluation(&self) -> EvaluationSettings {
        EvaluationSettings {
            seed: self.seed,
            forest: ForestParams {
                n_trees: self.forest_trees,
                ..ForestParams::default()
            },
            cherry_pick_threshold: self.cherry_pick_threshold,
            random_repetitions: self.random_repetitions,
        }
    }
}

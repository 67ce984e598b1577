//! Bundled one-class tasks derived from small public multivariate datasets
//! (iris, wine and breast cancer from the UCI repository, 8 features or
//! fewer). In each task one class is normal and every other class is
//! anomalous.

use ndarray::Axis;

use crate::dataset::{read_csv, LabeledDataset};
use crate::error::{Error, Result};

const IRIS: &str = include_str!("../data/iris.csv");
const WINE: &str = include_str!("../data/wine.csv");
const BREAST_CANCER: &str = include_str!("../data/breast_cancer.csv");

/// Prefix that marks a bundled task where a file path is expected.
pub const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusTask {
    pub name: &'static str,
    source: &'static str,
    normal_class: u8,
}

pub const TASKS: [CorpusTask; 8] = [
    CorpusTask { name: "iris-setosa", source: IRIS, normal_class: 0 },
    CorpusTask { name: "iris-versicolor", source: IRIS, normal_class: 1 },
    CorpusTask { name: "iris-virginica", source: IRIS, normal_class: 2 },
    CorpusTask { name: "wine-0", source: WINE, normal_class: 0 },
    CorpusTask { name: "wine-1", source: WINE, normal_class: 1 },
    CorpusTask { name: "wine-2", source: WINE, normal_class: 2 },
    CorpusTask { name: "cancer-malignant", source: BREAST_CANCER, normal_class: 0 },
    CorpusTask { name: "cancer-benign", source: BREAST_CANCER, normal_class: 1 },
];

/// The three small iris tasks.
pub const TOY_TASKS: [&str; 3] = ["iris-setosa", "iris-versicolor", "iris-virginica"];

pub fn task_names() -> Vec<&'static str> {
    TASKS.iter().map(|t| t.name).collect()
}

impl CorpusTask {
    /// Rows of `normal_class` get label 0, all others label 1.
    pub fn load(&self) -> Result<LabeledDataset> {
        let raw = read_csv(self.source.as_bytes(), self.name, None)?;
        let class_col = raw
            .feature_names()
            .iter()
            .position(|c| c == "class")
            .expect("bundled data has a class column");
        let labels = raw
            .features()
            .column(class_col)
            .iter()
            .map(|&c| u8::from(c != f64::from(self.normal_class)))
            .collect();
        let keep: Vec<usize> = (0..raw.n_features()).filter(|&j| j != class_col).collect();
        let names = keep.iter().map(|&j| raw.feature_names()[j].clone()).collect();
        LabeledDataset::new(self.name, raw.features().select(Axis(1), &keep), labels, Some(names))
    }
}

pub fn task(name: &str) -> Result<&'static CorpusTask> {
    TASKS
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| Error::invalid(format!("unknown bundled task '{name}' (known: {})", task_names().join(", "))))
}

pub fn load(name: &str) -> Result<LabeledDataset> {
    task(name)?.load()
}

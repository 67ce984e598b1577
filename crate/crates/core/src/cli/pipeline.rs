use std::fs;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::corpus::{self, BUILTIN_PREFIX};
use crate::dataset::{apply_scaler, assimilate, fit_robust_scaler, load_csv_unlabeled, LabeledDataset, SplitManifest};
use crate::detectors::{sample_random_config, DetectorConfig};
use crate::error::{Error, Result};
use crate::features::{
    assemble_meta_dataset, build_detector_instance, build_landmarks, detector_features, train_ball, Deadline,
    DetectorFragment, LandmarkVector, MetaDataset, MetaInstance, DETECTOR_FPR, DETECTOR_HV,
};
use crate::hypervolume::EnclosingBall;
use crate::metamodel::MetaModel;
use crate::ranking::{lc_score, Method, Ranking};
use crate::rng::{derive_seed, derive_seed_str, rng_from_seed};

pub const SPLIT_FILE: &str = "split.json";
pub const LANDMARK_FILE: &str = "landmarks.csv";
pub const DETECTOR_FILE: &str = "detectors.csv";
pub const META_FILE: &str = "meta.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Loads `builtin:<task>` or a CSV path. A file without the label column is
/// treated as all-normal.
pub fn load_dataset(spec: &str, label_column: &str) -> Result<LabeledDataset> {
    match spec.strip_prefix(BUILTIN_PREFIX) {
        Some(name) => corpus::load(name),
        None => load_csv_unlabeled(spec, label_column),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the dataset content together with every setting that affects
/// its artifacts.
pub fn input_hash(data: &LabeledDataset, cfg: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(data.name().as_bytes());
    for v in data.features().iter() {
        h.update(v.to_le_bytes());
    }
    h.update(data.labels());
    let relevant = RunConfig {
        datasets: Vec::new(),
        out: Default::default(),
        forest_trees: 0,
        cherry_pick_threshold: 0.0,
        random_repetitions: 0,
        ..cfg.clone()
    };
    h.update(serde_json::to_vec(&relevant).expect("config serialises"));
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset: String,
    pub input_hash: String,
    pub n_instances: usize,
    pub failed_slots: usize,
    pub landmarks_absent: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct AssimilationOutput {
    pub split: SplitManifest,
    pub landmarks: LandmarkVector,
    pub fragments: Vec<DetectorFragment>,
    pub meta: MetaDataset,
    pub failed_slots: usize,
}

/// Builds one dataset's meta-instances: split, landmarks and
/// `cfg.n_detectors` random detectors. Seeds derive from the master seed
/// and the dataset name only.
pub fn assimilate_dataset(data: &LabeledDataset, cfg: &RunConfig) -> Result<AssimilationOutput> {
    let seed = derive_seed_str(cfg.seed, data.name());
    let settings = cfg.features();
    let split = assimilate(data, &cfg.assimilation(), derive_seed(seed, 1))?;
    let ball = train_ball(&split.train, &settings)?;
    let landmarks = build_landmarks(&split.train, &ball, &settings, derive_seed(seed, 2));

    let mut rng = rng_from_seed(derive_seed(seed, 3));
    let configs: Vec<DetectorConfig> = (0..cfg.n_detectors).map(|_| sample_random_config(None, &mut rng)).collect();
    let slot_seed = derive_seed(seed, 4);
    let results: Vec<Result<DetectorFragment>> = configs
        .into_par_iter()
        .enumerate()
        .map(|(i, c)| build_detector_instance(&split, &ball, c, &settings, derive_seed(slot_seed, i as u64)))
        .collect();
    let mut fragments = Vec::with_capacity(results.len());
    let mut failed_slots = 0;
    for r in results {
        match r {
            Ok(f) => fragments.push(f),
            Err(e) => {
                warn!("dataset '{}': {e}", data.name());
                failed_slots += 1;
            }
        }
    }
    if fragments.is_empty() {
        return Err(Error::invalid(format!("dataset '{}': every detector slot failed", data.name())));
    }
    let meta = assemble_meta_dataset(std::slice::from_ref(&landmarks), &fragments)?;
    Ok(AssimilationOutput {
        split: split.manifest(),
        landmarks,
        fragments,
        meta,
        failed_slots,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes the artifacts of one dataset; the manifest goes last and marks
/// the directory complete.
pub fn write_assimilation(dir: &Path, out: &AssimilationOutput, input_hash: &str) -> Result<DatasetManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut split = serde_json::to_vec_pretty(&out.split)?;
    split.push(b'\n');
    write_file(&dir.join(SPLIT_FILE), &split)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["landmark", "hypervolume", "fpr"])?;
    for (name, v) in out.landmarks.names.iter().zip(&out.landmarks.values) {
        w.write_record([name.clone(), cell(v.map(|p| p.hypervolume)), cell(v.map(|p| p.fpr))])?;
    }
    write_file(&dir.join(LANDMARK_FILE), &w.into_inner().map_err(|e| Error::invalid(e.to_string()))?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["config_id", "config", "hypervolume", "fpr", "mcc", "target_scaled_mcc", "replaced"])?;
    for f in &out.fragments {
        w.write_record([
            f.features.config_id.clone(),
            f.config.as_ref().map(DetectorConfig::to_json).unwrap_or_default(),
            f.features.hypervolume.to_string(),
            f.features.fpr.to_string(),
            f.mcc.to_string(),
            f.target_scaled_mcc.to_string(),
            f.replaced.to_string(),
        ])?;
    }
    write_file(&dir.join(DETECTOR_FILE), &w.into_inner().map_err(|e| Error::invalid(e.to_string()))?)?;

    let mut meta = Vec::new();
    out.meta.write_csv(&mut meta)?;
    write_file(&dir.join(META_FILE), &meta)?;

    let manifest = DatasetManifest {
        dataset: out.split.dataset.clone(),
        input_hash: input_hash.to_owned(),
        n_instances: out.meta.len(),
        failed_slots: out.failed_slots,
        landmarks_absent: out
            .landmarks
            .names
            .iter()
            .zip(&out.landmarks.values)
            .filter(|(_, v)| v.is_none())
            .map(|(n, _)| n.clone())
            .collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    write_file(&dir.join(MANIFEST_FILE), &bytes)?;
    Ok(manifest)
}

/// The stored manifest, when it matches `input_hash` and the meta file exists.
pub fn completed(dir: &Path, input_hash: &str) -> Option<DatasetManifest> {
    let bytes = fs::read(dir.join(MANIFEST_FILE)).ok()?;
    let m: DatasetManifest = serde_json::from_slice(&bytes).ok()?;
    (m.input_hash == input_hash && dir.join(META_FILE).is_file()).then_some(m)
}

pub fn read_meta(path: &Path) -> Result<MetaDataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    MetaDataset::read_csv(file)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RankMethod {
    Linear,
    Meta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub rank: usize,
    pub config: DetectorConfig,
    /// Predicted scaled MCC (meta) or linear score.
    pub score: f64,
    pub hypervolume: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationResult {
    pub dataset: String,
    pub method: RankMethod,
    /// `"linear"` or the SHA-256 of the model file.
    pub provenance: String,
    pub seed: u64,
    pub ranking: Vec<Recommendation>,
}

/// Candidate with measured detector features.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub config: DetectorConfig,
    pub hypervolume: f64,
    pub fpr: f64,
}

/// Orders candidates by the linear score, or by meta-model predictions
/// given per candidate.
pub fn rank_candidates(candidates: Vec<Candidate>, scores: Option<Vec<f64>>) -> Result<Vec<Recommendation>> {
    let (method, scores) = match scores {
        Some(s) => (Method::M, s),
        None => (
            Method::L,
            candidates
                .iter()
                .map(|c| lc_score(c.hypervolume, c.fpr))
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    let ids: Vec<String> = candidates.iter().map(|c| c.config.config_id().to_owned()).collect();
    let ranking = Ranking::from_scores(method, &ids, &scores)?;
    Ok(ranking
        .entries
        .iter()
        .enumerate()
        .map(|(pos, e)| {
            let c = &candidates[e.index];
            Recommendation {
                rank: pos + 1,
                config: c.config.clone(),
                score: e.score,
                hypervolume: c.hypervolume,
                fpr: c.fpr,
            }
        })
        .collect())
}

/// Normal rows only (labeled anomalies are dropped with a warning), robustly
/// scaled on themselves, plus their enclosing ball.
pub fn prepare_normal(data: &LabeledDataset, cfg: &RunConfig) -> Result<(LabeledDataset, EnclosingBall)> {
    if data.n_anomalies() > 0 {
        warn!(
            "dataset '{}': ignoring {} rows labeled anomalous",
            data.name(),
            data.n_anomalies()
        );
    }
    if data.n_normals() == 0 {
        return Err(Error::invalid(format!("dataset '{}' has no normal rows", data.name())));
    }
    let normal = data.normals();
    let scaled = apply_scaler(&fit_robust_scaler(&normal)?, &normal)?;
    let ball = train_ball(&scaled, &cfg.features())?;
    Ok((scaled, ball))
}

/// Samples `n` random configurations, measures their detector features on
/// the dataset and ranks them.
pub fn recommend(
    data: &LabeledDataset,
    cfg: &RunConfig,
    method: RankMethod,
    model: Option<(&MetaModel, String)>,
    n: usize,
) -> Result<RecommendationResult> {
    let (train, ball) = prepare_normal(data, cfg)?;
    let settings = cfg.features();
    let seed = derive_seed_str(cfg.seed, data.name());
    let mut rng = rng_from_seed(derive_seed(seed, 3));
    let configs: Vec<DetectorConfig> = (0..n).map(|_| sample_random_config(None, &mut rng)).collect();
    let feature_seed = derive_seed(seed, 4);
    let candidates: Vec<Candidate> = configs
        .into_par_iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let deadline = Deadline::after(settings.detector_budget);
            match detector_features(&c, train.features(), &ball, &settings, derive_seed(feature_seed, i as u64), &deadline) {
                Ok((f, _)) => Some(Candidate {
                    config: c,
                    hypervolume: f.hypervolume,
                    fpr: f.fpr,
                }),
                Err(e) => {
                    warn!("candidate {} dropped: {e}", c.config_id());
                    None
                }
            }
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate detector could be evaluated"));
    }
    info!("dataset '{}': {} candidates evaluated", data.name(), candidates.len());

    let (scores, provenance) = match (method, model) {
        (RankMethod::Linear, _) => (None, "linear".to_owned()),
        (RankMethod::Meta, None) => return Err(Error::Model("method 'meta' needs a model".into())),
        (RankMethod::Meta, Some((model, hash))) => {
            let landmarks = build_landmarks(&train, &ball, &settings, derive_seed(seed, 2));
            let mut columns = landmarks.column_names();
            columns.push(DETECTOR_HV.to_owned());
            columns.push(DETECTOR_FPR.to_owned());
            let rows = candidates
                .iter()
                .map(|c| {
                    let mut values = landmarks.flat();
                    values.push(Some(c.hypervolume));
                    values.push(Some(c.fpr));
                    MetaInstance {
                        dataset_id: data.name().to_owned(),
                        config_id: c.config.config_id().to_owned(),
                        values,
                        target: f64::NAN,
                    }
                })
                .collect();
            let preds = model.predict(&MetaDataset { columns, rows })?;
            (Some(preds), hash)
        }
    };
    Ok(RecommendationResult {
        dataset: data.name().to_owned(),
        method,
        provenance,
        seed: cfg.seed,
        ranking: rank_candidates(candidates, scores)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::Algorithm;

    #[test]
    fn linear_ranks_lower_hv_and_fpr_first() {
        let cand = |alg, hv, fpr| Candidate {
            config: DetectorConfig::default_for(alg),
            hypervolume: hv,
            fpr,
        };
        let ranked = rank_candidates(
            vec![cand(Algorithm::Knn, 0.2, 0.1), cand(Algorithm::Lof, 0.8, 0.3)],
            None,
        )
        .unwrap();
        assert_eq!(ranked[0].config.algorithm(), Algorithm::Knn);
        assert!((ranked[0].score - 0.85).abs() < 1e-12);
        assert!((ranked[1].score - 0.45).abs() < 1e-12);
        assert_eq!(ranked[1].rank, 2);
    }

    #[test]
    fn builtin_and_hash() {
        let d = load_dataset("builtin:iris-setosa", "label").unwrap();
        let cfg = RunConfig::default();
        let h = input_hash(&d, &cfg);
        assert_eq!(h, input_hash(&d, &cfg));
        let other = RunConfig { seed: 1, ..cfg.clone() };
        assert_ne!(h, input_hash(&d, &other));
        let different_out = RunConfig { out: "elsewhere".into(), ..cfg };
        assert_eq!(h, input_hash(&d, &different_out));
        assert!(load_dataset("builtin:nope", "label").is_err());
    }
}

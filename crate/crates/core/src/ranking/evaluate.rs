use std::io::Write;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    kendall_tau_b, lc_score, ndcg, positional_scores, random_order, regret_at_k, Method, Ranking,
};
use crate::error::{Error, Result};
use crate::features::{MetaDataset, DETECTOR_FPR, DETECTOR_HV};
use crate::metamodel::{drop_empty_landmarks, ForestParams, MetaModel};
use crate::rng::{derive_seed_str, rng_from_seed};
use crate::stats;

/// Datasets whose mean scaled MCC reaches this value are cherry-pick eligible.
pub const CHERRY_PICK_THRESHOLD: f64 = 0.6;
pub const RANDOM_REPETITIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSettings {
    pub seed: u64,
    pub forest: ForestParams,
    pub cherry_pick_threshold: f64,
    pub random_repetitions: usize,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            forest: ForestParams::default(),
            cherry_pick_threshold: CHERRY_PICK_THRESHOLD,
            random_repetitions: RANDOM_REPETITIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub regret_at_1: f64,
    pub regret_at_5: f64,
    pub ndcg: f64,
    pub tau_b: f64,
}

impl MethodMetrics {
    /// Scores a ranking against `truth`; `scores` feed the rank correlation
    /// so that tied predictions count as ties.
    pub fn of(order: &[usize], scores: &[f64], truth: &[f64]) -> Result<Self> {
        let n = truth.len();
        let tau_input: Vec<f64> = scores
            .iter()
            .map(|&s| if s.is_nan() { f64::NEG_INFINITY } else { s })
            .collect();
        Ok(Self {
            regret_at_1: regret_at_k(order, truth, 1)?,
            regret_at_5: regret_at_k(order, truth, 5.min(n))?,
            ndcg: ndcg(order, truth)?,
            tau_b: kendall_tau_b(&tau_input, truth)?,
        })
    }

    fn values(&self) -> [f64; 4] {
        [self.regret_at_1, self.regret_at_5, self.ndcg, self.tau_b]
    }

    fn mean_of(items: &[MethodMetrics]) -> Self {
        let k = items.len() as f64;
        let sum = |f: fn(&MethodMetrics) -> f64| items.iter().map(f).sum::<f64>() / k;
        Self {
            regret_at_1: sum(|m| m.regret_at_1),
            regret_at_5: sum(|m| m.regret_at_5),
            ndcg: sum(|m| m.ndcg),
            tau_b: sum(|m| m.tau_b),
        }
    }
}

/// Max, mean and min of the candidates' true scaled MCC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MccSummary {
    pub max: f64,
    pub mean: f64,
    pub min: f64,
}

impl MccSummary {
    fn of(truth: &[f64]) -> Self {
        Self {
            max: truth.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: stats::mean(truth),
            min: truth.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

/// Evaluation of one held-out dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub dataset_id: String,
    pub n_candidates: usize,
    pub mcc: MccSummary,
    pub cherry_pick_eligible: bool,
    #[serde(rename = "R")]
    pub random: MethodMetrics,
    #[serde(rename = "FPR")]
    pub fpr: MethodMetrics,
    #[serde(rename = "HV")]
    pub hv: MethodMetrics,
    #[serde(rename = "L")]
    pub linear: MethodMetrics,
    #[serde(rename = "M")]
    pub meta: MethodMetrics,
    /// Meta-model trained on the other eligible datasets only.
    #[serde(rename = "Mc")]
    pub cherry_picked: Option<MethodMetrics>,
    /// Rank correlation between detector hypervolume and FPR.
    pub spearman_hv_fpr: f64,
    /// Config ids in the meta-model's predicted order.
    pub meta_ranking: Vec<String>,
}

impl RankingReport {
    /// Values in table column order; see [`table_columns`].
    pub fn cells(&self) -> Vec<Option<f64>> {
        let methods = [
            Some(self.random),
            Some(self.fpr),
            Some(self.hv),
            Some(self.linear),
            Some(self.meta),
            self.cherry_picked,
        ];
        let mut cells = vec![Some(self.mcc.max), Some(self.mcc.mean), Some(self.mcc.min)];
        for metric in 0..4 {
            cells.extend(methods.iter().map(|m| m.map(|m| m.values()[metric])));
        }
        cells
    }
}

pub const TABLE_METHODS: [&str; 6] = ["R", "FPR", "HV", "L", "M", "Mc"];
const TABLE_METRICS: [&str; 4] = ["regret1", "regret5", "ndcg", "tau_b"];

/// Column names after `dataset`: scaled MCC summary, then each metric for
/// every method.
pub fn table_columns() -> Vec<String> {
    let mut cols = vec!["mcc_max".to_owned(), "mcc_mean".to_owned(), "mcc_min".to_owned()];
    for metric in TABLE_METRICS {
        cols.extend(TABLE_METHODS.iter().map(|m| format!("{metric}_{m}")));
    }
    cols
}

/// Column-wise statistic over the reports; `None` when no report has a value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub label: String,
    pub cells: Vec<Option<f64>>,
}

impl AggregateRow {
    fn over(label: &str, reports: &[RankingReport], stat: fn(&[f64]) -> f64) -> Self {
        let rows: Vec<Vec<Option<f64>>> = reports.iter().map(RankingReport::cells).collect();
        let cells = (0..table_columns().len())
            .map(|j| {
                let present: Vec<f64> = rows.iter().filter_map(|r| r[j]).collect();
                (!present.is_empty()).then(|| stat(&present))
            })
            .collect();
        Self {
            label: label.to_owned(),
            cells,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationOutcome {
    pub settings: EvaluationSettings,
    pub columns: Vec<String>,
    pub reports: Vec<RankingReport>,
    pub mean: AggregateRow,
    pub median: AggregateRow,
}

struct Heldout<'a> {
    id: String,
    data: &'a MetaDataset,
    truth: Vec<f64>,
    eligible: bool,
}

/// Leave-one-out evaluation: each dataset in turn is the meta-test set and
/// the merge of the others is the meta-train set. Held-out datasets run in
/// parallel; every random stream is derived from the master seed and the
/// dataset id.
pub fn leave_one_out_evaluate(
    meta_datasets: &[MetaDataset],
    settings: &EvaluationSettings,
) -> Result<EvaluationOutcome> {
    if meta_datasets.len() < 2 {
        return Err(Error::invalid(format!(
            "leave-one-out evaluation needs at least 2 meta-datasets, got {}",
            meta_datasets.len()
        )));
    }
    let mut held = Vec::with_capacity(meta_datasets.len());
    for data in meta_datasets {
        let ids = data.dataset_ids();
        let [id] = ids.as_slice() else {
            return Err(Error::invalid(format!(
                "each meta-dataset must hold exactly one base dataset, found {ids:?}"
            )));
        };
        if data.len() < 2 {
            return Err(Error::invalid(format!("meta-dataset '{id}' has fewer than 2 detectors")));
        }
        let truth: Vec<f64> = data.rows.iter().map(|r| r.target).collect();
        let eligible = stats::mean(&truth) >= settings.cherry_pick_threshold;
        held.push(Heldout {
            id: id.clone(),
            data,
            truth,
            eligible,
        });
    }
    if let Some(dup) = held.iter().enumerate().find(|(i, h)| held[..*i].iter().any(|o| o.id == h.id)) {
        return Err(Error::invalid(format!("dataset '{}' appears twice", dup.1.id)));
    }
    let n_eligible = held.iter().filter(|h| h.eligible).count();
    if n_eligible == 1 {
        warn!("only one cherry-pick eligible dataset; Mc left empty");
    }

    let reports = (0..held.len())
        .into_par_iter()
        .map(|i| evaluate_one(&held, i, settings, n_eligible))
        .collect::<Result<Vec<_>>>()?;
    let mean = AggregateRow::over("mean", &reports, stats::mean);
    let median = AggregateRow::over("median", &reports, stats::median);
    Ok(EvaluationOutcome {
        settings: *settings,
        columns: table_columns(),
        reports,
        mean,
        median,
    })
}

fn evaluate_one(
    held: &[Heldout<'_>],
    i: usize,
    settings: &EvaluationSettings,
    n_eligible: usize,
) -> Result<RankingReport> {
    let test = held[i].data;
    let truth = &held[i].truth;
    let id = &held[i].id;
    let config_ids: Vec<String> = test.rows.iter().map(|r| r.config_id.clone()).collect();

    let feature = |name: &str| -> Result<Vec<f64>> {
        let j = test
            .column_index(name)
            .ok_or_else(|| Error::invalid(format!("meta-dataset '{id}' lacks column '{name}'")))?;
        Ok(test.rows.iter().map(|r| r.values[j].unwrap_or(f64::NAN)).collect())
    };
    let hv = feature(DETECTOR_HV)?;
    let fpr = feature(DETECTOR_FPR)?;
    let lc: Vec<f64> = hv
        .iter()
        .zip(&fpr)
        .map(|(&h, &f)| lc_score(h, f).unwrap_or(f64::NAN))
        .collect();
    let inv = |v: &[f64]| v.iter().map(|x| 1.0 - x).collect::<Vec<f64>>();

    let metrics_for = |method: Method, scores: &[f64]| -> Result<MethodMetrics> {
        let ranking = Ranking::from_scores(method, &config_ids, scores)?;
        MethodMetrics::of(&ranking.order(), scores, truth)
    };

    let seed = derive_seed_str(settings.seed, id);
    let mut rng = rng_from_seed(derive_seed_str(seed, "random-baseline"));
    let random_runs = (0..settings.random_repetitions.max(1))
        .map(|_| {
            let order = random_order(truth.len(), &mut rng);
            MethodMetrics::of(&order, &positional_scores(&order), truth)
        })
        .collect::<Result<Vec<_>>>()?;

    let others: Vec<&MetaDataset> = held.iter().filter(|h| h.id != *id).map(|h| h.data).collect();
    let meta_scores = meta_predictions(&others, test, settings.forest, derive_seed_str(seed, "meta"))?;
    let meta_ranking = Ranking::from_scores(Method::M, &config_ids, &meta_scores)?;

    let cherry_picked = if held[i].eligible && n_eligible >= 2 {
        let eligible: Vec<&MetaDataset> = held
            .iter()
            .filter(|h| h.eligible && h.id != *id)
            .map(|h| h.data)
            .collect();
        let scores = meta_predictions(&eligible, test, settings.forest, derive_seed_str(seed, "meta-cherry"))?;
        Some(metrics_for(Method::M, &scores)?)
    } else {
        None
    };

    let report = RankingReport {
        dataset_id: id.clone(),
        n_candidates: truth.len(),
        mcc: MccSummary::of(truth),
        cherry_pick_eligible: held[i].eligible,
        random: MethodMetrics::mean_of(&random_runs),
        fpr: metrics_for(Method::Fpr, &inv(&fpr))?,
        hv: metrics_for(Method::Hv, &inv(&hv))?,
        linear: metrics_for(Method::L, &lc)?,
        meta: MethodMetrics::of(&meta_ranking.order(), &meta_scores, truth)?,
        cherry_picked,
        spearman_hv_fpr: stats::spearman(&hv, &fpr),
        meta_ranking: meta_ranking.entries.iter().map(|e| e.config_id.clone()).collect(),
    };
    info!(
        "held out '{id}': L tau_b {:.3}, M tau_b {:.3}, R tau_b {:.3}",
        report.linear.tau_b, report.meta.tau_b, report.random.tau_b
    );
    Ok(report)
}

fn meta_predictions(
    train_parts: &[&MetaDataset],
    test: &MetaDataset,
    forest: ForestParams,
    seed: u64,
) -> Result<Vec<f64>> {
    let owned: Vec<MetaDataset> = train_parts.iter().map(|d| (*d).clone()).collect();
    let train = MetaDataset::concat(&owned)?;
    let (train, test) = drop_empty_landmarks(&train, test);
    let model = MetaModel::fit(&train, ForestParams { seed, ..forest })?;
    model.predict(&test)
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the per-dataset rows followed by the mean and median rows.
pub fn write_table_csv<W: Write>(outcome: &EvaluationOutcome, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["dataset".to_owned()];
    header.extend(outcome.columns.iter().cloned());
    w.write_record(&header)?;
    let rows = outcome
        .reports
        .iter()
        .map(|r| (r.dataset_id.clone(), r.cells()))
        .chain([&outcome.mean, &outcome.median].map(|a| (a.label.clone(), a.cells.clone())));
    for (label, cells) in rows {
        let mut record = vec![label];
        record.extend(cells.into_iter().map(fmt_cell));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<table>", e))?;
    Ok(())
}

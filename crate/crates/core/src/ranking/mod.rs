//! Rankings of candidate detectors and the metrics that score them against
//! the true scaled MCC.

mod evaluate;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use evaluate::{
    leave_one_out_evaluate, write_table_csv, AggregateRow, EvaluationOutcome, EvaluationSettings,
    table_columns, MccSummary, MethodMetrics, RankingReport, CHERRY_PICK_THRESHOLD, RANDOM_REPETITIONS,
    TABLE_METHODS,
};

/// Binary confusion counts with anomaly as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Matthews correlation coefficient; 0 when any marginal is empty.
    pub fn mcc(&self) -> f64 {
        let (tp, fp, fn_, tn) = (self.tp as f64, self.fp as f64, self.fn_ as f64, self.tn as f64);
        let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if denom == 0.0 {
            return 0.0;
        }
        ((tp * tn - fp * fn_) / denom.sqrt()).clamp(-1.0, 1.0)
    }
}

/// Maps an MCC from [-1, 1] onto [0, 1].
pub fn scaled_mcc(m: f64) -> f64 {
    (m + 1.0) / 2.0
}

/// Linear ranking score `1 - (hv + fpr) / 2`.
pub fn lc_score(hv: f64, fpr: f64) -> Result<f64> {
    for (name, v) in [("hypervolume", hv), ("fpr", fpr)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("{name} {v} outside [0, 1]")));
        }
    }
    Ok(1.0 - (hv + fpr) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    R,
    #[serde(rename = "FPR")]
    Fpr,
    #[serde(rename = "HV")]
    Hv,
    L,
    M,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::R, Method::Fpr, Method::Hv, Method::L, Method::M];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::R => "R",
            Method::Fpr => "FPR",
            Method::Hv => "HV",
            Method::L => "L",
            Method::M => "M",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown ranking method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub config_id: String,
    pub score: f64,
    /// Position of the candidate in the input slice.
    pub index: usize,
}

/// Candidates in descending score order; equal scores by ascending config_id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub method: Method,
    pub entries: Vec<RankedEntry>,
}

impl Ranking {
    /// NaN scores rank last.
    pub fn from_scores(method: Method, config_ids: &[String], scores: &[f64]) -> Result<Self> {
        if config_ids.len() != scores.len() {
            return Err(Error::DimensionMismatch {
                expected: config_ids.len(),
                found: scores.len(),
            });
        }
        if config_ids.is_empty() {
            return Err(Error::invalid("ranking needs at least one candidate"));
        }
        let mut sorted: Vec<&String> = config_ids.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate config_id '{}'", w[0])));
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| desc(scores[a], scores[b]).then_with(|| config_ids[a].cmp(&config_ids[b])));
        Ok(Self {
            method,
            entries: order
                .into_iter()
                .map(|i| RankedEntry {
                    config_id: config_ids[i].clone(),
                    score: scores[i],
                    index: i,
                })
                .collect(),
        })
    }

    pub fn order(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.index).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn desc(a: f64, b: f64) -> Ordering {
    match (a.is_nan(), b.is_nan()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        _ => b.partial_cmp(&a).expect("not NaN"),
    }
}

/// `max(truth) - max(truth over the first k of order)`.
pub fn regret_at_k(order: &[usize], truth: &[f64], k: usize) -> Result<f64> {
    let n = truth.len();
    if order.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: order.len() });
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} outside 1..={n}")));
    }
    let best = truth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let top = order[..k].iter().map(|&i| truth[i]).fold(f64::NEG_INFINITY, f64::max);
    Ok((best - top).max(0.0))
}

/// Normalised discounted cumulative gain over the whole ranking.
pub fn ndcg(order: &[usize], relevance: &[f64]) -> Result<f64> {
    if order.len() != relevance.len() {
        return Err(Error::DimensionMismatch {
            expected: relevance.len(),
            found: order.len(),
        });
    }
    if let Some(r) = relevance.iter().find(|r| !(**r >= 0.0)) {
        return Err(Error::invalid(format!("relevance {r} must be non-negative")));
    }
    let dcg = |rels: &mut dyn Iterator<Item = f64>| -> f64 {
        rels.enumerate().map(|(i, r)| r / ((i + 2) as f64).log2()).sum()
    };
    let mut ideal = relevance.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg(&mut ideal.into_iter());
    if idcg == 0.0 {
        return Ok(1.0);
    }
    let got = dcg(&mut order.iter().map(|&i| relevance[i]));
    Ok((got / idcg).clamp(0.0, 1.0))
}

/// Pair counts behind Kendall's tau-b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TauCounts {
    pub n0: u64,
    /// Pairs tied in x (including pairs tied in both).
    pub ties_x: u64,
    /// Pairs tied in y (including pairs tied in both).
    pub ties_y: u64,
    /// Concordant minus discordant pairs.
    pub net: i64,
}

impl TauCounts {
    /// Counts pairs in O(n log n): sort by (x, y), then count the
    /// inversions of y with a merge sort.
    pub fn of(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: y.len() });
        }
        if x.iter().chain(y).any(|v| v.is_nan()) {
            return Err(Error::invalid("NaN in rank correlation input"));
        }
        let cmp = |a: f64, b: f64| a.partial_cmp(&b).expect("not NaN");
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| cmp(x[a], x[b]).then(cmp(y[a], y[b])));
        let pairs = |t: u64| t * t.saturating_sub(1) / 2;
        let (mut ties_x, mut ties_xy) = (0, 0);
        let (mut run_x, mut run_xy) = (1u64, 1u64);
        for w in idx.windows(2) {
            if x[w[0]] == x[w[1]] {
                run_x += 1;
                if y[w[0]] == y[w[1]] {
                    run_xy += 1;
                } else {
                    ties_xy += pairs(run_xy);
                    run_xy = 1;
                }
            } else {
                ties_x += pairs(run_x);
                ties_xy += pairs(run_xy);
                run_x = 1;
                run_xy = 1;
            }
        }
        ties_x += pairs(run_x);
        ties_xy += pairs(run_xy);

        let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let swaps = merge_count(&mut ys);
        let mut ties_y = 0;
        let mut run_y = 1u64;
        for w in ys.windows(2) {
            if w[0] == w[1] {
                run_y += 1;
            } else {
                ties_y += pairs(run_y);
                run_y = 1;
            }
        }
        ties_y += pairs(run_y);
        let n0 = pairs(n as u64);
        let net = n0 as i64 - ties_x as i64 - ties_y as i64 + ties_xy as i64 - 2 * swaps as i64;
        Ok(Self { n0, ties_x, ties_y, net })
    }

    pub fn tau_b(&self) -> f64 {
        let denom = ((self.n0 - self.ties_x) as f64 * (self.n0 - self.ties_y) as f64).sqrt();
        if denom == 0.0 {
            warn!("tau_b undefined: one ranking is entirely tied; reporting 0");
            return 0.0;
        }
        self.net as f64 / denom
    }
}

/// Sorts ascending and returns the number of strict inversions.
fn merge_count(v: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid]) + merge_count(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            merged.push(v[j]);
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..n]);
    v.copy_from_slice(&merged);
    swaps
}

/// Kendall rank correlation with the tie correction of the b variant.
/// Entirely tied input yields 0.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::invalid("tau_b needs at least two observations"));
    }
    Ok(TauCounts::of(x, y)?.tau_b())
}

/// Scores that reproduce a ranking's order: `n - position`.
pub fn positional_scores(order: &[usize]) -> Vec<f64> {
    let n = order.len();
    let mut s = vec![0.0; n];
    for (pos, &i) in order.iter().enumerate() {
        s[i] = (n - pos) as f64;
    }
    s
}

/// A uniformly random order of `n` candidates.
pub fn random_order<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Algorithm;

/// Value of a single hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Cat(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Cat(v) => f.write_str(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamKind {
    Int { lo: i64, hi: i64 },
    Real { lo: f64, hi: f64 },
    LogReal { lo: f64, hi: f64 },
    Categorical { choices: &'static [&'static str] },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    #[serde(flatten)]
    pub kind: ParamKind,
    pub default: ParamValue,
}

impl ParamSpec {
    pub fn contains(&self, value: &ParamValue) -> bool {
        match (&self.kind, value) {
            (ParamKind::Int { lo, hi }, ParamValue::Int(v)) => lo <= v && v <= hi,
            (ParamKind::Real { lo, hi } | ParamKind::LogReal { lo, hi }, ParamValue::Real(v)) => {
                lo <= v && v <= hi
            }
            // JSON may carry whole-number reals as integers.
            (ParamKind::Real { lo, hi } | ParamKind::LogReal { lo, hi }, ParamValue::Int(v)) => {
                let v = *v as f64;
                *lo <= v && v <= *hi
            }
            (ParamKind::Categorical { choices }, ParamValue::Cat(v)) => choices.contains(&v.as_str()),
            _ => false,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        match &self.kind {
            ParamKind::Int { lo, hi } => ParamValue::Int(rng.random_range(*lo..=*hi)),
            ParamKind::Real { lo, hi } => ParamValue::Real(rng.random_range(*lo..=*hi)),
            ParamKind::LogReal { lo, hi } => {
                ParamValue::Real(rng.random_range(lo.ln()..=hi.ln()).exp().clamp(*lo, *hi))
            }
            ParamKind::Categorical { choices } => {
                ParamValue::Cat(choices[rng.random_range(0..choices.len())].to_owned())
            }
        }
    }
}

/// Contamination bounds and default shared by the whole portfolio.
pub const CONTAMINATION_RANGE: (f64, f64) = (0.01, 0.2);
pub const DEFAULT_CONTAMINATION: f64 = 0.1;

pub const KNN_METHODS: &[&str] = &["largest", "mean", "median"];

/// Hyperparameter space of one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperparameterSpace {
    pub algorithm: Algorithm,
    pub params: Vec<ParamSpec>,
}

impl HyperparameterSpace {
    pub fn of(algorithm: Algorithm) -> Self {
        use ParamKind::*;
        use ParamValue as V;
        let params = match algorithm {
            Algorithm::Knn => vec![
                ParamSpec { name: "k", kind: Int { lo: 1, hi: 50 }, default: V::Int(5) },
                ParamSpec {
                    name: "method",
                    kind: Categorical { choices: KNN_METHODS },
                    default: V::Cat("largest".into()),
                },
            ],
            Algorithm::Lof => vec![ParamSpec {
                name: "n_neighbors",
                kind: Int { lo: 2, hi: 50 },
                default: V::Int(20),
            }],
            Algorithm::IsolationForest => vec![
                ParamSpec { name: "n_estimators", kind: Int { lo: 50, hi: 300 }, default: V::Int(100) },
                ParamSpec { name: "max_samples", kind: Int { lo: 64, hi: 512 }, default: V::Int(256) },
            ],
            Algorithm::Hbos => vec![ParamSpec {
                name: "n_bins",
                kind: Int { lo: 5, hi: 50 },
                default: V::Int(10),
            }],
            Algorithm::Pca => vec![ParamSpec {
                name: "retained_variance",
                kind: Real { lo: 0.5, hi: 0.99 },
                default: V::Real(0.9),
            }],
            Algorithm::Gaussian => vec![ParamSpec {
                name: "ridge",
                kind: LogReal { lo: 1e-6, hi: 1e-1 },
                default: V::Real(1e-3),
            }],
            Algorithm::Kde => vec![ParamSpec {
                name: "bandwidth",
                kind: LogReal { lo: 1e-2, hi: 1e1 },
                default: V::Real(1.0),
            }],
        };
        Self { algorithm, params }
    }

    pub fn defaults(&self) -> BTreeMap<String, ParamValue> {
        self.params
            .iter()
            .map(|p| (p.name.to_owned(), p.default.clone()))
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BTreeMap<String, ParamValue> {
        self.params
            .iter()
            .map(|p| (p.name.to_owned(), p.sample(rng)))
            .collect()
    }

    /// Checks that `params` names exactly this space's parameters, each in bounds.
    pub fn validate(&self, params: &BTreeMap<String, ParamValue>) -> Result<(), String> {
        for spec in &self.params {
            match params.get(spec.name) {
                None => return Err(format!("missing parameter '{}'", spec.name)),
                Some(v) if !spec.contains(v) => {
                    return Err(format!("parameter '{}' = {v} outside its space", spec.name))
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = params.keys().find(|k| !self.params.iter().any(|p| p.name == k.as_str())) {
            return Err(format!("unknown parameter '{extra}' for {}", self.algorithm));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn defaults_inside_bounds() {
        for alg in Algorithm::ALL {
            let space = HyperparameterSpace::of(alg);
            for p in &space.params {
                assert!(p.contains(&p.default), "{alg}: {}", p.name);
            }
            space.validate(&space.defaults()).unwrap();
        }
    }

    #[test]
    fn integer_sampling_is_uniform() {
        let spec = ParamSpec {
            name: "k",
            kind: ParamKind::Int { lo: 1, hi: 50 },
            default: ParamValue::Int(5),
        };
        let mut rng = rng_from_seed(11);
        let n = 10_000;
        let mut counts = [0usize; 51];
        for _ in 0..n {
            match spec.sample(&mut rng) {
                ParamValue::Int(v) => counts[v as usize] += 1,
                _ => unreachable!(),
            }
        }
        let p = 1.0 / 50.0;
        let expected = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in &counts[1..] {
            assert!((*c as f64 - expected).abs() <= 3.0 * sigma + 1e-9, "count {c}");
        }
        assert_eq!(counts[0], 0);
    }

    #[test]
    fn log_real_median_near_geometric_mean() {
        let spec = ParamSpec {
            name: "ridge",
            kind: ParamKind::LogReal { lo: 1e-6, hi: 1e-1 },
            default: ParamValue::Real(1e-3),
        };
        let mut rng = rng_from_seed(5);
        let mut v: Vec<f64> = (0..10_000)
            .map(|_| match spec.sample(&mut rng) {
                ParamValue::Real(x) => x,
                _ => unreachable!(),
            })
            .collect();
        v.sort_by(f64::total_cmp);
        let median = v[v.len() / 2];
        let geo = (1e-6f64 * 1e-1).sqrt();
        // log-uniform: median of log is the midpoint; allow ~4% of the log-range
        assert!((median.ln() - geo.ln()).abs() < 0.04 * (1e-1f64 / 1e-6).ln(), "median {median}");
        assert!(v.iter().all(|&x| (1e-6..=1e-1).contains(&x)));
    }

    #[test]
    fn validation_errors() {
        let space = HyperparameterSpace::of(Algorithm::Knn);
        let mut p = space.defaults();
        p.insert("k".into(), ParamValue::Int(99));
        assert!(space.validate(&p).is_err());
        let mut p = space.defaults();
        p.insert("bogus".into(), ParamValue::Int(1));
        assert!(space.validate(&p).is_err());
        let mut p = space.defaults();
        p.remove("method");
        assert!(space.validate(&p).is_err());
    }
}

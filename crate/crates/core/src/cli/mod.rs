//! Command-line front end: assimilation, meta-model training, ranking and
//! leave-one-out evaluation.

pub mod config;
pub mod pipeline;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};

pub use config::RunConfig;
pub use pipeline::{RankMethod, RecommendationResult};

use crate::detectors::{Algorithm, DetectorConfig, HyperparameterSpace};
use crate::error::{Error, Result};
use crate::features::MetaDataset;
use crate::hypervolume::estimate_hypervolume;
use crate::metamodel::{ForestParams, MetaModel};
use crate::ranking::{leave_one_out_evaluate, write_table_csv};

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_PARTIAL: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "adsel", version, about = "Rank anomaly detectors for normal-only datasets")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the configuration).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Monte Carlo samples per hypervolume estimate.
    #[arg(long, global = true)]
    pub hv_samples: Option<usize>,
    /// Random detectors per dataset (or candidates for `rank`).
    #[arg(long, global = true)]
    pub n_detectors: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the detector portfolio and hyperparameter spaces as JSON.
    ListDetectors,
    /// Build per-dataset meta-datasets under the output directory.
    Assimilate {
        /// Datasets (CSV path or builtin:<task>); replaces the configured list.
        datasets: Vec<String>,
    },
    /// Fit the meta-model on meta-dataset CSVs.
    TrainMeta {
        /// Meta CSVs; defaults to every assimilated dataset in the output directory.
        #[arg(long = "meta")]
        meta: Vec<PathBuf>,
        /// Where to write the model; defaults to <out>/model.json.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Predict scaled MCC for the rows of a meta CSV.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "meta")]
        meta: PathBuf,
    },
    /// Rank random candidate detectors for a normal-only dataset.
    Rank {
        /// CSV path or builtin:<task>.
        dataset: String,
        #[arg(long, value_enum, default_value = "linear")]
        method: RankMethod,
        /// Required for --method meta.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Leave-one-out evaluation of all ranking methods.
    Evaluate {
        /// Meta CSVs; defaults to every assimilated dataset in the output directory.
        #[arg(long = "meta")]
        meta: Vec<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Estimate one detector's hypervolume on a dataset.
    HvEstimate {
        /// CSV path or builtin:<task>.
        dataset: String,
        /// Detector configuration as JSON text or a path to a JSON file.
        #[arg(long, conflicts_with = "algorithm")]
        detector: Option<String>,
        /// Use this algorithm's default configuration.
        #[arg(long)]
        algorithm: Option<Algorithm>,
    },
}

impl Cli {
    /// Configuration file (if any) with flag overrides applied.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.global.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let g = &self.global;
        if let Some(s) = g.seed {
            cfg.seed = s;
        }
        if let Some(o) = &g.out {
            cfg.out = o.clone();
        }
        if let Some(n) = g.hv_samples {
            cfg.hv_samples = n;
        }
        if let Some(n) = g.n_detectors {
            cfg.n_detectors = n;
        }
        if let Command::Evaluate { threshold: Some(t), .. } = &self.command {
            cfg.cherry_pick_threshold = *t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One JSON object per log line on stderr; `RUST_LOG` sets the level.
pub fn init_logging() {
    let env = env_logger::Env::default().default_filter_or("info");
    let _ = env_logger::Builder::from_env(env)
        .format(|buf, record| {
            let line = serde_json::json!({
                "level": record.level().as_str(),
                "target": record.target(),
                "message": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        })
        .try_init();
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::Csv(_)
        | Error::InvalidInput(_)
        | Error::DimensionMismatch { .. } => EXIT_DATA,
        _ => EXIT_FAILURE,
    }
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: &Cli) -> Result<u8> {
    let cfg = cli.run_config()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            return Err(Error::Config("--jobs must be positive".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| dispatch(&cli.command, &cfg))
}

fn dispatch(command: &Command, cfg: &RunConfig) -> Result<u8> {
    match command {
        Command::ListDetectors => {
            let spaces: Vec<HyperparameterSpace> = Algorithm::ALL.into_iter().map(HyperparameterSpace::of).collect();
            print_json(&spaces)?;
            Ok(0)
        }
        Command::Assimilate { datasets } => {
            let list = if datasets.is_empty() { cfg.datasets.clone() } else { datasets.clone() };
            cmd_assimilate(&list, cfg)
        }
        Command::TrainMeta { meta, model } => {
            let data = load_meta_inputs(meta, &cfg.out)?;
            let merged = MetaDataset::concat(&data)?;
            let params = ForestParams {
                n_trees: cfg.forest_trees,
                seed: crate::rng::derive_seed_str(cfg.seed, "meta-model"),
                ..ForestParams::default()
            };
            let fitted = MetaModel::fit(&merged, params)?;
            let path = model.clone().unwrap_or_else(|| cfg.out.join("model.json"));
            ensure_parent(&path)?;
            fitted.save(&path)?;
            info!("meta-model on {} instances written to {}", merged.len(), path.display());
            Ok(0)
        }
        Command::Predict { model, meta } => {
            let m = MetaModel::load(model)?;
            let data = pipeline::read_meta(meta)?;
            let preds = m.predict(&data)?;
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            w.write_record(["dataset_id", "config_id", "predicted_scaled_mcc"])?;
            for (r, p) in data.rows.iter().zip(preds) {
                w.write_record([r.dataset_id.clone(), r.config_id.clone(), p.to_string()])?;
            }
            w.flush().map_err(|e| Error::io("<stdout>", e))?;
            Ok(0)
        }
        Command::Rank { dataset, method, model } => {
            let data = pipeline::load_dataset(dataset, &cfg.label_column)?;
            let loaded = match (method, model) {
                (RankMethod::Linear, _) => None,
                (RankMethod::Meta, None) => return Err(Error::Model("--method meta requires --model".into())),
                (RankMethod::Meta, Some(p)) => {
                    let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
                    Some((MetaModel::from_slice(&bytes)?, pipeline::sha256_hex(&bytes)))
                }
            };
            let result = pipeline::recommend(
                &data,
                cfg,
                *method,
                loaded.as_ref().map(|(m, h)| (m, h.clone())),
                cfg.n_detectors,
            )?;
            print_json(&result)?;
            Ok(0)
        }
        Command::Evaluate { meta, .. } => {
            let data = load_meta_inputs(meta, &cfg.out)?;
            let outcome = leave_one_out_evaluate(&data, &cfg.evaluation())?;
            let dir = cfg.out.join("evaluation");
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let mut table = Vec::new();
            write_table_csv(&outcome, &mut table)?;
            let table_path = dir.join("table.csv");
            fs::write(&table_path, &table).map_err(|e| Error::io(&table_path, e))?;
            let mut json = serde_json::to_vec_pretty(&outcome)?;
            json.push(b'\n');
            let json_path = dir.join("reports.json");
            fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
            std::io::stdout()
                .write_all(&table)
                .map_err(|e| Error::io("<stdout>", e))?;
            Ok(0)
        }
        Command::HvEstimate { dataset, detector, algorithm } => {
            let data = pipeline::load_dataset(dataset, &cfg.label_column)?;
            let config = match (detector, algorithm) {
                (Some(text), _) => {
                    let json = if Path::new(text).is_file() {
                        fs::read_to_string(text).map_err(|e| Error::io(text, e))?
                    } else {
                        text.clone()
                    };
                    DetectorConfig::from_json(&json)?
                }
                (None, Some(a)) => DetectorConfig::default_for(*a),
                (None, None) => return Err(Error::Config("give --detector or --algorithm".into())),
            };
            let (train, ball) = pipeline::prepare_normal(&data, cfg)?;
            let det = config.fit_matrix(train.features())?;
            let est = estimate_hypervolume(&det, &ball, cfg.hv_samples, cfg.seed)?;
            print_json(&serde_json::json!({
                "dataset": data.name(),
                "config_id": config.config_id(),
                "fraction": est.fraction,
                "std_error": est.std_error,
                "n_samples": est.n_samples,
                "seed": est.seed,
                "ball": { "center": ball.center, "radius": ball.radius },
            }))?;
            Ok(0)
        }
    }
}

fn cmd_assimilate(datasets: &[String], cfg: &RunConfig) -> Result<u8> {
    if datasets.is_empty() {
        return Err(Error::Config("no datasets given".into()));
    }
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let mut failed = 0;
    for spec in datasets {
        match assimilate_one(spec, cfg) {
            Ok(()) => {}
            Err(e) => {
                error!("dataset '{spec}' skipped: {e}");
                failed += 1;
            }
        }
    }
    Ok(match failed {
        0 => 0,
        n if n == datasets.len() => EXIT_DATA,
        _ => EXIT_PARTIAL,
    })
}

fn assimilate_one(spec: &str, cfg: &RunConfig) -> Result<()> {
    let data = pipeline::load_dataset(spec, &cfg.label_column)?;
    let dir = cfg.out.join(data.name());
    let hash = pipeline::input_hash(&data, cfg);
    if let Some(m) = pipeline::completed(&dir, &hash) {
        info!("dataset '{}' up to date ({} instances)", m.dataset, m.n_instances);
        return Ok(());
    }
    let out = pipeline::assimilate_dataset(&data, cfg)?;
    let m = pipeline::write_assimilation(&dir, &out, &hash)?;
    if m.failed_slots > 0 {
        warn!("dataset '{}': {} detector slots failed", m.dataset, m.failed_slots);
    }
    info!("dataset '{}': {} meta-instances", m.dataset, m.n_instances);
    Ok(())
}

/// Explicit paths, or every `<out>/*/meta.csv` with a manifest, sorted.
fn load_meta_inputs(paths: &[PathBuf], out: &Path) -> Result<Vec<MetaDataset>> {
    let paths = if paths.is_empty() {
        let entries = fs::read_dir(out).map_err(|e| Error::io(out, e))?;
        let mut found: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(pipeline::MANIFEST_FILE).is_file() && p.join(pipeline::META_FILE).is_file())
            .map(|p| p.join(pipeline::META_FILE))
            .collect();
        found.sort();
        found
    } else {
        paths.to_vec()
    };
    if paths.is_empty() {
        return Err(Error::invalid(format!("no meta-datasets found under {}", out.display())));
    }
    paths.iter().map(|p| pipeline::read_meta(p)).collect()
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| Error::io("<stdout>", e))
}

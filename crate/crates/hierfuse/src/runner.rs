//! Multi-seed experiment runner and its on-disk artifacts.
//!
//! Layout under the output directory:
//! - `seed_<n>/metrics.json`, `seed_<n>/checkpoint.json`, `seed_<n>/history.csv`
//! - `seed_<n>/history.json`, `seed_<n>/run_log.jsonl`, `seed_<n>/embeddings.csv`
//! - `metrics_summary.json`, `metrics_summary.csv`
//!
//! Nothing time-dependent is written, so identical configs give identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hierfuse_core::dataset::{generate_synthetic, DatasetSplit};
use hierfuse_core::evolution::Parallelism;
use hierfuse_core::metrics::{bin_sentiment, Bins, MetricsReport};
use hierfuse_core::model::HaenModel;
use hierfuse_core::training::{majority_acc2, run_seed, AblationMode, SeedOutcome};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::jsonl::load_split;
use crate::parallel::RayonPool;

pub const SUMMARY_JSON: &str = "metrics_summary.json";
pub const SUMMARY_CSV: &str = "metrics_summary.csv";
pub const RESOLVED_CONFIG: &str = "config_resolved.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub status: SeedStatus,
    pub error: Option<String>,
    pub metrics: Option<MetricsReport>,
    /// Binary accuracy of the training-majority sign on the test split.
    pub majority_acc2: Option<f64>,
    pub best_fitness: Option<f64>,
    pub best_arch: Option<String>,
    pub generations_run: Option<usize>,
    pub gradient_steps: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for fewer than two observations.
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_ok: usize,
    pub n_failed: usize,
    pub acc7: Option<Stat>,
    pub acc5: Option<Stat>,
    pub acc2: Option<Stat>,
    pub mae: Option<Stat>,
    pub weighted_f1: Option<Stat>,
    pub majority_acc2: Option<Stat>,
}

impl Aggregate {
    pub fn from_seeds(seeds: &[SeedSummary]) -> Self {
        let ok: Vec<&SeedSummary> = seeds.iter().filter(|s| s.status == SeedStatus::Ok).collect();
        let metric = |f: fn(&MetricsReport) -> f64| {
            Stat::of(&ok.iter().filter_map(|s| s.metrics.as_ref().map(f)).collect::<Vec<_>>())
        };
        Self {
            n_ok: ok.len(),
            n_failed: seeds.len() - ok.len(),
            acc7: metric(|m| m.acc7),
            acc5: metric(|m| m.acc5),
            acc2: metric(|m| m.acc2),
            mae: metric(|m| m.mae),
            weighted_f1: metric(|m| m.weighted_f1),
            majority_acc2: Stat::of(&ok.iter().filter_map(|s| s.majority_acc2).collect::<Vec<_>>()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub ablation: AblationMode,
    pub seeds: Vec<SeedSummary>,
    pub aggregate: Aggregate,
    pub config: RunConfig,
}

impl ExperimentSummary {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SUMMARY_JSON);
        let text = std::fs::read_to_string(&path).map_err(Error::io(&path))?;
        serde_json::from_str(&text).map_err(Error::json(&path))
    }
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::json(path))?;
    text.push('\n');
    std::fs::write(path, text).map_err(Error::io(path))
}

fn write_seed_artifacts(dir: &Path, summary: &SeedSummary, out: &SeedOutcome, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    write_json(&dir.join("metrics.json"), summary)?;

    let model = HaenModel::from_params(out.config.clone(), &out.best.weights)?;
    Checkpoint::new(&model, &cfg.setup().loss, Some(out.best.arch)).save(&dir.join("checkpoint.json"))?;

    let path = dir.join("history.csv");
    let mut w = csv::Writer::from_path(&path).map_err(Error::csv(&path))?;
    w.write_record(["generation", "best_fitness", "mean_fitness", "best_arch_summary"])
        .map_err(Error::csv(&path))?;
    for h in &out.history {
        w.write_record([
            h.generation.to_string(),
            h.best_fitness.to_string(),
            h.mean_fitness.to_string(),
            h.best_arch.clone(),
        ])
        .map_err(Error::csv(&path))?;
    }
    w.flush().map_err(Error::io(&path))?;
    write_json(&dir.join("history.json"), &out.history)?;

    let path = dir.join("run_log.jsonl");
    let mut w = BufWriter::new(File::create(&path).map_err(Error::io(&path))?);
    for report in &out.run_log {
        serde_json::to_writer(&mut w, report).map_err(Error::json(&path))?;
        w.write_all(b"\n").map_err(Error::io(&path))?;
    }
    w.flush().map_err(Error::io(&path))?;

    let path = dir.join("embeddings.csv");
    let mut w = csv::Writer::from_path(&path).map_err(Error::csv(&path))?;
    let k = out.predictions.first().map_or(0, |p| p.embedding.len());
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((0..k).map(|i| format!("h{i}")));
    w.write_record(&header).map_err(Error::csv(&path))?;
    for p in &out.predictions {
        let mut row = vec![p.id.clone(), bin_sentiment(p.sentiment_label, Bins::Seven)?.to_string()];
        row.extend(p.embedding.iter().map(f64::to_string));
        w.write_record(&row).map_err(Error::csv(&path))?;
    }
    w.flush().map_err(Error::io(&path))
}

fn write_summary_csv(path: &Path, summary: &ExperimentSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    w.write_record(["seed", "status", "acc7", "acc5", "acc2", "mae", "weighted_f1"]).map_err(Error::csv(path))?;
    for s in &summary.seeds {
        let cells: Vec<String> = match &s.metrics {
            Some(m) => [m.acc7, m.acc5, m.acc2, m.mae, m.weighted_f1].iter().map(f64::to_string).collect(),
            None => vec![String::new(); 5],
        };
        let status = match s.status {
            SeedStatus::Ok => "ok",
            SeedStatus::Failed => "failed",
        };
        let mut row = vec![s.seed.to_string(), status.to_string()];
        row.extend(cells);
        w.write_record(&row).map_err(Error::csv(path))?;
    }
    let a = &summary.aggregate;
    let stats = [a.acc7, a.acc5, a.acc2, a.mae, a.weighted_f1];
    for (label, pick) in [("mean", (|s: Stat| s.mean) as fn(Stat) -> f64), ("std", |s: Stat| s.std)] {
        let mut row = vec![label.to_string(), String::new()];
        row.extend(stats.iter().map(|s| s.map(pick).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

fn run_one<P: Parallelism>(
    cfg: &RunConfig,
    shared: Option<&DatasetSplit>,
    seed: u64,
    par: &P,
) -> std::result::Result<(SeedSummary, SeedOutcome), String> {
    let generated;
    let data = match shared {
        Some(d) => d,
        None => {
            generated = generate_synthetic(&cfg.generator, seed).map_err(|e| e.to_string())?;
            &generated
        }
    };
    let out = run_seed(&cfg.setup(), data, seed, par).map_err(|e| e.to_string())?;
    let summary = SeedSummary {
        seed,
        status: SeedStatus::Ok,
        error: None,
        metrics: Some(out.test_metrics.clone()),
        majority_acc2: Some(majority_acc2(data)),
        best_fitness: finite(out.best_fitness),
        best_arch: Some(out.best.arch.summary()),
        generations_run: Some(out.history.len().saturating_sub(1)),
        gradient_steps: Some(out.gradient_steps),
    };
    Ok((summary, out))
}

/// Runs every seed with a pool sized by `cfg.threads`.
pub fn run_experiment(cfg: &RunConfig, progress: impl FnMut(&SeedSummary)) -> Result<ExperimentSummary> {
    let pool = RayonPool::new(cfg.threads)?;
    run_experiment_with(cfg, &pool, progress)
}

/// Writes the resolved configuration, runs every seed with its artifacts,
/// then the aggregate. A failing seed is recorded in the aggregate and does
/// not stop the others.
pub fn run_experiment_with<P: Parallelism>(
    cfg: &RunConfig,
    par: &P,
    mut progress: impl FnMut(&SeedSummary),
) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let shared = cfg.data_dir.as_deref().map(load_split).transpose()?;
    let out_dir = &cfg.output_dir;
    std::fs::create_dir_all(out_dir).map_err(Error::io(out_dir))?;
    write_json(&out_dir.join(RESOLVED_CONFIG), cfg)?;

    let mut seeds = Vec::new();
    for seed in cfg.seeds() {
        let summary = match run_one(cfg, shared.as_ref(), seed, par) {
            Ok((summary, outcome)) => {
                write_seed_artifacts(&seed_dir(out_dir, seed), &summary, &outcome, cfg)?;
                summary
            }
            Err(error) => SeedSummary {
                seed,
                status: SeedStatus::Failed,
                error: Some(error),
                metrics: None,
                majority_acc2: None,
                best_fitness: None,
                best_arch: None,
                generations_run: None,
                gradient_steps: None,
            },
        };
        progress(&summary);
        seeds.push(summary);
    }

    let summary = ExperimentSummary {
        ablation: cfg.ablation,
        aggregate: Aggregate::from_seeds(&seeds),
        seeds,
        config: cfg.clone(),
    };
    write_json(&out_dir.join(SUMMARY_JSON), &summary)?;
    write_summary_csv(&out_dir.join(SUMMARY_CSV), &summary)?;
    Ok(summary)
}

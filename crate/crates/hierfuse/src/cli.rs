//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 for usage and
//! configuration errors.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hierfuse_core::dataset::{generate_synthetic, GeneratorSpec};
use hierfuse_core::training::{evaluate_metrics, AblationMode};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::jsonl::{load_split, save_split};
use crate::report::{metrics_table, summary_table};
use crate::runner::{run_experiment, ExperimentSummary, SeedStatus, SeedSummary};

#[derive(Debug, Parser)]
#[command(name = "hierfuse", version, about = "Evolved hierarchical expert networks for multimodal sentiment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset as train/val/test JSONL files.
    GenData(GenDataArgs),
    /// Run the evolutionary search.
    Evolve(RunArgs),
    /// Train the default genome without evolution.
    Train(RunArgs),
    /// Run one ablation, or all of them side by side.
    Ablate(RunArgs),
    /// Score a checkpoint on a dataset split.
    Evaluate(EvaluateArgs),
    /// Print result tables for finished runs.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AblationArg {
    Full,
    NoHierarchy,
    NoEvolution,
    NoCrossmodal,
    NoMtl,
}

impl From<AblationArg> for AblationMode {
    fn from(a: AblationArg) -> Self {
        match a {
            AblationArg::Full => AblationMode::Full,
            AblationArg::NoHierarchy => AblationMode::NoHierarchy,
            AblationArg::NoEvolution => AblationMode::NoEvolution,
            AblationArg::NoCrossmodal => AblationMode::NoCrossmodal,
            AblationArg::NoMtl => AblationMode::NoMtl,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub generations: Option<u32>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long, value_enum)]
    pub ablation: Option<AblationArg>,
    /// Directory with train.jsonl, val.jsonl and test.jsonl.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON run configuration whose `generator` section is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Also write the metrics as JSON to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories containing metrics_summary.json.
    #[arg(required = true)]
    pub dirs: Vec<PathBuf>,
}

/// Builds the run configuration: file (or defaults), then flag overrides,
/// then validation.
pub fn resolve_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(g) = args.generations {
        cfg.evolution.generations = g;
    }
    if let Some(p) = args.population {
        cfg.evolution.population_size = p;
    }
    if let Some(a) = args.ablation {
        cfg.ablation = a.into();
    }
    if let Some(d) = &args.data {
        cfg.data_dir = Some(d.clone());
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_seed(s: &SeedSummary) {
    match (s.status, &s.metrics) {
        (SeedStatus::Ok, Some(m)) => println!(
            "seed {:>4}  Acc-7 {:6.2}  Acc-2 {:6.2}  MAE {:.4}  W-F1 {:6.2}  {}",
            s.seed,
            m.acc7,
            m.acc2,
            m.mae,
            m.weighted_f1,
            s.best_arch.as_deref().unwrap_or("")
        ),
        _ => println!("seed {:>4}  FAILED: {}", s.seed, s.error.as_deref().unwrap_or("unknown error")),
    }
}

fn run_and_report(cfg: &RunConfig) -> Result<ExperimentSummary> {
    println!("{} -> {}", cfg.ablation.name(), cfg.output_dir.display());
    let summary = run_experiment(cfg, print_seed)?;
    if summary.aggregate.n_ok == 0 {
        return Err(Error::Run(format!("every seed of {} failed", cfg.ablation.name())));
    }
    Ok(summary)
}

fn cmd_run(args: &RunArgs, force: Option<AblationMode>) -> Result<()> {
    let mut cfg = resolve_config(args)?;
    if let Some(mode) = force {
        cfg.ablation = mode;
    }
    let summary = run_and_report(&cfg)?;
    print!("{}", summary_table(&[(cfg.ablation.name().to_string(), summary)]));
    Ok(())
}

fn cmd_ablate(args: &RunArgs) -> Result<()> {
    let base = resolve_config(args)?;
    if args.ablation.is_some() {
        return cmd_run(args, None);
    }
    let mut rows = Vec::new();
    for mode in AblationMode::ALL {
        let mut cfg = base.clone();
        cfg.ablation = mode;
        cfg.output_dir = base.output_dir.join(mode.name());
        rows.push((mode.name().to_string(), run_and_report(&cfg)?));
    }
    print!("{}", summary_table(&rows));
    Ok(())
}

fn cmd_gen_data(args: &GenDataArgs) -> Result<()> {
    let mut spec: GeneratorSpec = match &args.config {
        Some(p) => RunConfig::load(p)?.generator,
        None => GeneratorSpec::default(),
    };
    if let Some(n) = args.n {
        spec.n = n;
    }
    if let Some(noise) = args.noise {
        spec.noise_level = noise;
    }
    let split = generate_synthetic(&spec, args.seed)?;
    save_split(&split, &args.out)?;
    println!(
        "wrote {} train / {} val / {} test samples to {}",
        split.train.len(),
        split.val.len(),
        split.test.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let model = ckpt.model()?;
    let data = load_split(&args.data)?;
    let samples = match args.split {
        SplitArg::Train => &data.train,
        SplitArg::Val => &data.val,
        SplitArg::Test => &data.test,
    };
    let (metrics, _) = evaluate_metrics(&model, samples, &ckpt.loss)?;
    print!("{}", metrics_table(&metrics));
    if let Some(path) = &args.out {
        let text = serde_json::to_string_pretty(&metrics).map_err(Error::json(path))?;
        std::fs::write(path, text + "\n").map_err(Error::io(path))?;
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for dir in &args.dirs {
        let label = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
        rows.push((label, ExperimentSummary::load(dir)?));
    }
    print!("{}", summary_table(&rows));
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => cmd_gen_data(a),
        Command::Evolve(a) => cmd_run(a, None),
        Command::Train(a) => cmd_run(a, Some(AblationMode::NoEvolution)),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                2
            } else {
                1
            }
        }
    }
}

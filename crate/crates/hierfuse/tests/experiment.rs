use std::fs;

use hierfuse::config::RunConfig;
use hierfuse::runner::{run_experiment, seed_dir, SeedStatus};
use hierfuse_core::training::AblationMode;

fn small(out: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.generator.n = 160;
    cfg.evolution.population_size = 3;
    cfg.evolution.generations = 1;
    cfg.evolution.inner_epochs = 1;
    cfg.threads = 1;
    cfg.output_dir = out.to_path_buf();
    cfg
}

#[test]
fn single_seed_has_zero_std_and_full_layout() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.seeds = vec![11];
    let summary = run_experiment(&cfg, |_| {}).unwrap();
    assert_eq!(summary.aggregate.n_ok, 1);
    assert_eq!(summary.aggregate.acc2.unwrap().std, 0.0);
    assert_eq!(summary.aggregate.mae.unwrap().std, 0.0);
    for f in ["metrics_summary.json", "metrics_summary.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let sd = seed_dir(dir.path(), 11);
    for f in ["metrics.json", "checkpoint.json", "history.csv", "history.json", "run_log.jsonl", "embeddings.csv"] {
        assert!(sd.join(f).is_file(), "{f}");
    }
    let history = fs::read_to_string(sd.join("history.csv")).unwrap();
    assert_eq!(history.lines().next().unwrap(), "generation,best_fitness,mean_fitness,best_arch_summary");
    assert_eq!(history.lines().count(), 3);
    let embeddings = fs::read_to_string(sd.join("embeddings.csv")).unwrap();
    assert!(embeddings.starts_with("id,label,h0,"));
    assert_eq!(embeddings.lines().count(), 1 + 24);
}

#[test]
fn summary_csv_has_mean_and_std_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.seeds = vec![1, 2];
    cfg.ablation = AblationMode::NoEvolution;
    run_experiment(&cfg, |_| {}).unwrap();
    let text = fs::read_to_string(dir.path().join("metrics_summary.csv")).unwrap();
    let firsts: Vec<&str> = text.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(firsts, ["seed", "1", "2", "mean", "std"]);
}

#[test]
fn diverging_seeds_are_recorded_as_failures() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.seeds = vec![1, 2];
    cfg.ablation = AblationMode::NoEvolution;
    cfg.train.lr = 1e300;
    let mut seen = Vec::new();
    let summary = run_experiment(&cfg, |s| seen.push(s.seed)).unwrap();
    assert_eq!(seen, vec![1, 2]);
    assert_eq!(summary.aggregate.n_failed, 2);
    assert!(summary.aggregate.acc2.is_none());
    for s in &summary.seeds {
        assert_eq!(s.status, SeedStatus::Failed);
        assert!(s.error.is_some());
    }
    assert!(dir.path().join("metrics_summary.json").is_file());
}

#[test]
fn repeated_runs_write_identical_summaries() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut ca = small(a.path());
    ca.seeds = vec![4, 5];
    let mut cb = ca.clone();
    cb.output_dir = b.path().to_path_buf();
    cb.threads = 2;
    run_experiment(&ca, |_| {}).unwrap();
    run_experiment(&cb, |_| {}).unwrap();
    let strip = |p: &std::path::Path| {
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(p.join("metrics_summary.json")).unwrap()).unwrap();
        v["config"]["output_dir"] = serde_json::Value::Null;
        v["config"]["threads"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(a.path()), strip(b.path()));
    assert_eq!(
        fs::read(seed_dir(a.path(), 4).join("checkpoint.json")).unwrap(),
        fs::read(seed_dir(b.path(), 4).join("checkpoint.json")).unwrap()
    );
}

#[test]
fn resolved_config_reproduces_the_run() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg = small(a.path());
    cfg.seeds = vec![3];
    cfg.evolution.sigma = 0.05;
    let first = run_experiment(&cfg, |_| {}).unwrap();
    let mut resolved = RunConfig::load(&a.path().join("config_resolved.json")).unwrap();
    assert_eq!(resolved, cfg);
    resolved.output_dir = b.path().to_path_buf();
    let second = run_experiment(&resolved, |_| {}).unwrap();
    assert_eq!(first.seeds, second.seeds);
}

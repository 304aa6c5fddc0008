//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! The process exits nonzero when a gating criterion fails. The ablation
//! ordering is an empirical comparison on the synthetic benchmark: its line
//! reports PASS or FAIL with every margin but does not gate the exit status.

use std::path::Path;
use std::time::{Duration, Instant};

use hierfuse::config::RunConfig;
use hierfuse::parallel::RayonPool;
use hierfuse::runner::{run_experiment, ExperimentSummary};
use hierfuse_core::dataset::{generate_synthetic, GeneratorSpec, LabelBundle, MultimodalSample};
use hierfuse_core::evolution::*;
use hierfuse_core::gradcheck::check_gradients;
use hierfuse_core::metrics::{f1_metrics, MetricsReport};
use hierfuse_core::model::{FusionKind, HaenConfig, HaenModel, ModalityInputs};
use hierfuse_core::objectives::{kl_divergence, LossConfig, Objective};
use hierfuse_core::rng::{self, ChaCha8Rng};
use hierfuse_core::training::{AblationMode, ExperimentSetup, GenomeTrainer};
use rand::Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn random_config(rng: &mut ChaCha8Rng) -> HaenConfig {
    let mut c = HaenConfig::desk_default(rng.random_range(1..=4), rng.random_range(1..=4), rng.random_range(1..=4));
    let w = |rng: &mut ChaCha8Rng| rng.random_range(1..=4usize);
    c.expert_widths = std::array::from_fn(|_| (0..rng.random_range(1..=2)).map(|_| w(rng)).collect());
    c.fusion = if rng.random_bool(0.25) { FusionKind::ConcatLinear } else { FusionKind::Hierarchical };
    c.levels = match c.fusion {
        FusionKind::Hierarchical => rng.random_range(1..=3),
        FusionKind::ConcatLinear => 1,
    };
    c.fusion_widths = (0..c.levels).map(|_| std::array::from_fn(|_| vec![w(rng)])).collect();
    c.tower_widths = (0..c.tasks.len()).map(|_| vec![w(rng)]).collect();
    c.cross_modal = rng.random_bool(0.7);
    c.task_attention = rng.random_bool(0.7);
    c
}

fn random_loss(rng: &mut ChaCha8Rng) -> LossConfig {
    let mut l = LossConfig::default();
    for v in &mut l.lambdas {
        *v = rng.random_range(0.1..2.0);
    }
    l.gamma = rng.random_range(0.0..1.0);
    l.beta = rng.random_range(0.0..1.0);
    l.kl_temperature = rng.random_range(0.5..2.0);
    l.objective = if rng.random_bool(0.5) { Objective::AttentionWeighted } else { Objective::LambdaWeighted };
    l
}

fn random_batch(c: &HaenConfig, rng: &mut ChaCha8Rng, n: usize) -> Vec<MultimodalSample> {
    let mut v = |d: usize| (0..d).map(|_| rng.random_range(-1.5..1.5)).collect::<Vec<f64>>();
    (0..n)
        .map(|i| {
            let inputs = ModalityInputs::new(v(c.d_t), v(c.d_a), v(c.d_v));
            let s = v(1)[0] * 2.0;
            let e = (v(1)[0].abs() * 4.0) as u8 % 6;
            MultimodalSample { id: format!("g{i}"), inputs, labels: LabelBundle::from_sentiment(s, e) }
        })
        .collect()
}

fn gradients() -> Check {
    let start = Instant::now();
    let mut rng = rng::stream(2024, &[]);
    let configs = 24;
    let mut worst = 0.0f64;
    let mut groups = 0;
    for trial in 0..configs {
        let config = random_config(&mut rng);
        let loss = random_loss(&mut rng);
        let model = HaenModel::xavier(config.clone(), &mut rng).map_err(fail)?;
        let batch = random_batch(&config, &mut rng, 3);
        let refs: Vec<&MultimodalSample> = batch.iter().collect();
        for g in check_gradients(&model, &refs, &loss, 1e-5, 1e-7).map_err(fail)? {
            groups += 1;
            worst = worst.max(g.rel_error);
            ensure(g.rel_error < 1e-4, || format!("config {trial}, group {}: rel error {:.2e}", g.name, g.rel_error))?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:.1?}"))?;
    Ok(format!("{configs} configs, {groups} groups, max rel error {worst:.2e}, {elapsed:.1?}"))
}

fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn kl_suite() -> Check {
    let mut rng = rng::stream(1, &[]);
    let mut min_kl = f64::INFINITY;
    for _ in 0..1000 {
        let n = rng.random_range(2..10);
        let p = random_dist(&mut rng, n);
        let q = random_dist(&mut rng, n);
        min_kl = min_kl.min(kl_divergence(&p, &q, 1e-8).map_err(fail)?);
    }
    ensure(min_kl >= 0.0, || format!("negative KL {min_kl:e}"))?;
    let mut max_self = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..10);
        let p = random_dist(&mut rng, n);
        max_self = max_self.max(kl_divergence(&p, &p, 1e-8).map_err(fail)?.abs());
    }
    ensure(max_self <= 1e-12, || format!("KL(p,p) = {max_self:e}"))?;
    let zeros = kl_divergence(&[0.5, 0.5, 0.0], &[1.0, 0.0, 0.0], 1e-8).map_err(fail)?;
    ensure(zeros.is_finite(), || format!("KL with zero in q = {zeros}"))?;
    Ok(format!("min KL {min_kl:.2e} over 1000 pairs, max |KL(p,p)| {max_self:.1e}, zero-q KL {zeros:.3}"))
}

fn operator_space(pinned: bool) -> GenomeSpace {
    let r = |lo, hi| if pinned { GeneRange::new(lo, lo) } else { GeneRange::new(lo, hi) };
    let search = SearchSpace {
        expert_hidden: r(3, 4),
        expert_out: r(2, 3),
        levels: r(1, 2),
        fusion_width: r(2, 3),
        tower_hidden: r(2, 3),
    };
    GenomeSpace::new(search, ModelTemplate::new(2, 2, 2)).expect("valid search space")
}

fn operator_algebra() -> Check {
    let space = operator_space(false);
    let mut rng = rng::stream(3, &[]);
    let base = space.random_genome(&mut rng);
    let mut a = base.clone();
    let mut b = base.clone();
    a.weights.values_mut().iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64 * 0.37).sin());
    b.weights.values_mut().iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64 * 0.11).cos() * 2.0);
    let mut blend_err = 0.0f64;
    for alpha in [0.0, 0.25, 0.5, 1.0] {
        let child = crossover_with_alpha(&space, &a, &b, alpha, &mut rng);
        ensure(child.arch == a.arch, || "blend changed the architecture".into())?;
        for ((c, x), y) in child.weights.values().iter().zip(a.weights.values()).zip(b.weights.values()) {
            let expected = alpha * x + (1.0 - alpha) * y;
            blend_err = blend_err.max((c - expected).abs() / (1.0 + expected.abs()));
        }
    }
    ensure(blend_err <= 1e-15, || format!("blend error {blend_err:e}"))?;

    let sigma = 0.1;
    let n = 100_000;
    let (mut sum, mut sq) = (0.0, 0.0);
    let mut w = vec![0.0; n];
    perturb_weights(&mut w, sigma, &mut rng);
    for v in &w {
        sum += v;
        sq += v * v;
    }
    let mean = sum / n as f64;
    let std = (sq / n as f64 - mean * mean).sqrt();
    // four standard errors for the mean, about 2% of sigma for the std
    let mean_bound = 4.0 * sigma / (n as f64).sqrt();
    let std_bound = 4.0 * sigma / (2.0 * n as f64).sqrt();
    ensure(mean.abs() <= mean_bound, || format!("perturbation mean {mean:e}"))?;
    ensure((std - sigma).abs() <= std_bound, || format!("perturbation std {std}"))?;

    let members = (0..8)
        .map(|i| Individual { fitness: Some(((i * 5) % 8) as f64), ..Individual::new(space.zero_genome()) })
        .collect();
    let pop = Population { members, generation: 0 };
    let argmax = pop.best_index().map_err(fail)?;
    for _ in 0..100 {
        let pick = tournament_select(&pop, 8, &mut rng).map_err(fail)?;
        ensure(pick == argmax, || format!("k=N picked {pick}, argmax {argmax}"))?;
    }
    let trials = 16_000;
    let mut counts = [0usize; 8];
    for _ in 0..trials {
        counts[tournament_select(&pop, 1, &mut rng).map_err(fail)?] += 1;
    }
    let expected = trials as f64 / 8.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // upper 1% point of chi-square with 7 degrees of freedom
    ensure(chi2 < 18.475, || format!("chi2 {chi2:.2} rejects uniformity at p = 0.01"))?;
    Ok(format!(
        "blend err {blend_err:.1e}; mean {mean:.2e} (bound {mean_bound:.1e}), std {std:.5} (bound {sigma}±{std_bound:.1e}); \
         k=N argmax; k=1 chi2 {chi2:.2} < 18.475"
    ))
}

fn sphere(g: &mut Genome, _: &EvalContext) -> f64 {
    -g.weights.squared_norm()
}

fn evolution_sanity() -> Check {
    let space = operator_space(true);
    let cfg = EvolutionConfig {
        population_size: 16,
        generations: 20,
        sigma: 0.1,
        elitism_count: 1,
        arch_mutation_prob: 0.0,
        master_seed: 42,
        ..Default::default()
    };
    let start = Instant::now();
    let one = RayonPool::new(1).map_err(fail)?;
    let four = RayonPool::new(4).map_err(fail)?;
    let a = Evolution::new(&cfg, &space, &sphere, &one).map_err(fail)?.run().map_err(fail)?;
    let b = Evolution::new(&cfg, &space, &sphere, &four).map_err(fail)?.run().map_err(fail)?;
    let elapsed = start.elapsed();
    let first = a.history[0].best_fitness;
    let last = a.history[cfg.generations as usize].best_fitness;
    let gain = (last - first) / first.abs();
    ensure(gain >= 0.5, || format!("best fitness {first:.4} -> {last:.4}, gain {:.1}%", 100.0 * gain))?;
    ensure(a.history.windows(2).all(|w| w[1].best_fitness >= w[0].best_fitness), || "best fitness decreased".into())?;
    let bits = |o: &EvolutionOutcome| o.history.iter().map(|h| (h.best_fitness.to_bits(), h.mean_fitness.to_bits())).collect::<Vec<_>>();
    ensure(bits(&a) == bits(&b) && a == b, || "1 and 4 workers disagree".into())?;
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:.1?}"))?;
    Ok(format!("best {first:.3} -> {last:.3} ({:.1}% better), monotone, 1 vs 4 workers identical, {elapsed:.1?}", 100.0 * gain))
}

/// Nearest integer in `[lo, hi]`, halves resolved away from zero.
fn nearest_bin(s: f64, lo: i32, hi: i32) -> i32 {
    let mut best = lo;
    for k in lo..=hi {
        let (d, bd) = ((s - k as f64).abs(), (s - best as f64).abs());
        if d < bd || (d == bd && (k as f64).abs() > (best as f64).abs()) {
            best = k;
        }
    }
    best
}

fn oracle_accuracy(preds: &[f64], labels: &[f64], bin: impl Fn(f64) -> i32) -> f64 {
    let hits = preds.iter().zip(labels).filter(|(p, y)| bin(**p) == bin(**y)).count();
    100.0 * hits as f64 / preds.len() as f64
}

fn oracle_f1(preds: &[usize], labels: &[usize], k: usize) -> (Vec<f64>, f64) {
    let mut f1 = Vec::new();
    let mut weighted = 0.0;
    for c in 0..k {
        let (mut tp, mut fp, mut fn_, mut support) = (0.0, 0.0, 0.0, 0.0);
        for (&p, &y) in preds.iter().zip(labels) {
            support += f64::from(y == c);
            match (p == c, y == c) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fn_ += 1.0,
                _ => {}
            }
        }
        let denom = 2.0 * tp + fp + fn_;
        let f = if denom > 0.0 { 2.0 * tp / denom } else { 0.0 };
        f1.push(f);
        weighted += f * support;
    }
    (f1, 100.0 * weighted / preds.len() as f64)
}

fn metrics_oracle() -> Check {
    let mut rng = rng::stream(99, &[]);
    let mut worst = 0.0f64;
    for set in 0..200 {
        let n = rng.random_range(1..60);
        let k = rng.random_range(2..7);
        let score = |rng: &mut ChaCha8Rng| {
            if rng.random_bool(0.2) {
                rng.random_range(-8i32..=8) as f64 * 0.5
            } else {
                rng.random_range(-4.0..4.0)
            }
        };
        let preds: Vec<f64> = (0..n).map(|_| score(&mut rng)).collect();
        let labels: Vec<f64> = (0..n).map(|_| score(&mut rng).clamp(-3.0, 3.0)).collect();
        let cp: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let cl: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let r = MetricsReport::compute(&preds, &labels, &cp, &cl, k).map_err(fail)?;
        let (f1, wf1) = oracle_f1(&cp, &cl, k);
        let mae = preds.iter().zip(&labels).map(|(p, y)| (p - y).abs()).sum::<f64>() / n as f64;
        let mut diffs = vec![
            r.acc7 - oracle_accuracy(&preds, &labels, |s| nearest_bin(s, -3, 3)),
            r.acc5 - oracle_accuracy(&preds, &labels, |s| nearest_bin(s, -2, 2)),
            r.acc2 - oracle_accuracy(&preds, &labels, |s| i32::from(s >= 0.0)),
            r.mae - mae,
            r.weighted_f1 - wf1,
        ];
        diffs.extend(r.per_class_f1.iter().zip(&f1).map(|(a, b)| a - b));
        let max = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        worst = worst.max(max);
        ensure(max <= 1e-9, || format!("set {set}: deviation {max:e}"))?;
    }
    let hand = f1_metrics(&[0, 0, 1], &[0, 1, 1], 2).map_err(fail)?.weighted_f1;
    ensure((hand - 200.0 / 3.0).abs() <= 1e-9, || format!("hand-computed case gave {hand}"))?;
    Ok(format!("200 sets, max deviation {worst:.1e}; hand case weighted-F1 {hand:.2}%"))
}

fn benchmark_config(out: &Path, mode: AblationMode) -> RunConfig {
    RunConfig { seeds: (0..5).collect(), ablation: mode, output_dir: out.join(mode.name()), ..Default::default() }
}

fn acc2(s: &ExperimentSummary) -> Result<f64, String> {
    s.aggregate.acc2.map(|a| a.mean).ok_or_else(|| "no successful seeds".into())
}

fn mae(s: &ExperimentSummary) -> Result<f64, String> {
    s.aggregate.mae.map(|a| a.mean).ok_or_else(|| "no successful seeds".into())
}

fn end_to_end(full: &ExperimentSummary, elapsed: Duration) -> Check {
    ensure(full.aggregate.n_failed == 0, || format!("{} seeds failed", full.aggregate.n_failed))?;
    let acc = acc2(full)?;
    let majority: Vec<f64> = full.seeds.iter().filter_map(|s| s.majority_acc2).collect();
    let base = majority.iter().sum::<f64>() / majority.len() as f64;
    let lift = acc - base;
    ensure(lift >= 15.0, || format!("Acc-2 {acc:.2}% vs majority {base:.2}%: +{lift:.2} pp"))?;
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:.1?}"))?;
    Ok(format!("Acc-2 {acc:.2}% vs majority {base:.2}% (+{lift:.2} pp), {elapsed:.1?}"))
}

fn ablation_ordering(full: &ExperimentSummary, out: &Path) -> Check {
    let (full_acc, full_mae) = (acc2(full)?, mae(full)?);
    let mut lines = Vec::new();
    let mut violations = Vec::new();
    for mode in AblationMode::ALL.into_iter().filter(|&m| m != AblationMode::Full) {
        let s = run_experiment(&benchmark_config(out, mode), |_| {}).map_err(fail)?;
        let (d_acc, d_mae) = (full_acc - acc2(&s)?, mae(&s)? - full_mae);
        lines.push(format!("{}: dAcc-2 {d_acc:+.2} pp, dMAE {d_mae:+.4}", mode.name()));
        if d_acc < 0.0 {
            violations.push(format!("{} Acc-2", mode.name()));
        }
        if d_mae < 0.0 {
            violations.push(format!("{} MAE", mode.name()));
        }
    }
    let detail = format!("full Acc-2 {full_acc:.2}%, MAE {full_mae:.4}; margins (full minus ablation, positive favours full) {}", lines.join("; "));
    if violations.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; full loses on {}", violations.join(", ")))
    }
}

fn determinism(out: &Path) -> Check {
    let run = |dir: &str| -> Result<Vec<u8>, String> {
        let mut cfg = RunConfig::default();
        cfg.generator.n = 400;
        cfg.evolution.population_size = 4;
        cfg.evolution.generations = 2;
        cfg.evolution.inner_epochs = 1;
        cfg.seeds = vec![7, 8];
        cfg.output_dir = out.join("determinism");
        run_experiment(&cfg, |_| {}).map_err(fail)?;
        let path = cfg.output_dir.join("metrics_summary.json");
        let bytes = std::fs::read(&path).map_err(fail)?;
        std::fs::rename(&path, out.join(dir)).map_err(fail)?;
        Ok(bytes)
    };
    let (a, b) = (run("first.json")?, run("second.json")?);
    ensure(a == b, || "metrics_summary.json differs between runs".into())?;
    Ok(format!("two invocations, {} identical bytes", a.len()))
}

fn uniform_anchor() -> Check {
    let data = generate_synthetic(&GeneratorSpec { n: 400, ..Default::default() }, 5).map_err(fail)?;
    let setup = ExperimentSetup::default();
    let spec = GeneratorSpec::default();
    let space = setup.genome_space(spec.d_t, spec.d_a, spec.d_v).map_err(fail)?;
    let trainer = GenomeTrainer::new(&space, &data, &setup.loss, &setup.train, 0).map_err(fail)?;
    let mut genome = space.zero_genome();
    let eval = trainer.evaluate(&mut genome, &EvalContext { generation: 0, member: 0, seed: 1 });
    let report = eval.report.ok_or("no loss report")?;
    let ce = report.task_losses[1];
    let err = (ce - 7f64.ln()).abs();
    ensure(err <= 1e-6, || format!("7-class CE {ce} vs ln 7, error {err:e}"))?;
    Ok(format!("7-class CE {ce:.12} (ln 7 error {err:.1e}), fitness {:.6}", eval.fitness))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let out = tmp.path();
    let mut gating_failures = Vec::new();
    let mut report = |id: u32, name: &str, gating: bool, result: Check| {
        let (status, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                if gating {
                    gating_failures.push(id);
                }
                ("FAIL", d)
            }
        };
        println!("criterion {id}: {status} {name}: {detail}");
    };

    report(1, "gradient suite", true, gradients());
    report(2, "KL suite", true, kl_suite());
    report(3, "operator algebra", true, operator_algebra());
    report(4, "evolution sanity", true, evolution_sanity());
    report(5, "metrics oracle", true, metrics_oracle());

    let start = Instant::now();
    let full = run_experiment(&benchmark_config(out, AblationMode::Full), |_| {});
    let elapsed = start.elapsed();
    match full {
        Ok(full) => {
            report(6, "end-to-end learning", true, end_to_end(&full, elapsed));
            report(7, "ablation ordering", false, ablation_ordering(&full, out));
        }
        Err(e) => {
            report(6, "end-to-end learning", true, Err(e.to_string()));
            report(7, "ablation ordering", false, Err(e.to_string()));
        }
    }

    report(8, "determinism", true, determinism(out));
    report(9, "uniform-predictor anchor", true, uniform_anchor());

    if !gating_failures.is_empty() {
        eprintln!("gating criteria failed: {gating_failures:?}");
        std::process::exit(1);
    }
}

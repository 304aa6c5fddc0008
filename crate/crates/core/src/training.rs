//! Inner-loop gradient training, evaluation, ablation modes and the per-seed
//! pipeline that ties evolution and training together.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetSplit, MultimodalSample};
use crate::error::{config, shape};
use crate::evolution::{
    EvalContext, Evaluation, Evolution, EvolutionConfig, FitnessFn, GenerationStats, Genome, GenomeSpace, ModelTemplate,
    Parallelism, SearchSpace,
};
use crate::metrics::MetricsReport;
use crate::model::{FusionKind, HaenConfig, HaenModel, OutputGrads, Stream, TaskOutput, Trace};
use crate::nn::AdamState;
use crate::objectives::{
    kl_divergence, kl_divergence_grad_q, task_loss, task_loss_grad, LabelField, LossConfig, LossParts, LossReport,
    Objective, Prediction, Target, TaskKind,
};
use crate::rng::{self, tags};
use crate::{math, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 0.003, batch_size: 32 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(config("lr must be positive"));
        }
        if self.batch_size == 0 {
            return Err(config("batch_size must be at least 1"));
        }
        Ok(())
    }
}

/// Source of the shared-probe distributions used as KL targets.
#[derive(Debug, Clone, Copy)]
pub enum Teacher<'a> {
    /// Computed in the same forward pass (treated as constants).
    Live,
    /// Supplied externally, one distribution per sample.
    Frozen(&'a [Vec<f64>]),
}

fn class_of(t: Target) -> Result<usize> {
    match t {
        Target::Class(c) => Ok(c),
        Target::Value(_) => Err(shape("transfer task must be a classification task")),
    }
}

fn prediction(out: &TaskOutput) -> Prediction<'_> {
    match out {
        TaskOutput::Probabilities(p) => Prediction::Distribution(p),
        TaskOutput::Scalar(v) => Prediction::Value(*v),
    }
}

/// Batch-mean objective. When `grads` is given, `∂ total / ∂θ` is accumulated
/// into it.
pub fn batch_objective(
    model: &HaenModel,
    batch: &[&MultimodalSample],
    cfg: &LossConfig,
    teacher: Teacher<'_>,
    grads: Option<&mut [f64]>,
) -> Result<LossReport> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(shape("empty batch"));
    }
    let mc = model.config();
    let tasks = &mc.tasks;
    let nt = tasks.len();
    if nt != cfg.lambdas.len() {
        return Err(shape(format!("model has {nt} tasks, loss config expects {}", cfg.lambdas.len())));
    }
    if let Teacher::Frozen(f) = teacher {
        if f.len() != batch.len() {
            return Err(shape("one frozen teacher distribution per sample expected"));
        }
    }
    let active = |t: usize| cfg.single_task.is_none_or(|k| k == t);
    let eps = cfg.kl_epsilon;
    let inv_b = 1.0 / batch.len() as f64;
    let transfer_desc = &tasks[mc.transfer_task];

    let mut outputs = Vec::with_capacity(batch.len());
    let mut traces: Vec<Trace> = Vec::new();
    for s in batch {
        if grads.is_some() {
            let (out, trace) = model.forward_traced(&s.inputs, cfg.kl_temperature)?;
            outputs.push(out);
            traces.push(trace);
        } else {
            outputs.push(model.forward_full(&s.inputs, cfg.kl_temperature)?);
        }
    }

    let mut mean_logits = vec![0.0; nt];
    for out in &outputs {
        for (m, l) in mean_logits.iter_mut().zip(&out.scorer_logits) {
            *m += l * inv_b;
        }
    }
    let attention = match cfg.single_task {
        Some(k) => (0..nt).map(|t| if t == k { 1.0 } else { 0.0 }).collect(),
        None => model.attention_from_logits(&mean_logits),
    };

    let mut task_losses = vec![0.0; nt];
    let mut kl = [0.0; 3];
    let mut teacher_ce = 0.0;
    for (i, (s, out)) in batch.iter().zip(&outputs).enumerate() {
        for (t, desc) in tasks.iter().enumerate() {
            if active(t) {
                task_losses[t] += task_loss(desc, prediction(&out.dists.tasks[t]), s.labels.target(desc.target), eps)? * inv_b;
            }
        }
        let p_s = match teacher {
            Teacher::Live => &out.dists.streams[Stream::Shared.index()],
            Teacher::Frozen(f) => &f[i],
        };
        for (k, m) in Stream::MODALITIES.iter().enumerate() {
            kl[k] += kl_divergence(p_s, &out.dists.streams[m.index()], eps)? * inv_b;
        }
        let c = class_of(s.labels.target(transfer_desc.target))?;
        let own = &out.dists.streams[Stream::Shared.index()];
        if c >= own.len() {
            return Err(Error::Label { label: c, num_classes: own.len() });
        }
        teacher_ce += -math::ln(own[c].max(eps)) * inv_b;
    }
    let parts = LossParts { task_losses, attention, kl, teacher_ce };
    let report = LossReport::from_parts(&parts, cfg)?;

    if let Some(grads) = grads {
        if grads.len() != model.param_count() {
            return Err(shape("gradient buffer length differs from parameter count"));
        }
        let attention_objective = cfg.objective == Objective::AttentionWeighted;
        let coef: Vec<f64> = (0..nt)
            .map(|t| match (active(t), attention_objective) {
                (false, _) => 0.0,
                (true, true) => parts.attention[t],
                (true, false) => cfg.lambdas[t],
            })
            .collect();
        let gw = cfg.transfer_weight();
        let scorer_grad = if attention_objective && cfg.single_task.is_none() && mc.task_attention {
            let w = &parts.attention;
            let mean = math::dot(w, &parts.task_losses);
            w.iter().zip(&parts.task_losses).map(|(wi, l)| wi * (l - mean) * inv_b).collect()
        } else {
            Vec::new()
        };
        for (i, ((s, out), trace)) in batch.iter().zip(&outputs).zip(&traces).enumerate() {
            let mut og = OutputGrads::new(nt);
            for (t, desc) in tasks.iter().enumerate() {
                if coef[t] != 0.0 {
                    let g = task_loss_grad(desc, prediction(&out.dists.tasks[t]), s.labels.target(desc.target), eps)?;
                    og.tasks[t] = g.into_iter().map(|v| v * coef[t] * inv_b).collect();
                }
            }
            if gw != 0.0 {
                let p_s = match teacher {
                    Teacher::Live => &out.dists.streams[Stream::Shared.index()],
                    Teacher::Frozen(f) => &f[i],
                };
                for m in Stream::MODALITIES {
                    let g = kl_divergence_grad_q(p_s, &out.dists.streams[m.index()], eps);
                    og.probes[m.index()] = g.into_iter().map(|v| v * gw * inv_b).collect();
                }
                let own = &out.dists.streams[Stream::Shared.index()];
                let c = class_of(s.labels.target(transfer_desc.target))?;
                let mut g = vec![0.0; own.len()];
                if own[c] > eps {
                    g[c] = -gw * inv_b / own[c];
                }
                og.probes[Stream::Shared.index()] = g;
            }
            og.scorer_logits = scorer_grad.clone();
            model.backward(trace, &og, grads)?;
        }
    }
    Ok(report)
}

/// Loss over a whole split evaluated as a single batch.
pub fn evaluate_loss(model: &HaenModel, samples: &[MultimodalSample], cfg: &LossConfig) -> Result<LossReport> {
    if samples.is_empty() {
        return Err(config("cannot evaluate on an empty split"));
    }
    let refs: Vec<&MultimodalSample> = samples.iter().collect();
    batch_objective(model, &refs, cfg, Teacher::Live, None)
}

fn weighted_mean(reports: &[(LossReport, usize)], cfg: &LossConfig) -> Result<LossReport> {
    let n: usize = reports.iter().map(|(_, k)| k).sum();
    let first = &reports[0].0;
    let mut parts = LossParts {
        task_losses: vec![0.0; first.task_losses.len()],
        attention: vec![0.0; first.attention.len()],
        kl: [0.0; 3],
        teacher_ce: 0.0,
    };
    let mut total = 0.0;
    for (r, k) in reports {
        let w = *k as f64 / n as f64;
        let p = r.parts();
        for (a, b) in parts.task_losses.iter_mut().zip(&p.task_losses) {
            *a += w * b;
        }
        for (a, b) in parts.attention.iter_mut().zip(&p.attention) {
            *a += w * b;
        }
        for (a, b) in parts.kl.iter_mut().zip(&p.kl) {
            *a += w * b;
        }
        parts.teacher_ce += w * p.teacher_ce;
        total += w * r.total;
    }
    let mut out = LossReport::from_parts(&parts, cfg)?;
    out.total = total;
    Ok(out)
}

/// Per-epoch training summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Sample-weighted mean of the batch reports of each epoch.
    pub epochs: Vec<LossReport>,
    pub steps: u64,
}

/// Minibatch Adam on the joint objective. `epochs = 0` leaves the model untouched.
pub fn train_inner<R: Rng + ?Sized>(
    model: &mut HaenModel,
    train: &[MultimodalSample],
    epochs: u32,
    loss: &LossConfig,
    opts: &TrainConfig,
    rng: &mut R,
) -> Result<TrainLog> {
    opts.validate()?;
    loss.validate()?;
    let mut log = TrainLog { epochs: Vec::with_capacity(epochs as usize), steps: 0 };
    if epochs == 0 {
        return Ok(log);
    }
    if train.is_empty() {
        return Err(config("training split is empty"));
    }
    let mut params = model.params().into_values();
    let mut grads = vec![0.0; params.len()];
    let mut adam = AdamState::new(params.len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..epochs {
        order.shuffle(rng);
        let mut reports = Vec::new();
        for (b, chunk) in order.chunks(opts.batch_size).enumerate() {
            let batch: Vec<&MultimodalSample> = chunk.iter().map(|&i| &train[i]).collect();
            grads.iter_mut().for_each(|g| *g = 0.0);
            let report = batch_objective(model, &batch, loss, Teacher::Live, Some(&mut grads))?;
            if !report.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite { epoch: epoch as usize, batch: b });
            }
            adam.step(&mut params, &grads, opts.lr)?;
            model.load_flat(&params)?;
            log.steps += 1;
            reports.push((report, batch.len()));
        }
        log.epochs.push(weighted_mean(&reports, loss)?);
    }
    Ok(log)
}

/// Model outputs for one sample used by metrics and embedding dumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePrediction {
    pub id: String,
    pub sentiment: f64,
    pub sentiment_label: f64,
    pub emotion: usize,
    pub emotion_label: usize,
    /// Final-level shared representation.
    pub embedding: Vec<f64>,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Sentiment score: the regression head when it is trained, otherwise the
/// expected 7-class label shifted to `[-3, 3]`.
pub fn predict(model: &HaenModel, sample: &MultimodalSample, loss: &LossConfig) -> Result<SamplePrediction> {
    let out = model.forward_full(&sample.inputs, loss.kl_temperature)?;
    let tasks = &model.config().tasks;
    let active = |t: usize| loss.single_task.is_none_or(|k| k == t);
    let regression = tasks
        .iter()
        .position(|d| d.kind == TaskKind::Regression && d.target == LabelField::Sentiment)
        .filter(|&t| active(t));
    let sentiment = match regression {
        Some(t) => match &out.dists.tasks[t] {
            TaskOutput::Scalar(v) => *v,
            TaskOutput::Probabilities(_) => return Err(shape("regression task produced a distribution")),
        },
        None => {
            let t = tasks
                .iter()
                .position(|d| d.target == LabelField::Class7)
                .ok_or_else(|| config("no task predicts sentiment"))?;
            match &out.dists.tasks[t] {
                TaskOutput::Probabilities(p) => p.iter().enumerate().map(|(k, pk)| pk * (k as f64 - 3.0)).sum(),
                TaskOutput::Scalar(_) => return Err(shape("7-class task produced a scalar")),
            }
        }
    };
    let e = tasks
        .iter()
        .position(|d| d.target == LabelField::Emotion)
        .ok_or_else(|| config("no emotion task"))?;
    let emotion = match &out.dists.tasks[e] {
        TaskOutput::Probabilities(p) => argmax(p),
        TaskOutput::Scalar(_) => return Err(shape("emotion task produced a scalar")),
    };
    Ok(SamplePrediction {
        id: sample.id.clone(),
        sentiment,
        sentiment_label: sample.labels.sentiment,
        emotion,
        emotion_label: sample.labels.emotion as usize,
        embedding: out.final_level().get(Stream::Shared).to_vec(),
    })
}

/// Metrics and per-sample predictions over a split.
pub fn evaluate_metrics(
    model: &HaenModel,
    samples: &[MultimodalSample],
    loss: &LossConfig,
) -> Result<(MetricsReport, Vec<SamplePrediction>)> {
    let preds = samples.iter().map(|s| predict(model, s, loss)).collect::<Result<Vec<_>>>()?;
    let classes = model
        .config()
        .tasks
        .iter()
        .find(|d| d.target == LabelField::Emotion)
        .map_or(0, |d| d.num_classes);
    let report = MetricsReport::compute(
        &preds.iter().map(|p| p.sentiment).collect::<Vec<_>>(),
        &preds.iter().map(|p| p.sentiment_label).collect::<Vec<_>>(),
        &preds.iter().map(|p| p.emotion).collect::<Vec<_>>(),
        &preds.iter().map(|p| p.emotion_label).collect::<Vec<_>>(),
        classes,
    )?;
    Ok((report, preds))
}

/// Trains a genome for a fixed number of epochs and scores it by negative
/// validation loss. Trained weights are written back into the genome.
pub struct GenomeTrainer<'a> {
    pub space: &'a GenomeSpace,
    pub train: &'a [MultimodalSample],
    pub val: &'a [MultimodalSample],
    pub loss: &'a LossConfig,
    pub opts: &'a TrainConfig,
    pub epochs: u32,
    steps: AtomicU64,
}

impl<'a> GenomeTrainer<'a> {
    pub fn new(
        space: &'a GenomeSpace,
        data: &'a DatasetSplit,
        loss: &'a LossConfig,
        opts: &'a TrainConfig,
        epochs: u32,
    ) -> Result<Self> {
        if data.train.is_empty() || data.val.is_empty() {
            return Err(config("training and validation splits must be non-empty"));
        }
        loss.validate()?;
        opts.validate()?;
        Ok(Self { space, train: &data.train, val: &data.val, loss, opts, epochs, steps: AtomicU64::new(0) })
    }

    /// Gradient steps taken so far across all evaluations.
    pub fn steps(&self) -> u64 {
        self.steps.load(Ordering::Relaxed)
    }

    /// Trains `genome` in place and returns its validation loss report.
    pub fn train_genome<R: Rng + ?Sized>(&self, genome: &mut Genome, epochs: u32, rng: &mut R) -> Result<(LossReport, TrainLog)> {
        let mut model = HaenModel::from_params(self.space.config_for(&genome.arch), &genome.weights)?;
        let log = train_inner(&mut model, self.train, epochs, self.loss, self.opts, rng)?;
        self.steps.fetch_add(log.steps, Ordering::Relaxed);
        genome.weights = model.params();
        genome.trained_epochs += epochs;
        Ok((evaluate_loss(&model, self.val, self.loss)?, log))
    }
}

impl FitnessFn for GenomeTrainer<'_> {
    fn evaluate(&self, genome: &mut Genome, ctx: &EvalContext) -> Evaluation {
        let mut rng = ctx.rng();
        match self.train_genome(genome, self.epochs, &mut rng) {
            Ok((report, _)) if report.total.is_finite() => Evaluation { fitness: -report.total, report: Some(report) },
            Ok((report, _)) => Evaluation { fitness: f64::NEG_INFINITY, report: Some(report) },
            Err(_) => Evaluation { fitness: f64::NEG_INFINITY, report: None },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    Full,
    NoHierarchy,
    NoEvolution,
    NoCrossmodal,
    NoMtl,
}

impl AblationMode {
    pub const ALL: [AblationMode; 5] =
        [Self::Full, Self::NoHierarchy, Self::NoEvolution, Self::NoCrossmodal, Self::NoMtl];

    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::NoHierarchy => "no_hierarchy",
            Self::NoEvolution => "no_evolution",
            Self::NoCrossmodal => "no_crossmodal",
            Self::NoMtl => "no_mtl",
        }
    }
}

/// How the outer loop is run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterLoop {
    Evolve,
    /// Train the default genome once for this many epochs.
    SingleGenome { epochs: u32 },
}

/// Everything a single-seed run needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSetup {
    pub evolution: EvolutionConfig,
    pub loss: LossConfig,
    pub train: TrainConfig,
    pub search: SearchSpace,
    pub fusion: FusionKind,
    pub cross_modal: bool,
    pub task_attention: bool,
    pub outer_loop: OuterLoop,
}

impl Default for ExperimentSetup {
    fn default() -> Self {
        Self {
            evolution: EvolutionConfig::default(),
            loss: LossConfig::default(),
            train: TrainConfig::default(),
            search: SearchSpace::default(),
            fusion: FusionKind::Hierarchical,
            cross_modal: true,
            task_attention: true,
            outer_loop: OuterLoop::Evolve,
        }
    }
}

impl ExperimentSetup {
    pub fn validate(&self) -> Result<()> {
        self.evolution.validate()?;
        self.loss.validate()?;
        self.train.validate()?;
        self.search.validate()
    }

    pub fn genome_space(&self, d_t: usize, d_a: usize, d_v: usize) -> Result<GenomeSpace> {
        let mut template = ModelTemplate::new(d_t, d_a, d_v);
        template.fusion = self.fusion;
        template.cross_modal = self.cross_modal;
        template.task_attention = self.task_attention;
        GenomeSpace::new(self.search.clone(), template)
    }
}

/// Applies one ablation to a setup. Each mode disables exactly one mechanism.
pub fn apply_ablation(mode: AblationMode, base: &ExperimentSetup) -> ExperimentSetup {
    let mut s = base.clone();
    match mode {
        AblationMode::Full => {}
        AblationMode::NoHierarchy => {
            s.fusion = FusionKind::ConcatLinear;
            s.search.levels = crate::evolution::GeneRange::new(1, 1);
        }
        AblationMode::NoEvolution => {
            let epochs = s.evolution.generations * s.evolution.inner_epochs;
            s.outer_loop = OuterLoop::SingleGenome { epochs };
        }
        AblationMode::NoCrossmodal => {
            s.loss.gamma = 0.0;
            s.loss.beta = 0.0;
            s.cross_modal = false;
        }
        AblationMode::NoMtl => {
            s.loss.lambdas = [0.0, 1.0, 0.0, 0.0];
            s.loss.single_task = Some(1);
            s.task_attention = false;
        }
    }
    s
}

/// Outcome of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub config: HaenConfig,
    pub best: Genome,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
    /// One loss report per outer step: per generation when evolving, per
    /// epoch otherwise.
    pub run_log: Vec<LossReport>,
    pub test_metrics: MetricsReport,
    pub predictions: Vec<SamplePrediction>,
    pub operator_calls: u64,
    pub gradient_steps: u64,
}

/// Runs the outer loop for one seed and evaluates the winner on the test split.
pub fn run_seed<P: Parallelism>(setup: &ExperimentSetup, data: &DatasetSplit, seed: u64, par: &P) -> Result<SeedOutcome> {
    setup.validate()?;
    data.validate()?;
    if data.test.is_empty() {
        return Err(config("test split is empty"));
    }
    let h = &data.header;
    let space = setup.genome_space(h.d_t, h.d_a, h.d_v)?;
    let mut evo = setup.evolution.clone();
    evo.master_seed = seed;

    let (best, best_fitness, history, run_log, operator_calls, gradient_steps) = match setup.outer_loop {
        OuterLoop::Evolve => {
            let trainer = GenomeTrainer::new(&space, data, &setup.loss, &setup.train, evo.inner_epochs)?;
            let outcome = Evolution::new(&evo, &space, &trainer, par)?.run()?;
            let log = outcome.history.iter().filter_map(|h| h.best_report.clone()).collect();
            let fit = outcome.best.fitness.unwrap_or(f64::NEG_INFINITY);
            (outcome.best.genome, fit, outcome.history, log, outcome.operator_calls, trainer.steps())
        }
        OuterLoop::SingleGenome { epochs } => {
            let trainer = GenomeTrainer::new(&space, data, &setup.loss, &setup.train, epochs)?;
            let mut genome = space.default_genome(&mut rng::stream(seed, &[tags::INIT, 0]));
            let mut r = rng::stream(seed, &[tags::EVALUATION, 0, 0]);
            let (report, log) = trainer.train_genome(&mut genome, epochs, &mut r)?;
            let fitness = if report.total.is_finite() { -report.total } else { f64::NEG_INFINITY };
            let stats = GenerationStats {
                generation: 0,
                best_fitness: fitness,
                mean_fitness: fitness,
                best_arch: genome.arch.summary(),
                best_report: Some(report),
            };
            (genome, fitness, vec![stats], log.epochs, 0, trainer.steps())
        }
    };

    let config = space.config_for(&best.arch);
    let model = HaenModel::from_params(config.clone(), &best.weights)?;
    let (test_metrics, predictions) = evaluate_metrics(&model, &data.test, &setup.loss)?;
    Ok(SeedOutcome {
        seed,
        config,
        best,
        best_fitness,
        history,
        run_log,
        test_metrics,
        predictions,
        operator_calls,
        gradient_steps,
    })
}

/// Accuracy of always predicting the majority sign of the training labels,
/// measured on the test split, in percent.
pub fn majority_acc2(data: &DatasetSplit) -> f64 {
    let pos = data.train.iter().filter(|s| s.labels.sentiment >= 0.0).count();
    let majority_pos = 2 * pos >= data.train.len();
    let hits = data.test.iter().filter(|s| (s.labels.sentiment >= 0.0) == majority_pos).count();
    100.0 * hits as f64 / data.test.len().max(1) as f64
}

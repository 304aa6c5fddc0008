//! Task losses, the attention-weighted multi-task loss, KL transfer losses and
//! the joint objective.
//!
//! Two joint objectives are available:
//!
//! - [`Objective::LambdaWeighted`] (default):
//!   `Σ_k λ_k L_k + γ (KL_t + KL_a + KL_v + CE_s)`
//! - [`Objective::AttentionWeighted`]: `Σ_k w_k L_k + β (KL_t + KL_a + KL_v + CE_s)`
//!
//! `KL_m = KL(p_s ‖ p_m)` with the shared distribution `p_s` treated as a
//! constant target. `CE_s` is the cross-entropy of the shared probe against
//! the transfer task's label; it is what trains the teacher, since no
//! gradient reaches it through the KL terms.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{config, shape};
use crate::{math, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossFn {
    Mse,
    CrossEntropy,
}

/// Which field of a label bundle a task predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelField {
    Sentiment,
    Class7,
    Class2,
    Emotion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDescriptor {
    pub id: String,
    pub kind: TaskKind,
    /// Number of classes; 1 for regression.
    pub num_classes: usize,
    pub loss_fn: LossFn,
    pub target: LabelField,
}

impl TaskDescriptor {
    pub fn regression(id: &str, target: LabelField) -> Self {
        Self { id: id.to_string(), kind: TaskKind::Regression, num_classes: 1, loss_fn: LossFn::Mse, target }
    }

    pub fn classification(id: &str, num_classes: usize, target: LabelField) -> Self {
        Self {
            id: id.to_string(),
            kind: TaskKind::Classification,
            num_classes,
            loss_fn: LossFn::CrossEntropy,
            target,
        }
    }

    /// Width of the tower's output head.
    pub fn output_dim(&self) -> usize {
        match self.kind {
            TaskKind::Regression => 1,
            TaskKind::Classification => self.num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, self.loss_fn) {
            (TaskKind::Classification, LossFn::CrossEntropy) if self.num_classes >= 2 => Ok(()),
            (TaskKind::Classification, LossFn::CrossEntropy) => {
                Err(config(format!("task {}: classification needs >= 2 classes", self.id)))
            }
            (TaskKind::Regression, LossFn::Mse) => Ok(()),
            _ => Err(config(format!("task {}: loss does not fit task kind", self.id))),
        }
    }
}

/// Sentiment intensity, 7-class sentiment, binary sentiment, 6-class emotion.
pub fn default_tasks() -> Vec<TaskDescriptor> {
    vec![
        TaskDescriptor::regression("sentiment", LabelField::Sentiment),
        TaskDescriptor::classification("sentiment7", 7, LabelField::Class7),
        TaskDescriptor::classification("sentiment2", 2, LabelField::Class2),
        TaskDescriptor::classification("emotion", 6, LabelField::Emotion),
    ]
}

/// Index of the 7-class task within [`default_tasks`].
pub const DEFAULT_TRANSFER_TASK: usize = 1;

/// A task's ground truth for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Value(f64),
    Class(usize),
}

/// A task's prediction for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction<'a> {
    Value(f64),
    Distribution(&'a [f64]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    LambdaWeighted,
    AttentionWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub lambdas: [f64; 4],
    pub gamma: f64,
    pub beta: f64,
    pub kl_epsilon: f64,
    pub kl_temperature: f64,
    pub objective: Objective,
    /// When set, only this task's loss is computed and attention is bypassed.
    pub single_task: Option<usize>,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambdas: [1.0; 4],
            gamma: 0.5,
            beta: 0.5,
            kl_epsilon: 1e-8,
            kl_temperature: 1.0,
            objective: Objective::LambdaWeighted,
            single_task: None,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let negative = |v: f64| !(v.is_finite() && v >= 0.0);
        if self.lambdas.iter().any(|&l| negative(l)) {
            return Err(config("lambdas must be finite and >= 0"));
        }
        if !self.lambdas.iter().any(|&l| l > 0.0) {
            return Err(config("at least one lambda must be > 0"));
        }
        if negative(self.gamma) || negative(self.beta) {
            return Err(config("gamma and beta must be finite and >= 0"));
        }
        if !(self.kl_epsilon > 0.0 && self.kl_epsilon <= 1e-3) {
            return Err(config("kl_epsilon must lie in (0, 1e-3]"));
        }
        if !(self.kl_temperature.is_finite() && self.kl_temperature > 0.0) {
            return Err(config("kl_temperature must be > 0"));
        }
        if let Some(k) = self.single_task {
            if k >= self.lambdas.len() {
                return Err(config("single_task index out of range"));
            }
        }
        Ok(())
    }

    /// Weight of the transfer terms under the selected objective.
    pub fn transfer_weight(&self) -> f64 {
        match self.objective {
            Objective::LambdaWeighted => self.gamma,
            Objective::AttentionWeighted => self.beta,
        }
    }
}

/// Inputs to [`total_loss`]: batch-mean component losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub task_losses: Vec<f64>,
    pub attention: Vec<f64>,
    /// `[KL_t, KL_a, KL_v]`.
    pub kl: [f64; 3],
    /// Cross-entropy of the shared probe.
    pub teacher_ce: f64,
}

/// Every loss component of one evaluation plus the scalar total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub task_losses: Vec<f64>,
    pub attention: Vec<f64>,
    pub mtl: f64,
    pub kl_text: f64,
    pub kl_audio: f64,
    pub kl_visual: f64,
    /// `KL_t + KL_a + KL_v`.
    pub transfer: f64,
    pub teacher_ce: f64,
    pub total: f64,
}

impl LossReport {
    pub fn from_parts(parts: &LossParts, cfg: &LossConfig) -> Result<Self> {
        let total = total_loss(parts, cfg)?;
        let (_, _, _, transfer) = transfer_from_kls(parts.kl);
        Ok(Self {
            task_losses: parts.task_losses.clone(),
            attention: parts.attention.clone(),
            mtl: mtl_loss(&parts.task_losses, &parts.attention)?,
            kl_text: parts.kl[0],
            kl_audio: parts.kl[1],
            kl_visual: parts.kl[2],
            transfer,
            teacher_ce: parts.teacher_ce,
            total,
        })
    }

    pub fn parts(&self) -> LossParts {
        LossParts {
            task_losses: self.task_losses.clone(),
            attention: self.attention.clone(),
            kl: [self.kl_text, self.kl_audio, self.kl_visual],
            teacher_ce: self.teacher_ce,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
            && self.task_losses.iter().all(|v| v.is_finite())
            && self.transfer.is_finite()
            && self.teacher_ce.is_finite()
    }
}

/// Squared error for regression, clamped negative log-likelihood for classification.
pub fn task_loss(desc: &TaskDescriptor, prediction: Prediction<'_>, target: Target, eps: f64) -> Result<f64> {
    match (desc.kind, prediction, target) {
        (TaskKind::Regression, Prediction::Value(p), Target::Value(y)) => Ok((p - y) * (p - y)),
        (TaskKind::Classification, Prediction::Distribution(p), Target::Class(c)) => {
            if p.len() != desc.num_classes {
                return Err(Error::InputShape { expected: desc.num_classes, got: p.len() });
            }
            if c >= desc.num_classes {
                return Err(Error::Label { label: c, num_classes: desc.num_classes });
            }
            Ok(-math::ln(p[c].max(eps)))
        }
        _ => Err(shape(format!("prediction/target types do not match task {}", desc.id))),
    }
}

/// Derivative of [`task_loss`] with respect to the prediction.
pub(crate) fn task_loss_grad(desc: &TaskDescriptor, prediction: Prediction<'_>, target: Target, eps: f64) -> Result<Vec<f64>> {
    match (desc.kind, prediction, target) {
        (TaskKind::Regression, Prediction::Value(p), Target::Value(y)) => Ok(vec![2.0 * (p - y)]),
        (TaskKind::Classification, Prediction::Distribution(p), Target::Class(c)) => {
            if c >= p.len() {
                return Err(Error::Label { label: c, num_classes: p.len() });
            }
            let mut g = vec![0.0; p.len()];
            if p[c] > eps {
                g[c] = -1.0 / p[c];
            }
            Ok(g)
        }
        _ => Err(shape(format!("prediction/target types do not match task {}", desc.id))),
    }
}

/// `Σ_t w_t L_t`.
pub fn mtl_loss(losses: &[f64], weights: &[f64]) -> Result<f64> {
    if losses.len() != weights.len() {
        return Err(shape(format!("{} losses vs {} weights", losses.len(), weights.len())));
    }
    Ok(losses.iter().zip(weights).map(|(l, w)| l * w).sum())
}

fn clamp_normalize(p: &[f64], eps: f64) -> (Vec<f64>, f64) {
    let clamped: Vec<f64> = p.iter().map(|&v| v.max(eps)).collect();
    let sum: f64 = clamped.iter().sum();
    (clamped.iter().map(|v| v / sum).collect(), sum)
}

/// `Σ_i p_i ln(p_i / q_i)` after clamping both to `>= eps` and renormalizing.
pub fn kl_divergence(p: &[f64], q: &[f64], eps: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(shape(format!("distributions of length {} and {}", p.len(), q.len())));
    }
    let (p, _) = clamp_normalize(p, eps);
    let (q, _) = clamp_normalize(q, eps);
    Ok(p.iter().zip(&q).map(|(&a, &b)| a * (math::ln(a) - math::ln(b))).sum())
}

/// `∂ KL(p ‖ q) / ∂q` with `p` held constant.
pub(crate) fn kl_divergence_grad_q(p: &[f64], q: &[f64], eps: f64) -> Vec<f64> {
    let (p, _) = clamp_normalize(p, eps);
    let (qn, qsum) = clamp_normalize(q, eps);
    // dKL/dqn_j = -p_j / qn_j; qn = c / Σc with c = max(q, eps).
    let dqn: Vec<f64> = p.iter().zip(&qn).map(|(&a, &b)| -a / b).collect();
    let inner = math::dot(&dqn, &qn);
    q.iter()
        .zip(&dqn)
        .map(|(&raw, &d)| if raw > eps { (d - inner) / qsum } else { 0.0 })
        .collect()
}

fn transfer_from_kls(kl: [f64; 3]) -> (f64, f64, f64, f64) {
    (kl[0], kl[1], kl[2], kl[0] + kl[1] + kl[2])
}

/// `(KL_t, KL_a, KL_v, L_KT)` for one sample's stream distributions, ordered
/// `[p_t, p_a, p_v, p_s]`.
pub fn transfer_loss(streams: &[Vec<f64>], eps: f64) -> Result<(f64, f64, f64, f64)> {
    if streams.len() != 4 || streams.iter().any(Vec::is_empty) {
        return Err(Error::State("transfer loss needs the text, audio, visual and shared distributions".into()));
    }
    let teacher = &streams[3];
    let mut kl = [0.0; 3];
    for (k, student) in kl.iter_mut().zip(&streams[..3]) {
        *k = kl_divergence(teacher, student, eps)?;
    }
    Ok(transfer_from_kls(kl))
}

/// The joint objective selected by `cfg.objective`.
pub fn total_loss(parts: &LossParts, cfg: &LossConfig) -> Result<f64> {
    cfg.validate()?;
    if parts.task_losses.len() != cfg.lambdas.len() {
        return Err(shape(format!(
            "expected {} task losses, got {}",
            cfg.lambdas.len(),
            parts.task_losses.len()
        )));
    }
    let transfer = parts.kl.iter().sum::<f64>() + parts.teacher_ce;
    Ok(match cfg.objective {
        Objective::LambdaWeighted => {
            mtl_loss(&parts.task_losses, &cfg.lambdas)? + cfg.gamma * transfer
        }
        Objective::AttentionWeighted => mtl_loss(&parts.task_losses, &parts.attention)? + cfg.beta * transfer,
    })
}

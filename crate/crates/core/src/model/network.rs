use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::backward::Trace;
use super::{HaenConfig, ModalityInputs, Stream};
use crate::error::{shape, state};
use crate::nn::{Mlp, ParamVector};
use crate::objectives::TaskKind;
use crate::{math, Error, Result};

/// Stream representations at one level, indexed by [`Stream::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelState {
    pub streams: [Vec<f64>; 4],
}

impl LevelState {
    pub fn get(&self, s: Stream) -> &[f64] {
        &self.streams[s.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TaskOutput {
    Probabilities(Vec<f64>),
    Scalar(f64),
}

/// Per-task outputs and the four per-stream probe distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDistributions {
    pub tasks: Vec<TaskOutput>,
    /// `p_t, p_a, p_v, p_s`, indexed by [`Stream::index`].
    pub streams: [Vec<f64>; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// Levels `0..=L`.
    pub levels: Vec<LevelState>,
    pub dists: TaskDistributions,
    pub attention: Vec<f64>,
    pub scorer_logits: Vec<f64>,
}

impl ForwardOutput {
    pub fn final_level(&self) -> &LevelState {
        self.levels.last().expect("at least level 0")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Offsets {
    pub experts: [usize; 4],
    pub fusion: Vec<[usize; 4]>,
    pub scorer: usize,
    pub towers: Vec<usize>,
    pub probes: [usize; 4],
    pub total: usize,
}

/// An instantiated hierarchical expert network.
#[derive(Debug, Clone, PartialEq)]
pub struct HaenModel {
    pub(crate) config: HaenConfig,
    pub(crate) experts: [Mlp; 4],
    pub(crate) fusion: Vec<[Mlp; 4]>,
    pub(crate) scorer: Mlp,
    pub(crate) towers: Vec<Mlp>,
    pub(crate) probes: [Mlp; 4],
    pub(crate) offsets: Offsets,
}

fn take4(it: &mut impl Iterator<Item = Mlp>) -> [Mlp; 4] {
    [(); 4].map(|_| it.next().expect("module spec count"))
}

impl HaenModel {
    fn assemble(config: HaenConfig, mut make: impl FnMut(&super::ModuleSpec) -> Result<Mlp>) -> Result<Self> {
        config.validate()?;
        let nets = config.module_specs().iter().map(&mut make).collect::<Result<Vec<_>>>()?;
        let mut it = nets.into_iter();
        let experts = take4(&mut it);
        let fusion: Vec<[Mlp; 4]> = (0..config.levels).map(|_| take4(&mut it)).collect();
        let scorer = it.next().expect("scorer");
        let towers: Vec<Mlp> = (0..config.tasks.len()).map(|_| it.next().expect("tower")).collect();
        let probes = take4(&mut it);

        let mut at = 0;
        let mut next = |m: &Mlp| {
            let o = at;
            at += m.param_count();
            o
        };
        let e = [0, 1, 2, 3].map(|i| next(&experts[i]));
        let f = fusion.iter().map(|lvl| [0, 1, 2, 3].map(|i| next(&lvl[i]))).collect();
        let s = next(&scorer);
        let t = towers.iter().map(&mut next).collect();
        let p = [0, 1, 2, 3].map(|i| next(&probes[i]));
        let offsets = Offsets { experts: e, fusion: f, scorer: s, towers: t, probes: p, total: at };
        Ok(Self { config, experts, fusion, scorer, towers, probes, offsets })
    }

    /// Every weight and bias zero.
    pub fn zeros(config: HaenConfig) -> Result<Self> {
        Self::assemble(config, |m| Mlp::zeros(m.in_dim, &m.widths, m.hidden, m.output))
    }

    /// Glorot-uniform weights, zero biases.
    pub fn xavier<R: Rng + ?Sized>(config: HaenConfig, rng: &mut R) -> Result<Self> {
        Self::assemble(config, |m| Mlp::xavier(m.in_dim, &m.widths, m.hidden, m.output, rng))
    }

    pub fn from_params(config: HaenConfig, params: &ParamVector) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        model.set_params(params)?;
        Ok(model)
    }

    pub fn config(&self) -> &HaenConfig {
        &self.config
    }

    pub fn param_count(&self) -> usize {
        self.offsets.total
    }

    fn modules(&self) -> impl Iterator<Item = &Mlp> {
        self.experts
            .iter()
            .chain(self.fusion.iter().flatten())
            .chain(core::iter::once(&self.scorer))
            .chain(&self.towers)
            .chain(&self.probes)
    }

    fn modules_mut(&mut self) -> impl Iterator<Item = &mut Mlp> {
        self.experts
            .iter_mut()
            .chain(self.fusion.iter_mut().flatten())
            .chain(core::iter::once(&mut self.scorer))
            .chain(self.towers.iter_mut())
            .chain(self.probes.iter_mut())
    }

    /// Flattened parameters in canonical order.
    pub fn params(&self) -> ParamVector {
        let mut pv = ParamVector::zeros(self.config.param_layout());
        let mut at = 0;
        for m in self.modules() {
            let n = m.param_count();
            m.write_params(&mut pv.values_mut()[at..at + n]);
            at += n;
        }
        pv
    }

    /// Loads parameters; the layout must equal this model's layout.
    pub fn set_params(&mut self, params: &ParamVector) -> Result<()> {
        if params.layout() != self.config.param_layout().as_slice() {
            return Err(shape("parameter layout does not match model architecture"));
        }
        self.load_flat(params.values())
    }

    /// Loads a raw flat slice in canonical order.
    pub fn load_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.offsets.total {
            return Err(shape(format!("expected {} parameters, got {}", self.offsets.total, values.len())));
        }
        let mut at = 0;
        for m in self.modules_mut() {
            let n = m.param_count();
            m.read_params(&values[at..at + n])?;
            at += n;
        }
        Ok(())
    }

    fn check_inputs(&self, inputs: &ModalityInputs) -> Result<()> {
        for s in Stream::MODALITIES {
            let got = inputs.modality(s).map_or(0, <[f64]>::len);
            let expected = self.config.input_dim(s);
            if got != expected {
                return Err(Error::InputShape { expected, got });
            }
        }
        Ok(())
    }

    /// `h_m = f_m(x_m)` for text, audio and visual.
    pub fn encode_modality(&self, inputs: &ModalityInputs) -> Result<[Vec<f64>; 3]> {
        self.check_inputs(inputs)?;
        let mut out: [Vec<f64>; 3] = Default::default();
        for s in Stream::MODALITIES {
            let x = inputs.modality(s).expect("modality stream");
            out[s.index()] = self.experts[s.index()].forward(x, None)?;
        }
        Ok(out)
    }

    /// `h_s = f_s([x_t; x_a; x_v])`.
    pub fn encode_shared(&self, inputs: &ModalityInputs) -> Result<Vec<f64>> {
        self.check_inputs(inputs)?;
        self.experts[Stream::Shared.index()].forward(&inputs.concat(), None)
    }

    /// Level-0 state (all four expert outputs).
    pub fn encode(&self, inputs: &ModalityInputs) -> Result<LevelState> {
        let [t, a, v] = self.encode_modality(inputs)?;
        let s = self.encode_shared(inputs)?;
        Ok(LevelState { streams: [t, a, v, s] })
    }

    pub(crate) fn fusion_input(&self, prev: &LevelState, s: Stream) -> Vec<f64> {
        let mut x = Vec::new();
        for src in self.config.fusion_inputs(s) {
            x.extend_from_slice(prev.get(*src));
        }
        x
    }

    /// Computes level `level` (1-based) from the state at `level - 1`.
    pub fn fuse_level(&self, prev: &LevelState, level: usize) -> Result<LevelState> {
        if level == 0 || level > self.config.levels {
            return Err(state(format!("fusion level {level} outside 1..={}", self.config.levels)));
        }
        let mut streams: [Vec<f64>; 4] = Default::default();
        for s in Stream::ALL {
            let x = self.fusion_input(prev, s);
            streams[s.index()] = self.fusion[level - 1][s.index()].forward(&x, None)?;
        }
        Ok(LevelState { streams })
    }

    pub fn task_logits(&self, shared_final: &[f64]) -> Result<Vec<f64>> {
        self.scorer.forward(shared_final, None)
    }

    /// `softmax(scorer(h_s(L)))`, or uniform weights when attention is off.
    pub fn task_attention_weights(&self, shared_final: &[f64]) -> Result<Vec<f64>> {
        let logits = self.task_logits(shared_final)?;
        Ok(self.attention_from_logits(&logits))
    }

    pub(crate) fn attention_from_logits(&self, logits: &[f64]) -> Vec<f64> {
        if self.config.task_attention {
            math::softmax_scaled(logits, 1.0)
        } else {
            vec![1.0 / logits.len() as f64; logits.len()]
        }
    }

    /// Batch attention: softmax of the batch-mean scorer logits.
    pub fn batch_attention(&self, batch: &[ModalityInputs]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(shape("empty batch"));
        }
        let mut mean = vec![0.0; self.config.tasks.len()];
        for x in batch {
            let out = self.forward_full(x, 1.0)?;
            for (m, l) in mean.iter_mut().zip(&out.scorer_logits) {
                *m += l / batch.len() as f64;
            }
        }
        Ok(self.attention_from_logits(&mean))
    }

    /// Full forward pass; `temperature` scales the probe logits.
    pub fn forward_full(&self, inputs: &ModalityInputs, temperature: f64) -> Result<ForwardOutput> {
        self.run(inputs, temperature, None)
    }

    /// Forward pass that also records what [`HaenModel::backward`] needs.
    pub fn forward_traced(&self, inputs: &ModalityInputs, temperature: f64) -> Result<(ForwardOutput, Trace)> {
        let mut trace = Trace::empty(self);
        let out = self.run(inputs, temperature, Some(&mut trace))?;
        Ok((out, trace))
    }

    fn run(&self, inputs: &ModalityInputs, tau: f64, mut trace: Option<&mut Trace>) -> Result<ForwardOutput> {
        self.check_inputs(inputs)?;
        if tau.is_nan() || tau <= 0.0 {
            return Err(Error::Value("temperature must be > 0".into()));
        }
        let shared_in = inputs.concat();
        let mut level0: [Vec<f64>; 4] = Default::default();
        for s in Stream::ALL {
            let x = inputs.modality(s).unwrap_or(&shared_in);
            let t = trace.as_deref_mut().map(|t| &mut t.experts[s.index()]);
            level0[s.index()] = self.experts[s.index()].forward(x, t)?;
        }
        let mut levels = vec![LevelState { streams: level0 }];
        for level in 1..=self.config.levels {
            let prev = levels.last().expect("previous level");
            let mut streams: [Vec<f64>; 4] = Default::default();
            for s in Stream::ALL {
                let x = self.fusion_input(prev, s);
                let t = trace.as_deref_mut().map(|t| &mut t.fusion[level - 1][s.index()]);
                streams[s.index()] = self.fusion[level - 1][s.index()].forward(&x, t)?;
            }
            levels.push(LevelState { streams });
        }
        let last = levels.last().expect("final level").clone();

        let logits = self
            .scorer
            .forward(last.get(Stream::Shared), trace.as_deref_mut().map(|t| &mut t.scorer))?;
        let attention = self.attention_from_logits(&logits);

        let mut base = Vec::with_capacity(self.config.tower_input_dim());
        for s in Stream::ALL {
            base.extend_from_slice(last.get(s));
        }
        let mut tasks = Vec::with_capacity(self.towers.len());
        for (t, tower) in self.towers.iter().enumerate() {
            let gate = if self.config.task_attention { attention[t] } else { 1.0 };
            let x: Vec<f64> = base.iter().map(|v| v * gate).collect();
            let y = tower.forward(&x, trace.as_deref_mut().map(|tr| &mut tr.towers[t]))?;
            tasks.push(match self.config.tasks[t].kind {
                TaskKind::Classification => TaskOutput::Probabilities(y),
                TaskKind::Regression => TaskOutput::Scalar(y[0]),
            });
        }

        let mut probe_dists: [Vec<f64>; 4] = Default::default();
        for s in Stream::ALL {
            let z = self.probes[s.index()]
                .forward(last.get(s), trace.as_deref_mut().map(|t| &mut t.probes[s.index()]))?;
            probe_dists[s.index()] = math::softmax_scaled(&z, tau);
        }

        if let Some(tr) = trace {
            tr.attention = attention.clone();
            tr.tower_base = base;
            tr.probe_dists = probe_dists.clone();
            tr.temperature = tau;
        }

        Ok(ForwardOutput {
            levels,
            dists: TaskDistributions { tasks, streams: probe_dists },
            attention,
            scorer_logits: logits,
        })
    }
}

use alloc::vec;
use alloc::vec::Vec;

use super::{HaenModel, Stream};
use crate::error::shape;
use crate::nn::GradTape;
use crate::{math, Result};

/// Cached activations of one traced forward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub(crate) experts: [GradTape; 4],
    pub(crate) fusion: Vec<[GradTape; 4]>,
    pub(crate) scorer: GradTape,
    pub(crate) towers: Vec<GradTape>,
    pub(crate) probes: [GradTape; 4],
    pub(crate) attention: Vec<f64>,
    pub(crate) tower_base: Vec<f64>,
    pub(crate) probe_dists: [Vec<f64>; 4],
    pub(crate) temperature: f64,
}

impl Trace {
    pub(crate) fn empty(model: &HaenModel) -> Self {
        Self {
            fusion: vec![Default::default(); model.config.levels],
            towers: vec![GradTape::new(); model.towers.len()],
            ..Default::default()
        }
    }
}

/// Loss gradients with respect to the model's outputs for one sample.
///
/// Empty vectors mean "no gradient" and skip the corresponding branch.
#[derive(Debug, Clone, Default)]
pub struct OutputGrads {
    /// `dL/d output` per task: probabilities for classification, one value for regression.
    pub tasks: Vec<Vec<f64>>,
    /// `dL/dp` for the probe distributions, indexed by [`Stream::index`].
    pub probes: [Vec<f64>; 4],
    /// Extra `dL/d logits` for the task scorer.
    pub scorer_logits: Vec<f64>,
}

impl OutputGrads {
    pub fn new(num_tasks: usize) -> Self {
        Self { tasks: vec![Vec::new(); num_tasks], ..Default::default() }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl HaenModel {
    /// Accumulates `dL/dθ` into `grads` (canonical order, length
    /// [`HaenModel::param_count`]) for the pass recorded in `trace`.
    pub fn backward(&self, trace: &Trace, out: &OutputGrads, grads: &mut [f64]) -> Result<()> {
        if grads.len() != self.offsets.total {
            return Err(shape("gradient buffer length differs from parameter count"));
        }
        if out.tasks.len() != self.towers.len() {
            return Err(shape("one output gradient slot per task expected"));
        }
        let cfg = &self.config;
        let levels = cfg.levels;
        let final_dims = cfg.stream_dims(levels);
        let mut d_final: [Vec<f64>; 4] = final_dims.map(|d| vec![0.0; d]);

        // Towers: input is gate_t * base.
        let mut d_base = vec![0.0; trace.tower_base.len()];
        let mut d_gate = vec![0.0; self.towers.len()];
        for (t, tower) in self.towers.iter().enumerate() {
            let dy = &out.tasks[t];
            if dy.is_empty() {
                continue;
            }
            let off = self.offsets.towers[t];
            let du = tower.backward_into(&trace.towers[t], dy, &mut grads[off..off + tower.param_count()])?;
            let gate = if cfg.task_attention { trace.attention[t] } else { 1.0 };
            d_gate[t] = math::dot(&du, &trace.tower_base);
            for (d, u) in d_base.iter_mut().zip(&du) {
                *d += gate * u;
            }
        }
        let mut at = 0;
        for s in Stream::ALL {
            let n = final_dims[s.index()];
            add_into(&mut d_final[s.index()], &d_base[at..at + n]);
            at += n;
        }

        // Probes: p = softmax(z / tau).
        for s in Stream::ALL {
            let dp = &out.probes[s.index()];
            if dp.is_empty() {
                continue;
            }
            let p = &trace.probe_dists[s.index()];
            let inner = math::dot(p, dp);
            let dz: Vec<f64> = p.iter().zip(dp).map(|(pi, g)| pi * (g - inner) / trace.temperature).collect();
            let probe = &self.probes[s.index()];
            let off = self.offsets.probes[s.index()];
            let dh = probe.backward_into(&trace.probes[s.index()], &dz, &mut grads[off..off + probe.param_count()])?;
            add_into(&mut d_final[s.index()], &dh);
        }

        // Scorer: gates and any direct logit gradient.
        if cfg.task_attention {
            let w = &trace.attention;
            let inner = math::dot(w, &d_gate);
            let mut dlogits: Vec<f64> = w.iter().zip(&d_gate).map(|(wi, g)| wi * (g - inner)).collect();
            if !out.scorer_logits.is_empty() {
                add_into(&mut dlogits, &out.scorer_logits);
            }
            if dlogits.iter().any(|&v| v != 0.0) {
                let off = self.offsets.scorer;
                let dh = self.scorer.backward_into(
                    &trace.scorer,
                    &dlogits,
                    &mut grads[off..off + self.scorer.param_count()],
                )?;
                add_into(&mut d_final[Stream::Shared.index()], &dh);
            }
        }

        // Fusion levels, top down.
        let mut d_cur = d_final;
        for level in (1..=levels).rev() {
            let prev_dims = cfg.stream_dims(level - 1);
            let mut d_prev: [Vec<f64>; 4] = prev_dims.map(|d| vec![0.0; d]);
            for s in Stream::ALL {
                let block = &self.fusion[level - 1][s.index()];
                let off = self.offsets.fusion[level - 1][s.index()];
                let dx = block.backward_into(
                    &trace.fusion[level - 1][s.index()],
                    &d_cur[s.index()],
                    &mut grads[off..off + block.param_count()],
                )?;
                let mut at = 0;
                for src in cfg.fusion_inputs(s) {
                    let n = prev_dims[src.index()];
                    add_into(&mut d_prev[src.index()], &dx[at..at + n]);
                    at += n;
                }
            }
            d_cur = d_prev;
        }

        for s in Stream::ALL {
            let expert = &self.experts[s.index()];
            let off = self.offsets.experts[s.index()];
            expert.backward_into(
                &trace.experts[s.index()],
                &d_cur[s.index()],
                &mut grads[off..off + expert.param_count()],
            )?;
        }
        Ok(())
    }
}

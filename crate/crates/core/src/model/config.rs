use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Stream;
use crate::error::config;
use crate::nn::{Activation, ParamBlock};
use crate::objectives::{default_tasks, TaskDescriptor, TaskKind, DEFAULT_TRANSFER_TASK};
use crate::Result;

/// How fusion blocks are realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionKind {
    /// One tanh MLP per stream and level.
    Hierarchical,
    /// A single level whose blocks are one linear map over the concatenation.
    ConcatLinear,
}

/// Shape of a hierarchical expert network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaenConfig {
    pub d_t: usize,
    pub d_a: usize,
    pub d_v: usize,
    /// Hidden + output widths of the text, audio, visual and shared experts.
    pub expert_widths: [Vec<usize>; 4],
    pub levels: usize,
    /// Per level, per stream fusion widths (`fusion_widths[i - 1]` is level `i`).
    pub fusion_widths: Vec<[Vec<usize>; 4]>,
    /// Hidden widths of each task tower; the output head is appended.
    pub tower_widths: Vec<Vec<usize>>,
    pub tasks: Vec<TaskDescriptor>,
    /// Task whose label space the transfer probes predict.
    pub transfer_task: usize,
    pub fusion: FusionKind,
    /// When false, modality streams never read the shared stream during fusion.
    pub cross_modal: bool,
    /// When false, towers are not gated and the scorer is ignored.
    pub task_attention: bool,
}

/// Constructor recipe for one MLP inside the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleSpec {
    pub prefix: String,
    pub in_dim: usize,
    pub widths: Vec<usize>,
    pub hidden: Activation,
    pub output: Activation,
}

impl HaenConfig {
    /// Desk-scale default: 16-dim modalities, experts `[32, 16]`, two fusion
    /// levels of width 16 and towers with one hidden layer of 16.
    pub fn desk_default(d_t: usize, d_a: usize, d_v: usize) -> Self {
        let tasks = default_tasks();
        Self {
            d_t,
            d_a,
            d_v,
            expert_widths: [vec![32, 16], vec![32, 16], vec![32, 16], vec![32, 16]],
            levels: 2,
            fusion_widths: vec![[vec![16], vec![16], vec![16], vec![16]]; 2],
            tower_widths: vec![vec![16]; tasks.len()],
            tasks,
            transfer_task: DEFAULT_TRANSFER_TASK,
            fusion: FusionKind::Hierarchical,
            cross_modal: true,
            task_attention: true,
        }
    }

    pub fn input_dim(&self, stream: Stream) -> usize {
        match stream {
            Stream::Text => self.d_t,
            Stream::Audio => self.d_a,
            Stream::Visual => self.d_v,
            Stream::Shared => self.d_t + self.d_a + self.d_v,
        }
    }

    /// Width of every stream at `level` (0 = expert outputs).
    pub fn stream_dims(&self, level: usize) -> [usize; 4] {
        let pick = |w: &Vec<usize>| *w.last().expect("validated non-empty widths");
        if level == 0 {
            [0, 1, 2, 3].map(|i| pick(&self.expert_widths[i]))
        } else {
            [0, 1, 2, 3].map(|i| pick(&self.fusion_widths[level - 1][i]))
        }
    }

    /// Streams concatenated (in order) to form the fusion input of `stream`.
    pub fn fusion_inputs(&self, stream: Stream) -> &'static [Stream] {
        match (stream, self.cross_modal) {
            (Stream::Shared, _) => &[Stream::Shared, Stream::Text, Stream::Audio, Stream::Visual],
            (Stream::Text, true) => &[Stream::Text, Stream::Shared],
            (Stream::Audio, true) => &[Stream::Audio, Stream::Shared],
            (Stream::Visual, true) => &[Stream::Visual, Stream::Shared],
            (Stream::Text, false) => &[Stream::Text],
            (Stream::Audio, false) => &[Stream::Audio],
            (Stream::Visual, false) => &[Stream::Visual],
        }
    }

    pub fn tower_input_dim(&self) -> usize {
        self.stream_dims(self.levels).iter().sum()
    }

    pub fn transfer_classes(&self) -> usize {
        self.tasks[self.transfer_task].num_classes
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_t == 0 || self.d_a == 0 || self.d_v == 0 {
            return Err(config("modality dimensions must be >= 1"));
        }
        if self.levels == 0 {
            return Err(config("at least one fusion level is required"));
        }
        if self.fusion == FusionKind::ConcatLinear && self.levels != 1 {
            return Err(config("concat-linear fusion has exactly one level"));
        }
        if self.fusion_widths.len() != self.levels {
            return Err(config(format!(
                "{} fusion width sets for {} levels",
                self.fusion_widths.len(),
                self.levels
            )));
        }
        let widths_ok = |w: &Vec<usize>| !w.is_empty() && w.iter().all(|&x| x >= 1);
        if !self.expert_widths.iter().all(widths_ok) || !self.fusion_widths.iter().flatten().all(widths_ok) {
            return Err(config("expert and fusion widths must be non-empty and >= 1"));
        }
        if self.tasks.is_empty() {
            return Err(config("at least one task is required"));
        }
        for task in &self.tasks {
            task.validate()?;
        }
        if self.tower_widths.len() != self.tasks.len() || self.tower_widths.iter().flatten().any(|&w| w == 0) {
            return Err(config("one tower width list per task, all widths >= 1"));
        }
        match self.tasks.get(self.transfer_task) {
            Some(t) if t.kind == TaskKind::Classification => Ok(()),
            _ => Err(config("transfer task must be a classification task")),
        }
    }

    /// Every MLP in canonical parameter order: experts, fusion levels,
    /// scorer, towers, probes.
    pub fn module_specs(&self) -> Vec<ModuleSpec> {
        let mut specs = Vec::new();
        for s in Stream::ALL {
            specs.push(ModuleSpec {
                prefix: format!("expert.{}.", s.name()),
                in_dim: self.input_dim(s),
                widths: self.expert_widths[s.index()].clone(),
                hidden: Activation::Tanh,
                output: Activation::Tanh,
            });
        }
        for level in 1..=self.levels {
            let prev = self.stream_dims(level - 1);
            for s in Stream::ALL {
                let in_dim = self.fusion_inputs(s).iter().map(|x| prev[x.index()]).sum();
                let widths = &self.fusion_widths[level - 1][s.index()];
                let (widths, act) = match self.fusion {
                    FusionKind::Hierarchical => (widths.clone(), Activation::Tanh),
                    FusionKind::ConcatLinear => (vec![*widths.last().expect("validated")], Activation::Identity),
                };
                specs.push(ModuleSpec {
                    prefix: format!("fusion.{level}.{}.", s.name()),
                    in_dim,
                    widths,
                    hidden: act,
                    output: act,
                });
            }
        }
        let final_dims = self.stream_dims(self.levels);
        specs.push(ModuleSpec {
            prefix: "scorer.".into(),
            in_dim: final_dims[Stream::Shared.index()],
            widths: vec![self.tasks.len()],
            hidden: Activation::Identity,
            output: Activation::Identity,
        });
        for (t, task) in self.tasks.iter().enumerate() {
            let mut widths = self.tower_widths[t].clone();
            widths.push(task.output_dim());
            let output = match task.kind {
                TaskKind::Classification => Activation::Softmax,
                TaskKind::Regression => Activation::Identity,
            };
            specs.push(ModuleSpec {
                prefix: format!("tower.{}.", task.id),
                in_dim: self.tower_input_dim(),
                widths,
                hidden: Activation::Tanh,
                output,
            });
        }
        for s in Stream::ALL {
            specs.push(ModuleSpec {
                prefix: format!("probe.{}.", s.name()),
                in_dim: final_dims[s.index()],
                widths: vec![self.transfer_classes()],
                hidden: Activation::Identity,
                output: Activation::Identity,
            });
        }
        specs
    }

    /// Full parameter layout implied by this configuration.
    pub fn param_layout(&self) -> Vec<ParamBlock> {
        crate::nn::params_layout_for(self.module_specs().iter().map(|m| (m.prefix.as_str(), m.in_dim, m.widths.as_slice())))
    }

    pub fn param_count(&self) -> usize {
        self.param_layout().iter().map(ParamBlock::len).sum()
    }
}

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::config;
use crate::model::{FusionKind, HaenConfig};
use crate::nn::{BlockKind, ParamBlock, ParamVector};
use crate::objectives::{default_tasks, TaskDescriptor, DEFAULT_TRANSFER_TASK};
use crate::{Error, Result};

pub const MAX_LEVELS: usize = 3;
pub const NUM_TOWERS: usize = 4;

/// Inclusive integer range of one gene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneRange {
    pub min: u32,
    pub max: u32,
}

impl GeneRange {
    pub const fn new(min: u32, max: u32) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: u32) -> bool {
        (self.min..=self.max).contains(&v)
    }

    pub fn midpoint(&self) -> u32 {
        self.min + (self.max - self.min) / 2
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.random_range(self.min..=self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub expert_hidden: GeneRange,
    pub expert_out: GeneRange,
    pub levels: GeneRange,
    pub fusion_width: GeneRange,
    pub tower_hidden: GeneRange,
}

impl Default for SearchSpace {
    /// Midpoints give the desk default: experts `[32, 16]`, two levels of 16, towers of 16.
    fn default() -> Self {
        Self {
            expert_hidden: GeneRange::new(16, 48),
            expert_out: GeneRange::new(8, 24),
            levels: GeneRange::new(1, 3),
            fusion_width: GeneRange::new(8, 24),
            tower_hidden: GeneRange::new(8, 24),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("expert_hidden", self.expert_hidden),
            ("expert_out", self.expert_out),
            ("levels", self.levels),
            ("fusion_width", self.fusion_width),
            ("tower_hidden", self.tower_hidden),
        ] {
            if r.min == 0 || r.min > r.max {
                return Err(config(format!("search range {name} must satisfy 1 <= min <= max")));
            }
        }
        if self.levels.max as usize > MAX_LEVELS {
            return Err(config(format!("at most {MAX_LEVELS} fusion levels are supported")));
        }
        Ok(())
    }

    pub fn range(&self, kind: GeneKind) -> GeneRange {
        match kind {
            GeneKind::ExpertHidden(_) => self.expert_hidden,
            GeneKind::ExpertOut(_) => self.expert_out,
            GeneKind::Levels => self.levels,
            GeneKind::FusionWidth { .. } => self.fusion_width,
            GeneKind::TowerHidden(_) => self.tower_hidden,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneKind {
    ExpertHidden(usize),
    ExpertOut(usize),
    Levels,
    FusionWidth { level: usize, stream: usize },
    TowerHidden(usize),
}

/// Architecture genes. Fusion widths exist for every possible level; genes
/// beyond the active level count are carried but dormant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchGenes {
    pub expert_hidden: [u32; 4],
    pub expert_out: [u32; 4],
    pub levels: u32,
    pub fusion_width: [[u32; 4]; MAX_LEVELS],
    pub tower_hidden: [u32; NUM_TOWERS],
}

impl ArchGenes {
    pub const COUNT: usize = 4 + 4 + 1 + 4 * MAX_LEVELS + NUM_TOWERS;

    pub fn kind(i: usize) -> GeneKind {
        match i {
            0..=3 => GeneKind::ExpertHidden(i),
            4..=7 => GeneKind::ExpertOut(i - 4),
            8 => GeneKind::Levels,
            9..=20 => GeneKind::FusionWidth { level: (i - 9) / 4, stream: (i - 9) % 4 },
            _ => GeneKind::TowerHidden(i - 21),
        }
    }

    pub fn gene(&self, i: usize) -> u32 {
        match Self::kind(i) {
            GeneKind::ExpertHidden(s) => self.expert_hidden[s],
            GeneKind::ExpertOut(s) => self.expert_out[s],
            GeneKind::Levels => self.levels,
            GeneKind::FusionWidth { level, stream } => self.fusion_width[level][stream],
            GeneKind::TowerHidden(t) => self.tower_hidden[t],
        }
    }

    pub fn set_gene(&mut self, i: usize, v: u32) {
        match Self::kind(i) {
            GeneKind::ExpertHidden(s) => self.expert_hidden[s] = v,
            GeneKind::ExpertOut(s) => self.expert_out[s] = v,
            GeneKind::Levels => self.levels = v,
            GeneKind::FusionWidth { level, stream } => self.fusion_width[level][stream] = v,
            GeneKind::TowerHidden(t) => self.tower_hidden[t] = v,
        }
    }

    fn from_fn(mut f: impl FnMut(usize) -> u32) -> Self {
        let mut g = Self {
            expert_hidden: [0; 4],
            expert_out: [0; 4],
            levels: 0,
            fusion_width: [[0; 4]; MAX_LEVELS],
            tower_hidden: [0; NUM_TOWERS],
        };
        for i in 0..Self::COUNT {
            g.set_gene(i, f(i));
        }
        g
    }

    pub fn midpoint(space: &SearchSpace) -> Self {
        Self::from_fn(|i| space.range(Self::kind(i)).midpoint())
    }

    pub fn random<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> Self {
        Self::from_fn(|i| space.range(Self::kind(i)).sample(rng))
    }

    pub fn in_bounds(&self, space: &SearchSpace) -> bool {
        (0..Self::COUNT).all(|i| space.range(Self::kind(i)).contains(self.gene(i)))
    }

    /// Compact human-readable summary of the active genes.
    pub fn summary(&self) -> String {
        let join = |v: &[u32]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        let levels = (0..self.levels as usize)
            .map(|l| join(&self.fusion_width[l]))
            .collect::<Vec<_>>()
            .join(";");
        format!(
            "hid[{}] out[{}] L{} fus[{}] tow[{}]",
            join(&self.expert_hidden),
            join(&self.expert_out),
            self.levels,
            levels,
            join(&self.tower_hidden)
        )
    }
}

/// Non-evolvable parts of the model: input dims, tasks and ablation flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTemplate {
    pub d_t: usize,
    pub d_a: usize,
    pub d_v: usize,
    pub tasks: Vec<TaskDescriptor>,
    pub transfer_task: usize,
    pub fusion: FusionKind,
    pub cross_modal: bool,
    pub task_attention: bool,
}

impl ModelTemplate {
    pub fn new(d_t: usize, d_a: usize, d_v: usize) -> Self {
        Self {
            d_t,
            d_a,
            d_v,
            tasks: default_tasks(),
            transfer_task: DEFAULT_TRANSFER_TASK,
            fusion: FusionKind::Hierarchical,
            cross_modal: true,
            task_attention: true,
        }
    }

    /// The network shape encoded by `arch` under this template.
    pub fn config_for(&self, arch: &ArchGenes) -> HaenConfig {
        let levels = match self.fusion {
            FusionKind::Hierarchical => arch.levels as usize,
            FusionKind::ConcatLinear => 1,
        };
        let u = |v: u32| v as usize;
        HaenConfig {
            d_t: self.d_t,
            d_a: self.d_a,
            d_v: self.d_v,
            expert_widths: [0, 1, 2, 3].map(|s| vec![u(arch.expert_hidden[s]), u(arch.expert_out[s])]),
            levels,
            fusion_widths: (0..levels).map(|l| [0, 1, 2, 3].map(|s| vec![u(arch.fusion_width[l][s])])).collect(),
            tower_widths: arch.tower_hidden.iter().map(|&w| vec![u(w)]).collect(),
            tasks: self.tasks.clone(),
            transfer_task: self.transfer_task,
            fusion: self.fusion,
            cross_modal: self.cross_modal,
            task_attention: self.task_attention,
        }
    }
}

/// Search space plus template: everything needed to turn genes into models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenomeSpace {
    pub search: SearchSpace,
    pub template: ModelTemplate,
}

/// One individual's heritable content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub arch: ArchGenes,
    pub weights: ParamVector,
    pub birth_gen: u32,
    /// Inner-loop epochs accumulated along this lineage.
    pub trained_epochs: u32,
}

impl GenomeSpace {
    pub fn new(search: SearchSpace, template: ModelTemplate) -> Result<Self> {
        search.validate()?;
        if template.tasks.len() != NUM_TOWERS {
            return Err(config(format!("genomes encode exactly {NUM_TOWERS} task towers")));
        }
        let space = Self { search, template };
        space.config_for(&ArchGenes::midpoint(&space.search)).validate()?;
        Ok(space)
    }

    pub fn config_for(&self, arch: &ArchGenes) -> HaenConfig {
        self.template.config_for(arch)
    }

    pub fn layout_for(&self, arch: &ArchGenes) -> Vec<ParamBlock> {
        self.config_for(arch).param_layout()
    }

    /// Glorot-uniform weight blocks, zero biases.
    pub fn init_block<R: Rng + ?Sized>(block: &ParamBlock, out: &mut [f64], rng: &mut R) {
        match block.kind {
            BlockKind::Weight => crate::nn::xavier_fill(out, block.cols, block.rows, rng),
            BlockKind::Bias => out.iter_mut().for_each(|v| *v = 0.0),
        }
    }

    pub fn genome_with_arch<R: Rng + ?Sized>(&self, arch: ArchGenes, rng: &mut R) -> Genome {
        let mut weights = ParamVector::zeros(self.layout_for(&arch));
        let layout = weights.layout().to_vec();
        for block in &layout {
            Self::init_block(block, &mut weights.values_mut()[block.range()], rng);
        }
        Genome { arch, weights, birth_gen: 0, trained_epochs: 0 }
    }

    pub fn random_genome<R: Rng + ?Sized>(&self, rng: &mut R) -> Genome {
        let arch = ArchGenes::random(&self.search, rng);
        self.genome_with_arch(arch, rng)
    }

    /// Mid-range architecture with fresh Glorot weights.
    pub fn default_genome<R: Rng + ?Sized>(&self, rng: &mut R) -> Genome {
        self.genome_with_arch(ArchGenes::midpoint(&self.search), rng)
    }

    /// Mid-range architecture with all weights zero.
    pub fn zero_genome(&self) -> Genome {
        let arch = ArchGenes::midpoint(&self.search);
        Genome { arch, weights: ParamVector::zeros(self.layout_for(&arch)), birth_gen: 0, trained_epochs: 0 }
    }

    /// Rebuilds `weights` for `arch`, keeping every block whose name and shape
    /// survive and reinitializing the rest.
    pub fn relayout<R: Rng + ?Sized>(&self, old: &ParamVector, arch: &ArchGenes, rng: &mut R) -> ParamVector {
        let index: BTreeMap<&str, &ParamBlock> = old.layout().iter().map(|b| (b.name.as_str(), b)).collect();
        let mut weights = ParamVector::zeros(self.layout_for(arch));
        let layout = weights.layout().to_vec();
        for block in &layout {
            let dst = &mut weights.values_mut()[block.range()];
            match index.get(block.name.as_str()) {
                Some(src) if src.same_shape(block) => dst.copy_from_slice(old.block_values(src)),
                _ => Self::init_block(block, dst, rng),
            }
        }
        weights
    }

    pub fn check_genome(&self, g: &Genome) -> Result<()> {
        if !g.arch.in_bounds(&self.search) {
            return Err(Error::Config(format!("genes out of bounds: {}", g.arch.summary())));
        }
        if g.weights.layout() != self.layout_for(&g.arch).as_slice() {
            return Err(Error::Shape("genome weights do not match its architecture".into()));
        }
        Ok(())
    }
}

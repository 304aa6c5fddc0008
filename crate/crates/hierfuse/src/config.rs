use std::path::{Path, PathBuf};

use hierfuse_core::dataset::GeneratorSpec;
use hierfuse_core::evolution::{EvolutionConfig, SearchSpace};
use hierfuse_core::objectives::LossConfig;
use hierfuse_core::training::{apply_ablation, AblationMode, ExperimentSetup, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Everything that defines an experiment. Every field has a default, so a
/// config file only needs the values it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub evolution: EvolutionConfig,
    pub loss: LossConfig,
    pub train: TrainConfig,
    pub search: SearchSpace,
    /// Used when `data_dir` is unset: each seed draws its own dataset.
    pub generator: GeneratorSpec,
    /// Directory with `train.jsonl`, `val.jsonl` and `test.jsonl`.
    pub data_dir: Option<PathBuf>,
    pub ablation: AblationMode,
    /// Seeds to run; empty means `[evolution.master_seed]`.
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Worker threads for fitness evaluation; 0 picks automatically.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            evolution: EvolutionConfig::default(),
            loss: LossConfig::default(),
            train: TrainConfig::default(),
            search: SearchSpace::default(),
            generator: GeneratorSpec::default(),
            data_dir: None,
            ablation: AblationMode::Full,
            seeds: Vec::new(),
            output_dir: PathBuf::from("runs"),
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.evolution.master_seed]
        } else {
            self.seeds.clone()
        }
    }

    /// Sets the master seed and makes it the only seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.evolution.master_seed = seed;
        self.seeds = vec![seed];
    }

    pub fn validate(&self) -> Result<()> {
        self.setup().validate()?;
        match &self.data_dir {
            Some(dir) if !dir.is_dir() => {
                return Err(Error::Config(format!("data directory {} does not exist", dir.display())))
            }
            Some(_) => {}
            None => self.generator.validate()?,
        }
        let mut seeds = self.seeds();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        Ok(())
    }

    /// The single-seed setup with this config's ablation applied.
    pub fn setup(&self) -> ExperimentSetup {
        let base = ExperimentSetup {
            evolution: self.evolution.clone(),
            loss: self.loss.clone(),
            train: self.train.clone(),
            search: self.search.clone(),
            ..Default::default()
        };
        apply_ablation(self.ablation, &base)
    }
}

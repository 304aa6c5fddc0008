//! Model checkpoints as JSON: `{format, version, config, loss, arch, params}`.

use std::path::Path;

use hierfuse_core::evolution::ArchGenes;
use hierfuse_core::model::{HaenConfig, HaenModel};
use hierfuse_core::nn::ParamVector;
use hierfuse_core::objectives::LossConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT: &str = "hierfuse-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: HaenConfig,
    /// Loss settings the model was trained with; prediction honours `single_task`.
    pub loss: LossConfig,
    pub arch: Option<ArchGenes>,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(model: &HaenModel, loss: &LossConfig, arch: Option<ArchGenes>) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            config: model.config().clone(),
            loss: loss.clone(),
            arch,
            params: model.params().into_values(),
        }
    }

    pub fn model(&self) -> Result<HaenModel> {
        let params = ParamVector::new(self.params.clone(), self.config.param_layout())?;
        Ok(HaenModel::from_params(self.config.clone(), &params)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(Error::json(path))?;
        std::fs::write(path, text).map_err(Error::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let ckpt: Checkpoint = serde_json::from_str(&text).map_err(Error::json(path))?;
        if ckpt.format != FORMAT || ckpt.version != VERSION {
            return Err(Error::Format {
                path: path.to_path_buf(),
                line: 1,
                msg: format!("unsupported checkpoint {} v{}", ckpt.format, ckpt.version),
            });
        }
        Ok(ckpt)
    }
}

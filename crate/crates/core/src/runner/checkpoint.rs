use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::optim::Adam;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Stgrn};
use crate::params::ParamStore;

pub const CHECKPOINT_FORMAT: &str = "stgrn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// SHA-256 of the serialized model config.
    pub config_hash: String,
    pub config: ModelConfig,
    pub region_dim: usize,
    pub frame_dim: usize,
    /// Seed of the fixed word-vector table.
    pub embedding_seed: u64,
    pub epoch: usize,
    pub params: ParamStore,
    pub optimizer: Option<Adam>,
}

pub fn config_hash(config: &ModelConfig) -> String {
    let text = serde_json::to_string(config).expect("model config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Hex SHA-256 of arbitrary bytes.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Checkpoint {
    pub fn new(model: &Stgrn, embedding_seed: u64, epoch: usize, optimizer: Option<Adam>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config_hash: config_hash(&model.config),
            config: model.config.clone(),
            region_dim: model.region_dim,
            frame_dim: model.frame_dim,
            embedding_seed,
            epoch,
            params: model.params.clone(),
            optimizer,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        if !self.params.all_finite() {
            return Err(Error::Checkpoint("refusing to save non-finite parameters".into()));
        }
        serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("not a checkpoint (format {:?})", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "checkpoint version {} unsupported (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        if config_hash(&ck.config) != ck.config_hash {
            return Err(Error::Integrity("checkpoint config hash mismatch".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Rebuild the model; parameter names and shapes must match the layout
    /// the stored config produces.
    pub fn model(&self) -> Result<Stgrn> {
        let mut model = Stgrn::new(self.config.clone(), self.region_dim, self.frame_dim, 0)?;
        model.params.load_from(&self.params).map_err(Error::Checkpoint)?;
        if let Some(opt) = &self.optimizer {
            opt.check_compatible(&model.params)?;
        }
        Ok(model)
    }

    /// Model rebuilt under `runtime`, whose architecture must match the
    /// stored one; switches such as ablations, decoding and query mode are
    /// taken from `runtime`.
    pub fn model_with(&self, runtime: &ModelConfig) -> Result<Stgrn> {
        let a = &self.config;
        let b = runtime;
        let arch = |c: &ModelConfig| {
            (c.word_dim, c.hidden_dim, c.model_dim, c.attn_dim, c.layers, c.widths.len())
        };
        if arch(a) != arch(b) {
            return Err(Error::Checkpoint(format!(
                "checkpoint architecture (word, hidden, model, attn, layers, widths) = {:?} \
                 does not match config {:?}",
                arch(a),
                arch(b)
            )));
        }
        let mut model = self.model()?;
        model.config = runtime.clone();
        Ok(model)
    }
}

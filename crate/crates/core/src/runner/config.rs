use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datakit::SyntheticSceneConfig;
use crate::decode::DecodeMode;
use crate::error::{Error, Result};
use crate::graph::RelationMode;
use crate::lang::QueryMode;
use crate::localizer::Lambdas;
use crate::model::ModelConfig;
use crate::reasoner::Subgraphs;

/// Flat run configuration; every key is optional and falls back to its
/// default. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Global gradient-norm bound; 0 disables clipping.
    pub grad_clip: f64,
    /// Validate every this many epochs; 0 never.
    pub eval_every: usize,

    /// Annotation file for training; synthetic data is used when absent.
    pub annotations: Option<PathBuf>,
    pub val_annotations: Option<PathBuf>,
    /// Feature manifest for `annotations`.
    pub features: Option<PathBuf>,
    /// Feature manifest for `val_annotations`; defaults to `features`.
    pub val_features: Option<PathBuf>,
    pub output_dir: PathBuf,

    pub word_dim: usize,
    pub hidden_dim: usize,
    pub model_dim: usize,
    pub attn_dim: usize,
    pub layers: usize,
    pub regions_per_frame: usize,
    pub window: usize,
    pub link_epsilon: f64,
    pub theta: f64,
    pub widths: Vec<usize>,
    pub lambda_align: f64,
    pub lambda_reg: f64,
    pub lambda_exp: f64,
    pub query_mode: QueryMode,
    pub relation_mode: RelationMode,
    pub decode: DecodeMode,
    pub disable_implicit: bool,
    pub disable_explicit: bool,
    pub disable_temporal: bool,

    pub synth_samples: usize,
    pub synth_objects: usize,
    pub synth_regions: usize,
    pub synth_frames: usize,
    pub synth_region_dim: usize,
    pub synth_frame_dim: usize,

    /// Keys no field claims; [`RunConfig::from_toml`] rejects them.
    #[serde(flatten, skip_serializing)]
    pub unknown: BTreeMap<String, toml::Value>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        let s = SyntheticSceneConfig::default();
        Self {
            seed: 0,
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 20,
            grad_clip: 5.0,
            eval_every: 1,
            annotations: None,
            val_annotations: None,
            features: None,
            val_features: None,
            output_dir: PathBuf::from("runs"),
            word_dim: m.word_dim,
            hidden_dim: m.hidden_dim,
            model_dim: m.model_dim,
            attn_dim: m.attn_dim,
            layers: m.layers,
            regions_per_frame: m.regions_per_frame,
            window: m.window,
            link_epsilon: m.link_epsilon,
            theta: m.theta,
            widths: m.widths,
            lambda_align: m.lambdas.align,
            lambda_reg: m.lambdas.reg,
            lambda_exp: m.lambdas.exp,
            query_mode: m.query_mode,
            relation_mode: m.relation_mode,
            decode: m.decode,
            disable_implicit: false,
            disable_explicit: false,
            disable_temporal: false,
            synth_samples: s.num_samples,
            synth_objects: s.num_objects,
            synth_regions: s.regions_per_frame,
            synth_frames: s.num_frames,
            synth_region_dim: s.feature_dim,
            synth_frame_dim: s.frame_dim,
            unknown: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, context: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            context: context.to_string(),
            message: e.to_string(),
        })?;
        if let Some(key) = cfg.unknown.keys().next() {
            return Err(Error::Config(format!("{context}: unknown key {key:?}")));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Everything fixed at model construction plus the runtime switches.
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            word_dim: self.word_dim,
            hidden_dim: self.hidden_dim,
            model_dim: self.model_dim,
            attn_dim: self.attn_dim,
            layers: self.layers,
            regions_per_frame: self.regions_per_frame,
            window: self.window,
            link_epsilon: self.link_epsilon,
            theta: self.theta,
            widths: self.widths.clone(),
            lambdas: Lambdas {
                align: self.lambda_align,
                reg: self.lambda_reg,
                exp: self.lambda_exp,
            },
            query_mode: self.query_mode,
            subgraphs: Subgraphs {
                implicit: !self.disable_implicit,
                explicit: !self.disable_explicit,
                temporal: !self.disable_temporal,
            },
            relation_mode: self.relation_mode,
            decode: self.decode,
        }
    }

    pub fn synthetic_config(&self) -> SyntheticSceneConfig {
        SyntheticSceneConfig {
            num_samples: self.synth_samples,
            num_objects: self.synth_objects,
            regions_per_frame: self.synth_regions,
            num_frames: self.synth_frames,
            feature_dim: self.synth_region_dim,
            frame_dim: self.synth_frame_dim,
            ..SyntheticSceneConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.grad_clip.is_finite() && self.grad_clip >= 0.0) {
            return Err(Error::Config("grad_clip must be non-negative".into()));
        }
        if self.annotations.is_some() != self.features.is_some() {
            return Err(Error::Config("annotations and features must be given together".into()));
        }
        self.model_config().validate()?;
        if self.annotations.is_none() {
            self.synthetic_config().validate()?;
        }
        Ok(())
    }
}

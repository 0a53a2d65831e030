//! Configuration, training, checkpointing and the command entry points.

mod checkpoint;
mod config;
mod optim;

pub use checkpoint::{config_hash, digest, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::RunConfig;
pub use optim::{clip_global_norm, global_norm, Adam};

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::Tape;
use crate::datakit::{generate_synthetic, load_annotations, save_annotations, AnnotationRecord};
use crate::decode::{evaluate, DecodeMode, EvalReport};
use crate::error::{Error, Result};
use crate::featstore::{write_store, FeatureProvider, FeatureStore, WordEmbeddings};
use crate::lang::LexiconTagger;
use crate::model::{Prediction, PreparedSample, Stgrn};
use crate::tensor::Matrix;
use crate::vocab::synthetic_vocab;

/// Records together with the features they reference.
pub struct Dataset {
    pub records: Vec<AnnotationRecord>,
    pub features: Box<dyn FeatureProvider>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            other => Err(Error::Config(format!("unknown split {other:?} (train, val)"))),
        }
    }
}

/// Seed offset of the synthetic validation split.
const SYNTHETIC_VAL_OFFSET: u64 = 0x5EED_0001;

/// Load one split. Without annotation files the split is generated: the
/// training split from `seed`, the validation split from a derived seed.
pub fn load_split(cfg: &RunConfig, split: Split) -> Result<Dataset> {
    match (&cfg.annotations, &cfg.features) {
        (Some(train), Some(features)) => {
            let (path, features) = match split {
                Split::Train => (train, features),
                Split::Val => (
                    cfg.val_annotations
                        .as_ref()
                        .ok_or_else(|| Error::Config("val split requested but val_annotations unset".into()))?,
                    cfg.val_features.as_ref().unwrap_or(features),
                ),
            };
            Ok(Dataset {
                records: load_annotations(path)?,
                features: Box::new(FeatureStore::open(features)?),
            })
        }
        (None, None) => {
            let seed = match split {
                Split::Train => cfg.seed,
                Split::Val => cfg.seed.wrapping_add(SYNTHETIC_VAL_OFFSET),
            };
            let (records, bundle) = generate_synthetic(&cfg.synthetic_config(), seed)?;
            Ok(Dataset {
                records,
                features: Box::new(bundle),
            })
        }
        _ => Err(Error::Config("annotations and features must be given together".into())),
    }
}

/// Fixed word vectors covering the synthetic vocabulary and every token of
/// `records`; a token's vector depends only on `(token, dim, seed)`.
pub fn build_embeddings(records: &[AnnotationRecord], dim: usize, seed: u64) -> WordEmbeddings {
    let mut vocab: BTreeSet<String> = synthetic_vocab().into_iter().collect();
    for r in records {
        vocab.extend(r.sentence.iter().cloned());
    }
    let vocab: Vec<String> = vocab.into_iter().collect();
    WordEmbeddings::new(&vocab, dim, seed)
}

pub fn prepare_dataset(model: &Stgrn, data: &Dataset, embeddings: &WordEmbeddings) -> Result<Vec<PreparedSample>> {
    let tagger = LexiconTagger::default();
    data.records
        .iter()
        .map(|r| model.prepare(r, data.features.as_ref(), embeddings, &tagger))
        .collect()
}

/// Mean loss components over the samples seen in one epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub total: f64,
    pub align: f64,
    pub reg: f64,
    pub exp: f64,
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub step: u64,
    pub loss: LossSummary,
    /// Mean pre-clipping global gradient norm.
    pub grad_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val: Option<EvalReport>,
}

pub struct TrainOutcome {
    pub model: Stgrn,
    pub optimizer: Adam,
    pub history: Vec<EpochLog>,
}

/// Averaged gradients of one batch, one matrix per parameter in store order.
pub fn batch_gradients(model: &Stgrn, batch: &[&PreparedSample]) -> Result<(Vec<Matrix>, LossSummary)> {
    let mut acc: Vec<Matrix> = model
        .params
        .iter()
        .map(|(_, _, p)| Matrix::zeros(p.rows(), p.cols()))
        .collect();
    let mut sum = LossSummary::default();
    let ids: Vec<_> = model.params.ids().collect();
    for sample in batch {
        let mut tape = Tape::new(&model.params);
        let (_, losses) = model.loss(&mut tape, sample)?;
        if let Some(err) = tape.first_non_finite() {
            return Err(err);
        }
        let v = losses.values(&tape);
        sum.total += v.total;
        sum.align += v.align;
        sum.reg += v.reg;
        sum.exp += v.exp;
        let grads = tape.backward(losses.total);
        for (k, &id) in ids.iter().enumerate() {
            if let Some(g) = grads.get(id) {
                if !g.all_finite() {
                    return Err(Error::NonFinite {
                        tensor: model.params.name(id).to_string(),
                        detail: format!("gradient for sample {}", sample.record.video_id),
                    });
                }
                acc[k].add_assign(g);
            }
        }
    }
    let scale = 1.0 / batch.len().max(1) as f64;
    for g in &mut acc {
        g.scale_assign(scale);
    }
    Ok((acc, sum))
}

/// Train from scratch. `on_epoch` sees each log line as it is produced.
pub fn train_model(
    cfg: &RunConfig,
    train: &Dataset,
    val: Option<&Dataset>,
    on_epoch: &mut dyn FnMut(&EpochLog) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.records.is_empty() {
        return Err(Error::Input("training split is empty".into()));
    }
    let mut model = Stgrn::new(
        cfg.model_config(),
        train.features.region_dim(),
        train.features.frame_dim(),
        cfg.seed,
    )?;
    let embeddings = build_embeddings(&train.records, cfg.word_dim, cfg.seed);
    let samples = prepare_dataset(&model, train, &embeddings)?;
    let val_samples = match val {
        Some(v) => {
            let emb = build_embeddings(&v.records, cfg.word_dim, cfg.seed);
            Some((prepare_dataset(&model, v, &emb)?, v.records.clone()))
        }
        None => None,
    };
    let mut optimizer = Adam::new(&model.params, cfg.learning_rate);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x0DDE_50F7);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss = LossSummary::default();
        let mut norm_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&PreparedSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (mut grads, sum) = batch_gradients(&model, &batch)?;
            norm_sum += clip_global_norm(&mut grads, cfg.grad_clip);
            optimizer.update(&mut model.params, &grads);
            if let Some((_, name, _)) = model.params.iter().find(|(_, _, p)| !p.all_finite()) {
                return Err(Error::NonFinite {
                    tensor: name.to_string(),
                    detail: format!("parameter after step {}", optimizer.step),
                });
            }
            loss.total += sum.total;
            loss.align += sum.align;
            loss.reg += sum.reg;
            loss.exp += sum.exp;
            batches += 1;
        }
        let n = samples.len() as f64;
        let loss = LossSummary {
            total: loss.total / n,
            align: loss.align / n,
            reg: loss.reg / n,
            exp: loss.exp / n,
        };
        let val_report = match &val_samples {
            Some((vs, records)) if cfg.eval_every > 0 && epoch % cfg.eval_every == 0 => {
                let preds = predict_samples(&model, vs, model.config.decode)?;
                Some(report(&preds, records)?)
            }
            _ => None,
        };
        let line = EpochLog {
            epoch,
            step: optimizer.step,
            loss,
            grad_norm: norm_sum / batches as f64,
            val: val_report,
        };
        log::info!(
            "epoch {epoch}: loss {:.5} (align {:.5}, reg {:.5}, exp {:.5})",
            line.loss.total,
            line.loss.align,
            line.loss.reg,
            line.loss.exp
        );
        on_epoch(&line)?;
        history.push(line);
    }
    Ok(TrainOutcome {
        model,
        optimizer,
        history,
    })
}

pub fn predict_samples(model: &Stgrn, samples: &[PreparedSample], mode: DecodeMode) -> Result<Vec<Prediction>> {
    samples.iter().map(|s| model.predict_with(s, mode)).collect()
}

fn report(preds: &[Prediction], records: &[AnnotationRecord]) -> Result<EvalReport> {
    let tubes: Vec<_> = preds.iter().map(|p| p.tube.clone()).collect();
    evaluate(&tubes, records)
}

/// Predict and score a dataset.
pub fn evaluate_model(model: &Stgrn, data: &Dataset, embedding_seed: u64, mode: DecodeMode) -> Result<EvalReport> {
    let preds = predict_dataset(model, data, embedding_seed, mode)?;
    report(&preds, &data.records)
}

pub fn predict_dataset(model: &Stgrn, data: &Dataset, embedding_seed: u64, mode: DecodeMode) -> Result<Vec<Prediction>> {
    let embeddings = build_embeddings(&data.records, model.config.word_dim, embedding_seed);
    let samples = prepare_dataset(model, data, &embeddings)?;
    predict_samples(model, &samples, mode)
}

/// Files written by [`train_cmd`].
#[derive(Clone, Debug)]
pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub config: PathBuf,
}

/// Train on the configured data and write the checkpoint, the line-delimited
/// metrics log and the effective config into `output_dir`.
pub fn train_cmd(cfg: &RunConfig) -> Result<(TrainOutcome, TrainArtifacts)> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let artifacts = TrainArtifacts {
        checkpoint: dir.join("checkpoint.json"),
        metrics: dir.join("metrics.jsonl"),
        config: dir.join("config.toml"),
    };
    fs::write(&artifacts.config, cfg.to_toml()).map_err(|e| Error::io(&artifacts.config, e))?;
    let train = load_split(cfg, Split::Train)?;
    let val = match (&cfg.annotations, &cfg.val_annotations) {
        (Some(_), None) => None,
        _ => Some(load_split(cfg, Split::Val)?),
    };
    let mut log_file = fs::File::create(&artifacts.metrics).map_err(|e| Error::io(&artifacts.metrics, e))?;
    let metrics_path = artifacts.metrics.clone();
    let outcome = train_model(cfg, &train, val.as_ref(), &mut |line| {
        let text = serde_json::to_string(line).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(log_file, "{text}").map_err(|e| Error::io(&metrics_path, e))
    })?;
    Checkpoint::new(&outcome.model, cfg.seed, cfg.epochs, Some(outcome.optimizer.clone())).save(&artifacts.checkpoint)?;
    Ok((outcome, artifacts))
}

/// Load a checkpoint under the runtime switches of `cfg`.
pub fn load_model(cfg: &RunConfig, checkpoint: &Path) -> Result<(Stgrn, u64)> {
    let ck = Checkpoint::load(checkpoint)?;
    let model = ck.model_with(&cfg.model_config())?;
    Ok((model, ck.embedding_seed))
}

pub fn eval_cmd(cfg: &RunConfig, checkpoint: &Path, split: Split) -> Result<EvalReport> {
    let (model, seed) = load_model(cfg, checkpoint)?;
    let data = load_split(cfg, split)?;
    evaluate_model(&model, &data, seed, model.config.decode)
}

/// One line of a predictions file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub video_id: String,
    pub interval: (usize, usize),
    /// Chosen region per frame of the interval.
    pub regions: Vec<usize>,
    pub boxes: Vec<crate::geometry::BBox>,
    pub energy: f64,
}

impl From<&Prediction> for PredictionLine {
    fn from(p: &Prediction) -> Self {
        Self {
            video_id: p.video_id.clone(),
            interval: p.tube.interval,
            regions: p.tube.regions.clone(),
            boxes: p.tube.boxes.clone(),
            energy: p.tube.energy,
        }
    }
}

/// Decode a split and write one JSON line per sample to `out`.
pub fn decode_cmd(cfg: &RunConfig, checkpoint: &Path, split: Split, out: &Path) -> Result<Vec<PredictionLine>> {
    let (model, seed) = load_model(cfg, checkpoint)?;
    let data = load_split(cfg, split)?;
    let lines: Vec<PredictionLine> = predict_dataset(&model, &data, seed, model.config.decode)?
        .iter()
        .map(PredictionLine::from)
        .collect();
    let mut text = String::new();
    for l in &lines {
        text.push_str(&serde_json::to_string(l).map_err(|e| Error::Format(e.to_string()))?);
        text.push('\n');
    }
    fs::write(out, text).map_err(|e| Error::io(out, e))?;
    Ok(lines)
}

/// Paths written by [`generate_cmd`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratedFiles {
    pub annotations: PathBuf,
    pub val_annotations: PathBuf,
    pub manifest: PathBuf,
    pub val_manifest: PathBuf,
}

/// Write synthetic train and validation splits (annotations plus feature
/// store) into `dir`.
pub fn generate_cmd(cfg: &RunConfig, dir: &Path) -> Result<GeneratedFiles> {
    let synth = cfg.synthetic_config();
    synth.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (train, train_feats) = generate_synthetic(&synth, cfg.seed)?;
    let (val, val_feats) = generate_synthetic(&synth, cfg.seed.wrapping_add(SYNTHETIC_VAL_OFFSET))?;
    let files = GeneratedFiles {
        annotations: dir.join("train.json"),
        val_annotations: dir.join("val.json"),
        manifest: write_store(&train_feats, dir, "train_features")?,
        val_manifest: write_store(&val_feats, dir, "val_features")?,
    };
    save_annotations(&files.annotations, &train)?;
    save_annotations(&files.val_annotations, &val)?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_config() -> RunConfig {
        RunConfig {
            epochs: 2,
            batch_size: 2,
            word_dim: 6,
            hidden_dim: 3,
            model_dim: 4,
            attn_dim: 3,
            regions_per_frame: 3,
            window: 2,
            widths: vec![2, 4],
            synth_samples: 4,
            synth_frames: 8,
            synth_regions: 3,
            synth_region_dim: 8,
            synth_frame_dim: 3,
            ..RunConfig::default()
        }
    }

    #[test]
    fn smoke_training_logs_finite_losses() {
        let cfg = tiny_config();
        let train = load_split(&cfg, Split::Train).unwrap();
        let mut lines = 0;
        let out = train_model(&cfg, &train, None, &mut |l| {
            assert!(l.loss.total.is_finite() && l.grad_norm.is_finite());
            lines += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(lines, 2);
        assert_eq!(out.optimizer.step, 4);
    }

    #[test]
    fn split_parsing() {
        assert_eq!("val".parse::<Split>().unwrap(), Split::Val);
        assert!("test".parse::<Split>().is_err());
    }

    #[test]
    fn val_split_requires_file_when_using_annotations() {
        let cfg = RunConfig {
            annotations: Some("a.json".into()),
            features: Some("f.json".into()),
            ..tiny_config()
        };
        assert!(matches!(load_split(&cfg, Split::Val), Err(Error::Config(_))));
    }
}

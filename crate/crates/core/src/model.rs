//! The full grounding model: parameter layout, per-sample preparation,
//! forward pass, training loss and decoding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::datakit::AnnotationRecord;
use crate::decode::{decode_tube, temporal_decode, DecodeMode, TubePrediction, DEFAULT_THETA};
use crate::error::{Error, Result};
use crate::featstore::{get_frame_bundle, FeatureProvider, RegionSet, WordEmbeddings, DEFAULT_WORD_DIM};
use crate::geometry::BBox;
use crate::graph::{
    build_graph, AnnotatedRelations, GeometricStub, RelationMode, RelationProvider,
    DEFAULT_LINK_EPSILON, DEFAULT_WINDOW,
};
use crate::lang::{encode_sentence, select_entity, LangParams, PosTagger, QueryMode, SentenceEncoding, DEFAULT_HIDDEN};
use crate::localizer::{
    aggregate_frames, compute_losses, compute_targets, predict_heads, CandidateGrid, FrameAggregate,
    GroundingOutput, GroundingValues, Lambdas, LocalizerDims, LocalizerParams, Losses, DEFAULT_WIDTHS,
};
use crate::params::ParamStore;
use crate::reasoner::{
    cross_modal_fusion, reason, relation_coefficients, GraphIndex, LayerTerms, ReasonerDims,
    ReasonerParams, Subgraphs, DEFAULT_LAYERS, DEFAULT_MODEL_DIM,
};
use crate::tensor::Matrix;

pub const DEFAULT_REGIONS: usize = crate::featstore::DEFAULT_REGIONS_PER_FRAME;

/// Architecture and decoding hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub word_dim: usize,
    /// GRU units per direction.
    pub hidden_dim: usize,
    pub model_dim: usize,
    pub attn_dim: usize,
    pub layers: usize,
    pub regions_per_frame: usize,
    pub window: usize,
    pub link_epsilon: f64,
    pub theta: f64,
    pub widths: Vec<usize>,
    pub lambdas: Lambdas,
    pub query_mode: QueryMode,
    pub subgraphs: Subgraphs,
    pub relation_mode: RelationMode,
    pub decode: DecodeMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            word_dim: DEFAULT_WORD_DIM,
            hidden_dim: DEFAULT_HIDDEN,
            model_dim: DEFAULT_MODEL_DIM,
            attn_dim: DEFAULT_MODEL_DIM,
            layers: DEFAULT_LAYERS,
            regions_per_frame: DEFAULT_REGIONS,
            window: DEFAULT_WINDOW,
            link_epsilon: DEFAULT_LINK_EPSILON,
            theta: DEFAULT_THETA,
            widths: DEFAULT_WIDTHS.to_vec(),
            lambdas: Lambdas::default(),
            query_mode: QueryMode::EntityAttention,
            subgraphs: Subgraphs::ALL,
            relation_mode: RelationMode::Annotated,
            decode: DecodeMode::Dynamic,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("word_dim", self.word_dim),
            ("hidden_dim", self.hidden_dim),
            ("model_dim", self.model_dim),
            ("attn_dim", self.attn_dim),
            ("layers", self.layers),
            ("regions_per_frame", self.regions_per_frame),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::Config("widths must be a non-empty list of positive integers".into()));
        }
        let non_negative = [
            ("link_epsilon", self.link_epsilon),
            ("theta", self.theta),
            ("lambda_align", self.lambdas.align),
            ("lambda_reg", self.lambdas.reg),
            ("lambda_exp", self.lambdas.exp),
        ];
        if let Some((name, v)) = non_negative.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
        }
        Ok(())
    }
}

/// Where each module's parameters live in the store.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub lang: LangParams,
    pub reasoner: ReasonerParams,
    pub localizer: LocalizerParams,
}

/// Everything about one sample that does not depend on parameters.
#[derive(Clone, Debug)]
pub struct PreparedSample {
    pub record: AnnotationRecord,
    pub words: Matrix,
    pub entity: usize,
    pub frames: Vec<RegionSet>,
    /// Raw region features `NK x d_r`.
    pub regions: Matrix,
    /// Boxes `NK x 4`.
    pub boxes: Matrix,
    pub frame_features: Matrix,
    pub graph: GraphIndex,
    pub grid: CandidateGrid,
}

impl PreparedSample {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn region_boxes(&self) -> Vec<Vec<BBox>> {
        self.frames.iter().map(|f| f.boxes.clone()).collect()
    }
}

/// Intermediate values of one forward pass.
pub struct Forward {
    pub sentence: SentenceEncoding,
    pub fused: Var,
    pub relation_coef: Var,
    pub layers: Vec<LayerTerms>,
    pub regions: Var,
    pub frames: FrameAggregate,
    pub output: GroundingOutput,
}

/// Decoded output of one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub video_id: String,
    pub values: GroundingValues,
    pub tube: TubePrediction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stgrn {
    pub config: ModelConfig,
    pub region_dim: usize,
    pub frame_dim: usize,
    pub params: ParamStore,
    pub layout: Layout,
}

impl Stgrn {
    /// Fresh model with parameters drawn from `seed`.
    pub fn new(config: ModelConfig, region_dim: usize, frame_dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if region_dim == 0 {
            return Err(Error::Config("region_dim must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let lang = LangParams::new(&mut params, config.word_dim, config.hidden_dim, &mut rng);
        let ds = lang.feature_dim();
        let reasoner = ReasonerParams::new(
            &mut params,
            ReasonerDims {
                region_dim,
                word_dim: ds,
                query_dim: 2 * ds,
                model_dim: config.model_dim,
                attn_dim: config.attn_dim,
                layers: config.layers,
            },
            &mut rng,
        );
        let localizer = LocalizerParams::new(
            &mut params,
            LocalizerDims {
                model_dim: config.model_dim,
                query_dim: 2 * ds,
                frame_dim,
                hidden: config.hidden_dim,
                attn_dim: config.attn_dim,
                num_widths: config.widths.len(),
            },
            &mut rng,
        );
        Ok(Self {
            config,
            region_dim,
            frame_dim,
            params,
            layout: Layout {
                lang,
                reasoner,
                localizer,
            },
        })
    }

    /// Relation source for `record` under the configured mode.
    pub fn relations_for(&self, record: &AnnotationRecord) -> Result<Box<dyn RelationProvider>> {
        match self.config.relation_mode {
            RelationMode::Annotated => Ok(Box::new(AnnotatedRelations::from_record(record))),
            RelationMode::GeometricStub => Ok(Box::new(GeometricStub)),
            RelationMode::ExternalClassifier => Err(Error::Config(
                "relation_mode external_classifier needs a classifier passed to prepare_with".into(),
            )),
        }
    }

    pub fn prepare(
        &self,
        record: &AnnotationRecord,
        features: &dyn FeatureProvider,
        embeddings: &WordEmbeddings,
        tagger: &dyn PosTagger,
    ) -> Result<PreparedSample> {
        let relations = self.relations_for(record)?;
        self.prepare_with(record, features, embeddings, tagger, relations.as_ref())
    }

    /// Like [`Stgrn::prepare`] with an explicit relation source.
    pub fn prepare_with(
        &self,
        record: &AnnotationRecord,
        features: &dyn FeatureProvider,
        embeddings: &WordEmbeddings,
        tagger: &dyn PosTagger,
        relations: &dyn RelationProvider,
    ) -> Result<PreparedSample> {
        if features.region_dim() != self.region_dim || features.frame_dim() != self.frame_dim {
            return Err(Error::Config(format!(
                "features have dims ({}, {}), model expects ({}, {})",
                features.region_dim(),
                features.frame_dim(),
                self.region_dim,
                self.frame_dim
            )));
        }
        if embeddings.dim() != self.config.word_dim {
            return Err(Error::Config(format!(
                "word embeddings of dim {}, model expects {}",
                embeddings.dim(),
                self.config.word_dim
            )));
        }
        if record.sentence.is_empty() {
            return Err(Error::Input(format!("record {} has an empty sentence", record.video_id)));
        }
        let k = self.config.regions_per_frame;
        let n = record.num_frames;
        let mut frames = Vec::with_capacity(n);
        for t in 1..=n {
            let mut f = get_frame_bundle(features, &record.video_id, record.feature_frame(t), k)?;
            f.frame_index = t;
            frames.push(f);
        }
        let graph = build_graph(&frames, relations, self.config.window, self.config.link_epsilon)?;
        let regions = Matrix::from_rows(&frames.iter().flat_map(|f| f.features.clone()).collect::<Vec<_>>());
        let boxes = Matrix::from_rows(
            &frames
                .iter()
                .flat_map(|f| f.boxes.iter().map(|b| b.to_array().to_vec()))
                .collect::<Vec<_>>(),
        );
        let frame_features = Matrix::from_rows(&frames.iter().map(|f| f.frame_feature.clone()).collect::<Vec<_>>());
        Ok(PreparedSample {
            record: record.clone(),
            words: embeddings.embed_matrix(&record.sentence),
            entity: select_entity(&record.sentence, record.query_type, tagger)?,
            frames,
            regions,
            boxes,
            frame_features,
            graph: GraphIndex::new(&graph)?,
            grid: CandidateGrid::new(n, &self.config.widths)?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, sample: &PreparedSample) -> Result<Forward> {
        let layout = &self.layout;
        let k = self.config.regions_per_frame;
        let sentence = encode_sentence(tape, &sample.words, sample.entity, self.config.query_mode, &layout.lang)?;
        let regions_raw = tape.constant(sample.regions.clone());
        let boxes = tape.constant(sample.boxes.clone());
        let mask = tape.constant(sample.graph.mask());
        let frame_feats = tape.constant(sample.frame_features.clone());
        let fusion = cross_modal_fusion(tape, regions_raw, mask, sentence.words, &layout.reasoner.fusion);
        let relation_coef = relation_coefficients(tape, sentence.query, &layout.reasoner);
        let (m, layers) = reason(
            tape,
            fusion.v,
            boxes,
            mask,
            &sample.graph,
            relation_coef,
            &layout.reasoner,
            self.config.subgraphs,
        );
        let frames = aggregate_frames(
            tape,
            m,
            frame_feats,
            sentence.query,
            &sample.graph.valid,
            k,
            &layout.localizer,
        );
        let output = predict_heads(tape, frames.hidden, m, sentence.query, k, &layout.localizer);
        Ok(Forward {
            sentence,
            fused: fusion.v,
            relation_coef,
            layers,
            regions: m,
            frames,
            output,
        })
    }

    /// Forward pass plus the weighted training loss.
    pub fn loss(&self, tape: &mut Tape, sample: &PreparedSample) -> Result<(Forward, Losses)> {
        let fwd = self.forward(tape, sample)?;
        let predicted = tape.value(fwd.output.confidence).clone();
        let targets = compute_targets(
            &sample.grid,
            sample.record.gt_clip,
            &sample.region_boxes(),
            &sample.record.gt_boxes,
            &predicted,
        )?;
        let losses = compute_losses(tape, &fwd.output, &targets, self.config.lambdas);
        Ok((fwd, losses))
    }

    /// Decode with the configured mode.
    pub fn predict(&self, sample: &PreparedSample) -> Result<Prediction> {
        self.predict_with(sample, self.config.decode)
    }

    pub fn predict_with(&self, sample: &PreparedSample, mode: DecodeMode) -> Result<Prediction> {
        let mut tape = Tape::new(&self.params);
        let fwd = self.forward(&mut tape, sample)?;
        let values = fwd.output.values(&tape, self.config.regions_per_frame);
        Ok(self.decode_values(sample, values, mode))
    }

    /// Tube from head values; padding regions are scored 0 before linking.
    pub fn decode_values(&self, sample: &PreparedSample, values: GroundingValues, mode: DecodeMode) -> Prediction {
        let mut scores = values.matching.clone();
        for (node, &valid) in sample.graph.valid.iter().enumerate() {
            if !valid {
                let k = self.config.regions_per_frame;
                scores.set(node / k, node % k, 0.0);
            }
        }
        let interval = temporal_decode(&values.confidence, &values.offsets, &sample.grid);
        let tube = decode_tube(mode, &scores, &sample.region_boxes(), interval, self.config.theta);
        Prediction {
            video_id: sample.record.video_id.clone(),
            values,
            tube,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datakit::{generate_synthetic, SyntheticSceneConfig};
    use crate::lang::LexiconTagger;
    use crate::vocab::synthetic_vocab;

    fn tiny() -> (ModelConfig, SyntheticSceneConfig) {
        let scene = SyntheticSceneConfig {
            num_samples: 2,
            num_frames: 8,
            feature_dim: 8,
            frame_dim: 3,
            regions_per_frame: 3,
            ..Default::default()
        };
        let config = ModelConfig {
            word_dim: 6,
            hidden_dim: 3,
            model_dim: 4,
            attn_dim: 3,
            regions_per_frame: 4,
            window: 2,
            widths: vec![2, 4],
            ..Default::default()
        };
        (config, scene)
    }

    #[test]
    fn forward_shapes_and_prediction_ranges() {
        let (config, scene) = tiny();
        let (records, bundle) = generate_synthetic(&scene, 3).unwrap();
        let model = Stgrn::new(config, 8, 3, 1).unwrap();
        let emb = WordEmbeddings::new(&synthetic_vocab(), 6, 0);
        let tagger = LexiconTagger::default();
        let sample = model.prepare(&records[0], &bundle, &emb, &tagger).unwrap();
        // Three proposals per frame padded to four.
        assert_eq!(sample.graph.valid.iter().filter(|v| !**v).count(), 8);
        let mut tape = Tape::new(&model.params);
        let (fwd, losses) = model.loss(&mut tape, &sample).unwrap();
        assert_eq!(tape.shape(fwd.output.confidence), (8, 2));
        assert_eq!(tape.shape(fwd.output.offsets), (8, 4));
        assert_eq!(tape.shape(fwd.output.matching), (32, 1));
        let l = losses.values(&tape);
        assert!(l.total.is_finite() && l.align >= 0.0 && l.reg >= 0.0 && l.exp >= 0.0);
        let pred = model.predict(&sample).unwrap();
        let (s, e) = pred.tube.interval;
        assert!(1 <= s && s <= e && e <= 8);
        assert_eq!(pred.tube.boxes.len(), e - s + 1);
        assert!(pred.tube.regions.iter().all(|&i| i < 3));
    }

    #[test]
    fn config_validation() {
        let bad = ModelConfig {
            widths: vec![],
            ..Default::default()
        };
        assert!(matches!(Stgrn::new(bad, 4, 2, 0), Err(Error::Config(_))));
        let bad = ModelConfig {
            theta: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn feature_dim_mismatch_rejected() {
        let (config, scene) = tiny();
        let (records, bundle) = generate_synthetic(&scene, 3).unwrap();
        let model = Stgrn::new(config, 9, 3, 1).unwrap();
        let emb = WordEmbeddings::new(&synthetic_vocab(), 6, 0);
        let r = model.prepare(&records[0], &bundle, &emb, &LexiconTagger::default());
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn external_mode_requires_classifier() {
        let (mut config, scene) = tiny();
        config.relation_mode = RelationMode::ExternalClassifier;
        let (records, _) = generate_synthetic(&scene, 3).unwrap();
        let model = Stgrn::new(config, 8, 3, 1).unwrap();
        assert!(model.relations_for(&records[0]).is_err());
    }
}

//! Seeded toy scenes with moving objects and one relation per video.
//!
//! Every video holds `num_objects` objects of distinct categories moving with
//! constant velocity (reflected at the borders) plus distractor regions. One
//! pair of objects takes part in an action relation over a sub-interval; the
//! sentence names the relation and the queried object is either its subject
//! or its object. Region features carry a fixed per-category code, so the
//! grounding problem is learnable from features alone.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::record::{AnnotationRecord, FrameTriplet, QueryType, MAX_FRAMES};
use crate::error::{Error, Result};
use crate::featstore::{FeatureBundle, FrameFeatures, VideoFeatures};
use crate::geometry::BBox;
use crate::vocab::{predicate_id, synthetic_vocab, Noun, Verb, NOUNS, VERBS};

/// Number of trailing control channels in every region feature.
pub const CONTROL_CHANNELS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMix {
    Declarative,
    Interrogative,
    /// Alternate declarative and interrogative samples.
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSceneConfig {
    pub num_samples: usize,
    pub num_objects: usize,
    pub regions_per_frame: usize,
    pub vocab: Vec<String>,
    pub num_frames: usize,
    pub feature_dim: usize,
    pub frame_dim: usize,
    /// Per-frame velocity bound for object centers.
    pub max_speed: f64,
    /// Relation interval length as a fraction of the video, `(min, max)`.
    pub relation_fraction: (f64, f64),
    pub query_mix: QueryMix,
    /// Relative box jitter of detected object regions.
    pub box_jitter: f64,
    pub feature_noise: f64,
}

impl Default for SyntheticSceneConfig {
    fn default() -> Self {
        Self {
            num_samples: 20,
            num_objects: 2,
            regions_per_frame: 4,
            vocab: synthetic_vocab(),
            num_frames: 24,
            feature_dim: 32,
            frame_dim: 8,
            max_speed: 0.02,
            relation_fraction: (0.3, 0.6),
            query_mix: QueryMix::Mixed,
            box_jitter: 0.05,
            feature_noise: 0.05,
        }
    }
}

impl SyntheticSceneConfig {
    fn nouns(&self) -> Vec<(usize, Noun)> {
        NOUNS
            .iter()
            .enumerate()
            .filter(|(_, n)| self.vocab.iter().any(|v| v == n.token))
            .map(|(i, n)| (i, *n))
            .collect()
    }

    fn verbs(&self) -> Vec<Verb> {
        VERBS
            .iter()
            .filter(|v| {
                self.vocab.iter().any(|t| t == v.active) && self.vocab.iter().any(|t| t == v.passive)
            })
            .copied()
            .collect()
    }

    fn tube_lengths(&self) -> (usize, usize) {
        let n = self.num_frames as f64;
        let lo = (self.relation_fraction.0 * n).ceil().max(1.0) as usize;
        let hi = (self.relation_fraction.1 * n).floor() as usize;
        (lo, hi.min(self.num_frames))
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_objects < 2 {
            return Err(Error::Config("num_objects must be at least 2".into()));
        }
        if self.num_frames < 4 {
            return Err(Error::Config("num_frames must be at least 4".into()));
        }
        if self.feature_dim < self.num_objects + CONTROL_CHANNELS {
            return Err(Error::Config(format!(
                "feature_dim {} too small to embed {} identities (need at least {})",
                self.feature_dim,
                self.num_objects,
                self.num_objects + CONTROL_CHANNELS
            )));
        }
        if self.frame_dim < 2 {
            return Err(Error::Config("frame_dim must be at least 2".into()));
        }
        if self.regions_per_frame < self.num_objects {
            return Err(Error::Config(
                "regions_per_frame must be at least num_objects".into(),
            ));
        }
        let (lo, hi) = self.relation_fraction;
        if !(0.0 < lo && lo <= hi && hi <= 1.0) {
            return Err(Error::Config(format!(
                "relation_fraction ({lo}, {hi}) must satisfy 0 < min <= max <= 1"
            )));
        }
        let (lmin, lmax) = self.tube_lengths();
        if lmin > lmax {
            return Err(Error::Config(format!(
                "no whole tube length in relation_fraction ({lo}, {hi}) for {} frames",
                self.num_frames
            )));
        }
        if self.nouns().len() < self.num_objects {
            return Err(Error::Config(format!(
                "vocabulary has {} object nouns, need {}",
                self.nouns().len(),
                self.num_objects
            )));
        }
        if self.verbs().is_empty() {
            return Err(Error::Config("vocabulary has no verb forms".into()));
        }
        for w in ["the", "is", "by", "who", "what"] {
            if !self.vocab.iter().any(|v| v == w) {
                return Err(Error::Config(format!("vocabulary lacks {w:?}")));
            }
        }
        Ok(())
    }
}

/// Fixed unit-norm code for object category `category`; independent of the
/// sample seed so identities are shared across videos.
pub fn identity_code(category: usize, width: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1D_C0DE ^ (category as u64).wrapping_mul(0x9E37_79B9));
    let v: Vec<f64> = (0..width).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|x| x / norm).collect()
}

fn q32(x: f64) -> f64 {
    x as f32 as f64
}

struct Track {
    noun_index: usize,
    noun: Noun,
    w: f64,
    h: f64,
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
}

impl Track {
    fn step(&mut self) {
        let advance = |p: &mut f64, v: &mut f64, half: f64| {
            *p += *v;
            if *p < half {
                *p = 2.0 * half - *p;
                *v = -*v;
            } else if *p > 1.0 - half {
                *p = 2.0 * (1.0 - half) - *p;
                *v = -*v;
            }
        };
        advance(&mut self.x, &mut self.vx, 0.5 * self.w);
        advance(&mut self.y, &mut self.vy, 0.5 * self.h);
    }

    fn bbox(&self) -> BBox {
        BBox::new(self.x, self.y, self.w, self.h)
    }
}

fn clamp_box(b: BBox) -> BBox {
    let w = b.w.clamp(0.02, 1.0);
    let h = b.h.clamp(0.02, 1.0);
    BBox::new(
        b.x.clamp(0.5 * w, 1.0 - 0.5 * w),
        b.y.clamp(0.5 * h, 1.0 - 0.5 * h),
        w,
        h,
    )
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Generate `config.num_samples` records and their features. Pure in
/// `(config, seed)`.
pub fn generate_synthetic(
    config: &SyntheticSceneConfig,
    seed: u64,
) -> Result<(Vec<AnnotationRecord>, FeatureBundle)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nouns = config.nouns();
    let verbs = config.verbs();
    let (len_min, len_max) = config.tube_lengths();
    let n = config.num_frames;
    let k = config.regions_per_frame;
    let code_width = config.feature_dim - CONTROL_CHANNELS;
    let codes: BTreeMap<usize, Vec<f64>> = nouns
        .iter()
        .map(|(i, _)| (*i, identity_code(*i, code_width)))
        .collect();

    let mut records = Vec::with_capacity(config.num_samples);
    let mut videos = Vec::with_capacity(config.num_samples);

    for sample in 0..config.num_samples {
        let mut picked = nouns.clone();
        picked.shuffle(&mut rng);
        let mut tracks: Vec<Track> = picked[..config.num_objects]
            .iter()
            .map(|&(noun_index, noun)| {
                let w = rng.random_range(0.12..0.3);
                let h = rng.random_range(0.12..0.3);
                Track {
                    noun_index,
                    noun,
                    w,
                    h,
                    x: rng.random_range(0.5 * w..1.0 - 0.5 * w),
                    y: rng.random_range(0.5 * h..1.0 - 0.5 * h),
                    vx: rng.random_range(-config.max_speed..=config.max_speed),
                    vy: rng.random_range(-config.max_speed..=config.max_speed),
                }
            })
            .collect();

        // Relation between tracks 0 (subject) and 1 (object).
        let verb = verbs[rng.random_range(0..verbs.len())];
        let predicate = predicate_id(verb.predicate).expect("verb predicates are in the table");
        let tube_len = rng.random_range(len_min..=len_max);
        let start = rng.random_range(1..=n - tube_len + 1);
        let end = start + tube_len - 1;
        let target_is_subject = rng.random_bool(0.5);
        let query_type = match config.query_mix {
            QueryMix::Declarative => QueryType::Declarative,
            QueryMix::Interrogative => QueryType::Interrogative,
            QueryMix::Mixed if sample % 2 == 0 => QueryType::Declarative,
            QueryMix::Mixed => QueryType::Interrogative,
        };
        let (subj, obj) = (tracks[0].noun, tracks[1].noun);
        let target_noun = if target_is_subject { subj } else { obj };
        let wh = if target_noun.is_person { "who" } else { "what" };
        let sentence: Vec<&str> = match (query_type, target_is_subject) {
            (QueryType::Declarative, true) => vec!["the", subj.token, verb.active, "the", obj.token],
            (QueryType::Declarative, false) => {
                vec!["the", obj.token, "is", verb.passive, "by", "the", subj.token]
            }
            (QueryType::Interrogative, true) => vec![wh, verb.active, "the", obj.token],
            (QueryType::Interrogative, false) => {
                vec![wh, "is", verb.passive, "by", "the", subj.token]
            }
        };
        let target_track = if target_is_subject { 0 } else { 1 };

        let mut frames = Vec::with_capacity(n);
        let mut gt_boxes = BTreeMap::new();
        let mut triplets = Vec::new();
        for t in 1..=n {
            if t > 1 {
                tracks.iter_mut().for_each(Track::step);
            }
            let active = (start..=end).contains(&t);
            let mut regions: Vec<(Vec<f64>, BBox, Option<usize>)> = Vec::with_capacity(k);
            for (ti, tr) in tracks.iter().enumerate() {
                let b = tr.bbox();
                let jittered = clamp_box(BBox::new(
                    b.x + config.box_jitter * b.w * normal(&mut rng),
                    b.y + config.box_jitter * b.h * normal(&mut rng),
                    b.w * (1.0 + config.box_jitter * normal(&mut rng)),
                    b.h * (1.0 + config.box_jitter * normal(&mut rng)),
                ));
                let mut f: Vec<f64> = codes[&tr.noun_index]
                    .iter()
                    .map(|c| c + config.feature_noise * normal(&mut rng))
                    .collect();
                let participant = active && ti < 2;
                let role = match (participant, ti) {
                    (true, 0) => 1.0,
                    (true, _) => -1.0,
                    _ => 0.0,
                };
                f.extend([if participant { 1.0 } else { 0.0 }, role, 1.0, 0.0]);
                regions.push((f, jittered, Some(ti)));
            }
            while regions.len() < k {
                let w = rng.random_range(0.05..0.4);
                let h = rng.random_range(0.05..0.4);
                let b = BBox::new(
                    rng.random_range(0.5 * w..1.0 - 0.5 * w),
                    rng.random_range(0.5 * h..1.0 - 0.5 * h),
                    w,
                    h,
                );
                let raw: Vec<f64> = (0..code_width).map(|_| normal(&mut rng)).collect();
                let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                let mut f: Vec<f64> = raw.into_iter().map(|x| x / norm).collect();
                f.extend([0.0; CONTROL_CHANNELS]);
                regions.push((f, b, None));
            }
            regions.shuffle(&mut rng);

            let slot = |track: usize| {
                regions
                    .iter()
                    .position(|(_, _, tr)| *tr == Some(track))
                    .expect("every track has a region")
            };
            if active {
                gt_boxes.insert(t, tracks[target_track].bbox());
                triplets.push(FrameTriplet {
                    frame: t,
                    subject: slot(0),
                    predicate,
                    object: slot(1),
                });
            }
            let mut frame = vec![if active { 1.0 } else { 0.0 }, t as f64 / n as f64];
            frame.extend((2..config.frame_dim).map(|_| config.feature_noise * normal(&mut rng)));

            frames.push(FrameFeatures {
                regions: regions
                    .iter()
                    .map(|(f, _, _)| f.iter().copied().map(q32).collect())
                    .collect(),
                boxes: regions
                    .iter()
                    .map(|(_, b, _)| BBox::new(q32(b.x), q32(b.y), q32(b.w), q32(b.h)))
                    .collect(),
                frame: frame.into_iter().map(q32).collect(),
            });
        }

        let video_id = format!("synth{seed}_{sample:04}");
        let record = AnnotationRecord {
            video_id: video_id.clone(),
            num_frames: n,
            sentence: sentence.into_iter().map(String::from).collect(),
            query_type,
            gt_clip: (start, end),
            gt_boxes: gt_boxes
                .into_iter()
                .map(|(t, b)| (t, BBox::new(q32(b.x), q32(b.y), q32(b.w), q32(b.h))))
                .collect(),
            relation_triplets: triplets,
            source_frames: None,
        };
        record.validate(sample)?;

        if n > MAX_FRAMES {
            let mut down = record.downsampled(MAX_FRAMES);
            let src = down.source_frames.take().expect("downsampled records map frames");
            frames = src.iter().map(|&s| frames[s - 1].clone()).collect();
            records.push(down);
        } else {
            records.push(record);
        }
        videos.push(VideoFeatures { video_id, frames });
    }

    Ok((
        records,
        FeatureBundle::new(config.feature_dim, config.frame_dim, videos),
    ))
}

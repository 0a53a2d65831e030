#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use stgrn::autograd::Tape;
use stgrn::datakit::{AnnotationRecord, FrameTriplet, QueryType};
use stgrn::featstore::{FeatureBundle, FrameFeatures, RegionSet, VideoFeatures, WordEmbeddings};
use stgrn::geometry::BBox;
use stgrn::lang::LexiconTagger;
use stgrn::model::{ModelConfig, PreparedSample, Stgrn};
use stgrn::runner::RunConfig;
use stgrn::tensor::Matrix;
use stgrn::vocab::synthetic_vocab;

pub fn rand_box(rng: &mut ChaCha8Rng) -> BBox {
    let w = rng.random_range(0.05..0.5);
    let h = rng.random_range(0.05..0.5);
    BBox::new(
        rng.random_range(0.5 * w..1.0 - 0.5 * w),
        rng.random_range(0.5 * h..1.0 - 0.5 * h),
        w,
        h,
    )
}

/// Scores `N x K` in [0, 1], boxes per frame and an interval of `len`
/// frames somewhere inside `N`.
pub fn decode_instance(rng: &mut ChaCha8Rng, k: usize, len: usize) -> (Matrix, Vec<Vec<BBox>>, (usize, usize)) {
    let n = len + rng.random_range(0..3);
    let data = (0..n * k).map(|_| rng.random_range(0.0..1.0)).collect();
    let scores = Matrix::from_vec(n, k, data);
    let boxes = (0..n).map(|_| (0..k).map(|_| rand_box(rng)).collect()).collect();
    let start = rng.random_range(1..=n + 1 - len);
    (scores, boxes, (start, start + len - 1))
}

/// Energy of a region path, written out from its definition: the mean over
/// consecutive frame pairs of `S_a + S_b + θ IoU`, or the lone score for a
/// single frame.
pub fn path_energy(scores: &Matrix, boxes: &[Vec<BBox>], start: usize, path: &[usize], theta: f64) -> f64 {
    if path.len() == 1 {
        return scores.get(start - 1, path[0]);
    }
    let mut total = 0.0;
    for k in 0..path.len() - 1 {
        let t = start - 1 + k;
        let (a, b) = (path[k], path[k + 1]);
        total += scores.get(t, a) + scores.get(t + 1, b) + theta * boxes[t][a].iou(&boxes[t + 1][b]);
    }
    total / (path.len() - 1) as f64
}

/// Best energy over all `K^len` paths.
pub fn brute_force_energy(scores: &Matrix, boxes: &[Vec<BBox>], interval: (usize, usize), theta: f64) -> f64 {
    let k = scores.cols();
    let len = interval.1 + 1 - interval.0;
    let mut path = vec![0usize; len];
    let mut best = f64::NEG_INFINITY;
    loop {
        best = best.max(path_energy(scores, boxes, interval.0, &path, theta));
        let mut pos = 0;
        loop {
            if pos == len {
                return best;
            }
            path[pos] += 1;
            if path[pos] < k {
                break;
            }
            path[pos] = 0;
            pos += 1;
        }
    }
}

pub fn random_frames(rng: &mut ChaCha8Rng, n: usize, k: usize, dim: usize) -> Vec<RegionSet> {
    (1..=n)
        .map(|t| RegionSet {
            frame_index: t,
            features: (0..k).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
            boxes: (0..k).map(|_| rand_box(rng)).collect(),
            valid: vec![true; k],
            frame_feature: vec![0.0; 2],
        })
        .collect()
}

/// Two frames, two regions, a three-word question, two reasoning layers and
/// explicit relations in both frames.
pub fn gradient_instance(rng: &mut ChaCha8Rng) -> (Stgrn, PreparedSample) {
    let (n, k, dr, df) = (2, 2, 5, 3);
    let frames: Vec<FrameFeatures> = (0..n)
        .map(|_| FrameFeatures {
            regions: (0..k).map(|_| (0..dr).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
            boxes: (0..k).map(|_| rand_box(rng)).collect(),
            frame: (0..df).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect();
    let gt_boxes: BTreeMap<usize, BBox> = (1..=n)
        .map(|t| {
            let b = frames[t - 1].boxes[0];
            (t, BBox::new(b.x + 0.01, b.y - 0.01, b.w, b.h))
        })
        .collect();
    let bundle = FeatureBundle::new(
        dr,
        df,
        vec![VideoFeatures {
            video_id: "g".into(),
            frames,
        }],
    );
    let record = AnnotationRecord {
        video_id: "g".into(),
        num_frames: n,
        sentence: ["who", "chases", "dog"].map(String::from).to_vec(),
        query_type: QueryType::Interrogative,
        gt_clip: (1, 2),
        gt_boxes,
        relation_triplets: vec![
            FrameTriplet { frame: 1, subject: 0, predicate: 3, object: 1 },
            FrameTriplet { frame: 2, subject: 1, predicate: 7, object: 0 },
        ],
        source_frames: None,
    };
    let config = ModelConfig {
        word_dim: 4,
        hidden_dim: 3,
        model_dim: 4,
        attn_dim: 3,
        layers: 2,
        regions_per_frame: k,
        window: 1,
        widths: vec![1, 2],
        ..ModelConfig::default()
    };
    let model = Stgrn::new(config, dr, df, rng.random()).expect("valid model");
    let emb = WordEmbeddings::new(&synthetic_vocab(), 4, 11);
    let sample = model
        .prepare(&record, &bundle, &emb, &LexiconTagger::default())
        .expect("prepared sample");
    (model, sample)
}

pub fn total_loss(model: &Stgrn, sample: &PreparedSample) -> f64 {
    let mut tape = Tape::new(&model.params);
    let (_, losses) = model.loss(&mut tape, sample).expect("loss");
    losses.values(&tape).total
}

/// Scaled-down defaults for the overfit suite.
pub fn overfit_config() -> RunConfig {
    RunConfig {
        epochs: 500,
        eval_every: 0,
        word_dim: 32,
        hidden_dim: 32,
        model_dim: 32,
        attn_dim: 32,
        regions_per_frame: 4,
        widths: vec![4, 6, 8, 10, 12, 14, 16, 20],
        ..RunConfig::default()
    }
}

/// Small config for fast pipeline tests.
pub fn tiny_config() -> RunConfig {
    RunConfig {
        epochs: 3,
        batch_size: 2,
        eval_every: 0,
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

//! Turning head outputs into a tube and scoring tubes against the ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datakit::{AnnotationRecord, QueryType};
use crate::error::{Error, Result};
use crate::geometry::{frame_iou, interval_iou, BBox};
use crate::localizer::CandidateGrid;
use crate::tensor::Matrix;

pub const DEFAULT_THETA: f64 = 0.2;

/// Region selection strategy inside the decoded interval.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Greedy,
    #[default]
    Dynamic,
}

impl std::str::FromStr for DecodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(DecodeMode::Greedy),
            "dynamic" => Ok(DecodeMode::Dynamic),
            other => Err(Error::Config(format!("unknown decode mode {other:?}"))),
        }
    }
}

/// Decoded tube: one region and box per frame of `interval` (inclusive,
/// 1-based).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TubePrediction {
    pub interval: (usize, usize),
    pub regions: Vec<usize>,
    pub boxes: Vec<BBox>,
    pub energy: f64,
}

impl TubePrediction {
    pub fn box_at(&self, t: usize) -> Option<&BBox> {
        let (s, e) = self.interval;
        (s..=e).contains(&t).then(|| &self.boxes[t - s])
    }
}

/// Interval from the most confident candidate shifted by its offsets,
/// rounded and clamped to `[1, N]`. An inverted result collapses to its
/// clamped midpoint.
pub fn temporal_decode(confidence: &Matrix, offsets: &Matrix, grid: &CandidateGrid) -> (usize, usize) {
    let n = grid.num_frames;
    let (t, p) = grid.best(confidence);
    let c = grid.get(t, p);
    let s = c.start - offsets.get(t - 1, 2 * p);
    let e = c.end - offsets.get(t - 1, 2 * p + 1);
    let clamp = |x: f64| x.round().clamp(1.0, n as f64) as usize;
    let (ts, te) = (clamp(s), clamp(e));
    if ts <= te {
        (ts, te)
    } else {
        let mid = clamp(0.5 * (s + e));
        (mid, mid)
    }
}

/// `S_a + S_b + θ · IoU(a, b)`.
pub fn pair_link_score(s_a: f64, s_b: f64, box_a: &BBox, box_b: &BBox, theta: f64) -> f64 {
    s_a + s_b + theta * box_a.iou(box_b)
}

/// Mean link score along `path` starting at frame `start`; a single-frame
/// path scores its region's matching score.
pub fn tube_energy(scores: &Matrix, boxes: &[Vec<BBox>], start: usize, path: &[usize], theta: f64) -> f64 {
    match path {
        [] => 0.0,
        [only] => scores.get(start - 1, *only),
        _ => {
            let total: f64 = path
                .windows(2)
                .enumerate()
                .map(|(k, w)| {
                    let t = start + k;
                    pair_link_score(
                        scores.get(t - 1, w[0]),
                        scores.get(t, w[1]),
                        &boxes[t - 1][w[0]],
                        &boxes[t][w[1]],
                        theta,
                    )
                })
                .sum();
            total / (path.len() - 1) as f64
        }
    }
}

fn check_interval(scores: &Matrix, boxes: &[Vec<BBox>], interval: (usize, usize)) {
    let (s, e) = interval;
    assert!(s >= 1 && s <= e && e <= scores.rows(), "interval {interval:?} outside 1..={}", scores.rows());
    assert_eq!(boxes.len(), scores.rows(), "boxes per frame");
}

fn prediction(scores: &Matrix, boxes: &[Vec<BBox>], interval: (usize, usize), regions: Vec<usize>, theta: f64) -> TubePrediction {
    let energy = tube_energy(scores, boxes, interval.0, &regions, theta);
    let tube_boxes = regions
        .iter()
        .enumerate()
        .map(|(k, &i)| boxes[interval.0 - 1 + k][i])
        .collect();
    TubePrediction {
        interval,
        regions,
        boxes: tube_boxes,
        energy,
    }
}

/// Maximal-energy path through `interval` by dynamic programming. Among
/// optimal paths the lexicographically smallest index sequence is returned.
/// `scores` is `N x K`; padding regions should carry score 0.
pub fn viterbi_tube(scores: &Matrix, boxes: &[Vec<BBox>], interval: (usize, usize), theta: f64) -> TubePrediction {
    check_interval(scores, boxes, interval);
    let (ts, te) = interval;
    let k = scores.cols();
    if ts == te {
        let best = argmax(scores.row(ts - 1));
        return prediction(scores, boxes, interval, vec![best], theta);
    }
    let link = |t: usize, i: usize, j: usize| {
        pair_link_score(scores.get(t - 1, i), scores.get(t, j), &boxes[t - 1][i], &boxes[t][j], theta)
    };
    // value[t - ts][i]: best sum of links from region i at frame t to te.
    let len = te - ts + 1;
    let mut value = vec![vec![0.0; k]; len];
    for t in (ts..te).rev() {
        for i in 0..k {
            value[t - ts][i] = (0..k)
                .map(|j| link(t, i, j) + value[t + 1 - ts][j])
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }
    let mut path = Vec::with_capacity(len);
    path.push(argmax(&value[0]));
    for t in ts..te {
        let i = *path.last().expect("non-empty path");
        let cand: Vec<f64> = (0..k).map(|j| link(t, i, j) + value[t + 1 - ts][j]).collect();
        path.push(argmax(&cand));
    }
    prediction(scores, boxes, interval, path, theta)
}

/// Highest-scoring region in every frame; energy uses the same link score.
pub fn greedy_tube(scores: &Matrix, boxes: &[Vec<BBox>], interval: (usize, usize), theta: f64) -> TubePrediction {
    check_interval(scores, boxes, interval);
    let path = (interval.0..=interval.1).map(|t| argmax(scores.row(t - 1))).collect();
    prediction(scores, boxes, interval, path, theta)
}

pub fn decode_tube(
    mode: DecodeMode,
    scores: &Matrix,
    boxes: &[Vec<BBox>],
    interval: (usize, usize),
    theta: f64,
) -> TubePrediction {
    match mode {
        DecodeMode::Greedy => greedy_tube(scores, boxes, interval, theta),
        DecodeMode::Dynamic => viterbi_tube(scores, boxes, interval, theta),
    }
}

/// First index of the maximum.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Temporal IoU of continuous intervals.
pub fn tiou(a: (f64, f64), b: (f64, f64)) -> f64 {
    interval_iou(a, b)
}

/// Sum of per-frame box IoUs over frames in both intervals, divided by the
/// number of frames in either.
pub fn viou(pred: &TubePrediction, gt_clip: (usize, usize), gt_boxes: &BTreeMap<usize, BBox>) -> f64 {
    let (ps, pe) = pred.interval;
    let (gs, ge) = gt_clip;
    let union = (pe.max(ge) + 1 - ps.min(gs)) - gap(pred.interval, gt_clip);
    let total: f64 = (ps.max(gs)..=pe.min(ge))
        .filter_map(|t| Some(pred.box_at(t)?.iou(gt_boxes.get(&t)?)))
        .sum();
    total / union as f64
}

/// Frames strictly between two disjoint inclusive intervals.
fn gap(a: (usize, usize), b: (usize, usize)) -> usize {
    let (lo, hi) = if a.0 <= b.0 { (a, b) } else { (b, a) };
    hi.0.saturating_sub(lo.1 + 1)
}

/// Means over a set of samples; `None` when the set is empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub count: usize,
    pub m_tiou: Option<f64>,
    pub m_viou: Option<f64>,
    #[serde(rename = "viou@0.3")]
    pub viou_at_03: Option<f64>,
    #[serde(rename = "viou@0.5")]
    pub viou_at_05: Option<f64>,
    pub mean_energy: Option<f64>,
}

impl EvalSummary {
    fn from_samples(samples: &[(f64, f64, f64)]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let n = samples.len() as f64;
        let mean = |f: &dyn Fn(&(f64, f64, f64)) -> f64| Some(samples.iter().map(f).sum::<f64>() / n);
        Self {
            count: samples.len(),
            m_tiou: mean(&|s| s.0),
            m_viou: mean(&|s| s.1),
            viou_at_03: mean(&|s| f64::from(u8::from(s.1 > 0.3))),
            viou_at_05: mean(&|s| f64::from(u8::from(s.1 > 0.5))),
            mean_energy: mean(&|s| s.2),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: EvalSummary,
    pub declarative: EvalSummary,
    pub interrogative: EvalSummary,
}

/// Per-sample `(tIoU, vIoU)`; tIoU counts frames of inclusive intervals.
pub fn sample_metrics(pred: &TubePrediction, record: &AnnotationRecord) -> (f64, f64) {
    (
        frame_iou(pred.interval, record.gt_clip),
        viou(pred, record.gt_clip, &record.gt_boxes),
    )
}

pub fn evaluate(predictions: &[TubePrediction], records: &[AnnotationRecord]) -> Result<EvalReport> {
    if predictions.len() != records.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} records",
            predictions.len(),
            records.len()
        )));
    }
    let mut all = Vec::new();
    let mut by_type: [Vec<(f64, f64, f64)>; 2] = [Vec::new(), Vec::new()];
    for (p, r) in predictions.iter().zip(records) {
        let (t, v) = sample_metrics(p, r);
        let row = (t, v, p.energy);
        all.push(row);
        by_type[usize::from(r.query_type == QueryType::Interrogative)].push(row);
    }
    Ok(EvalReport {
        overall: EvalSummary::from_samples(&all),
        declarative: EvalSummary::from_samples(&by_type[0]),
        interrogative: EvalSummary::from_samples(&by_type[1]),
    })
}

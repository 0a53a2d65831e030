//! Frame aggregation, multi-scale clip scoring with boundary offsets, region
//! matching scores, training targets and losses.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::geometry::{interval_iou, BBox};
use crate::lang::BiGru;
use crate::params::{ParamId, ParamStore};
use crate::tensor::Matrix;

pub const DEFAULT_WIDTHS: [usize; 8] = [8, 16, 32, 64, 96, 128, 164, 196];

/// Loss weights `(λ_align, λ_reg, λ_exp)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lambdas {
    pub align: f64,
    pub reg: f64,
    pub exp: f64,
}

impl Default for Lambdas {
    fn default() -> Self {
        Self {
            align: 1.0,
            reg: 0.001,
            exp: 1.0,
        }
    }
}

/// Window of width `width` centred on frame `t`; bounds are not clamped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipCandidate {
    pub t: usize,
    pub width: usize,
    pub start: f64,
    pub end: f64,
}

impl ClipCandidate {
    /// Bounds clamped to `[1, n]`.
    pub fn clamped(&self, n: usize) -> (f64, f64) {
        let hi = n as f64;
        (self.start.clamp(1.0, hi), self.end.clamp(1.0, hi))
    }
}

/// All `N x P` candidates of a video.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateGrid {
    pub num_frames: usize,
    pub widths: Vec<usize>,
    /// Column indices ordered by width, then position.
    order: Vec<usize>,
}

impl CandidateGrid {
    pub fn new(num_frames: usize, widths: &[usize]) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::Config("candidate widths must be non-empty".into()));
        }
        if widths.contains(&0) {
            return Err(Error::Config("candidate widths must be positive".into()));
        }
        let mut order: Vec<usize> = (0..widths.len()).collect();
        order.sort_by_key(|&p| (widths[p], p));
        Ok(Self {
            num_frames,
            widths: widths.to_vec(),
            order,
        })
    }

    pub fn num_widths(&self) -> usize {
        self.widths.len()
    }

    pub fn len(&self) -> usize {
        self.num_frames * self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Candidate at 1-based frame `t` with width column `p`.
    pub fn get(&self, t: usize, p: usize) -> ClipCandidate {
        let w = self.widths[p];
        let half = w as f64 / 2.0;
        ClipCandidate {
            t,
            width: w,
            start: t as f64 - half,
            end: t as f64 + half,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ClipCandidate> + '_ {
        (1..=self.num_frames).flat_map(move |t| (0..self.widths.len()).map(move |p| self.get(t, p)))
    }

    /// `(t, p)` of the highest score in `scores` (`N x P`); ties go to the
    /// earlier frame, then the narrower width.
    pub fn best(&self, scores: &Matrix) -> (usize, usize) {
        assert_eq!(scores.shape(), (self.num_frames, self.num_widths()), "score grid shape");
        let mut best = (1, self.order[0]);
        let mut best_score = f64::NEG_INFINITY;
        for t in 1..=self.num_frames {
            for &p in &self.order {
                let s = scores.get(t - 1, p);
                if s > best_score {
                    best_score = s;
                    best = (t, p);
                }
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalizerParams {
    pub agg_region: ParamId,
    pub agg_query: ParamId,
    pub agg_b: ParamId,
    pub agg_v: ParamId,
    pub frame_gru: BiGru,
    pub clip_w: ParamId,
    pub clip_b: ParamId,
    pub offset_w: ParamId,
    pub offset_b: ParamId,
    pub match_w: ParamId,
    pub match_b: ParamId,
}

/// Sizes for [`LocalizerParams::new`].
#[derive(Clone, Copy, Debug)]
pub struct LocalizerDims {
    pub model_dim: usize,
    pub query_dim: usize,
    pub frame_dim: usize,
    pub hidden: usize,
    pub attn_dim: usize,
    pub num_widths: usize,
}

impl LocalizerParams {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, dims: LocalizerDims, rng: &mut R) -> Self {
        let LocalizerDims {
            model_dim: dm,
            query_dim: dq,
            frame_dim,
            hidden,
            attn_dim: da,
            num_widths: p,
        } = dims;
        let dh = 2 * hidden;
        Self {
            agg_region: store.add_weight("loc.agg_region", dm, da, rng),
            agg_query: store.add_weight("loc.agg_query", dq, da, rng),
            agg_b: store.add_bias("loc.agg_b", da, da, rng),
            agg_v: store.add_weight("loc.agg_v", da, 1, rng),
            frame_gru: BiGru::new(store, "loc.frame_gru", dm + frame_dim, hidden, rng),
            clip_w: store.add_weight("loc.clip_w", dh + dq, p, rng),
            clip_b: store.add_bias("loc.clip_b", dh + dq, p, rng),
            offset_w: store.add_weight("loc.offset_w", dh + dq, 2 * p, rng),
            offset_b: store.add_bias("loc.offset_b", dh + dq, 2 * p, rng),
            match_w: store.add_weight("loc.match_w", dm + dq + dh, 1, rng),
            match_b: store.add_bias("loc.match_b", dm + dq + dh, 1, rng),
        }
    }
}

/// Frame-level features.
pub struct FrameAggregate {
    /// Attended region feature per frame, `N x dm`.
    pub pooled: Var,
    /// Recurrent frame features, `N x 2H`.
    pub hidden: Var,
    /// Attention over valid regions, aligned with `nodes`.
    pub weights: Var,
    pub nodes: Vec<usize>,
}

/// Query-guided attention over each frame's valid regions, then a BiGRU over
/// `[pooled ; frame feature]`. Frames without valid regions pool to zero.
pub fn aggregate_frames(
    tape: &mut Tape,
    regions: Var,
    frame_features: Var,
    query: Var,
    valid: &[bool],
    regions_per_frame: usize,
    p: &LocalizerParams,
) -> FrameAggregate {
    let n = tape.shape(frame_features).0;
    let nodes: Vec<usize> = (0..valid.len()).filter(|&i| valid[i]).collect();
    let frame_of: Vec<usize> = nodes.iter().map(|&i| i / regions_per_frame).collect();
    let wr = tape.param(p.agg_region);
    let wq = tape.param(p.agg_query);
    let b = tape.param(p.agg_b);
    let v = tape.param(p.agg_v);
    let m = tape.gather_rows(regions, nodes.clone());
    let qa = tape.matmul(query, wq);
    let qa = tape.add(qa, b);
    let ra = tape.matmul(m, wr);
    let pre = tape.add_row(ra, qa);
    let pre = tape.tanh(pre);
    let logits = tape.matmul(pre, v);
    let weights = tape.segment_softmax(logits, frame_of.clone());
    let weighted = tape.mul_col(m, weights);
    let pooled = tape.scatter_add_rows(weighted, frame_of, n);
    let x = tape.concat_cols(&[pooled, frame_features]);
    let hidden = p.frame_gru.run(tape, x).steps;
    FrameAggregate {
        pooled,
        hidden,
        weights,
        nodes,
    }
}

/// Head outputs on a tape.
#[derive(Clone, Copy, Debug)]
pub struct GroundingOutput {
    /// Clip confidences `N x P`.
    pub confidence: Var,
    /// Offsets `N x 2P`; column `2p` is the start offset of width `p`,
    /// `2p + 1` the end offset.
    pub offsets: Var,
    /// Region matching scores `NK x 1` in node order.
    pub matching: Var,
}

/// Plain values of a [`GroundingOutput`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundingValues {
    pub confidence: Matrix,
    pub offsets: Matrix,
    /// `N x K`.
    pub matching: Matrix,
}

impl GroundingOutput {
    pub fn values(&self, tape: &Tape, regions_per_frame: usize) -> GroundingValues {
        let s = tape.value(self.matching);
        let n = s.rows() / regions_per_frame;
        GroundingValues {
            confidence: tape.value(self.confidence).clone(),
            offsets: tape.value(self.offsets).clone(),
            matching: Matrix::from_vec(n, regions_per_frame, s.data().to_vec()),
        }
    }
}

/// `C = σ(W_c [h ; s_q] + b_c)`, `δ = W_o [h ; s_q] + b_o`,
/// `S = σ(W_s [m ; s_q ; h] + b_s)`.
pub fn predict_heads(
    tape: &mut Tape,
    hidden: Var,
    regions: Var,
    query: Var,
    regions_per_frame: usize,
    p: &LocalizerParams,
) -> GroundingOutput {
    let n = tape.shape(hidden).0;
    let nk = tape.shape(regions).0;
    let q_frames = tape.gather_rows(query, vec![0; n]);
    let hq = tape.concat_cols(&[hidden, q_frames]);
    let cw = tape.param(p.clip_w);
    let cb = tape.param(p.clip_b);
    let c = tape.matmul(hq, cw);
    let c = tape.add_row(c, cb);
    let confidence = tape.sigmoid(c);
    let ow = tape.param(p.offset_w);
    let ob = tape.param(p.offset_b);
    let o = tape.matmul(hq, ow);
    let offsets = tape.add_row(o, ob);
    let q_nodes = tape.gather_rows(query, vec![0; nk]);
    let h_nodes = tape.gather_rows(hidden, (0..nk).map(|i| i / regions_per_frame).collect());
    let x = tape.concat_cols(&[regions, q_nodes, h_nodes]);
    let sw = tape.param(p.match_w);
    let sb = tape.param(p.match_b);
    let s = tape.matmul(x, sw);
    let s = tape.add_row(s, sb);
    GroundingOutput {
        confidence,
        offsets,
        matching: tape.sigmoid(s),
    }
}

/// Supervision for one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    /// Soft clip labels `N x P`.
    pub clip_iou: Matrix,
    /// `(t, p)` of the clip whose offsets are regressed.
    pub best: (usize, usize),
    /// `(s - ŝ, e - ê)` for the best clip.
    pub offsets: (f64, f64),
    /// Node indices of every region in a ground-truth frame.
    pub region_nodes: Vec<usize>,
    /// Box IoU with the ground truth, aligned with `region_nodes`.
    pub region_iou: Vec<f64>,
    pub gt_frames: usize,
}

/// Targets from the ground truth and the current confidence grid.
pub fn compute_targets(
    grid: &CandidateGrid,
    gt_clip: (usize, usize),
    region_boxes: &[Vec<BBox>],
    gt_boxes: &BTreeMap<usize, BBox>,
    predicted: &Matrix,
) -> Result<Targets> {
    let n = grid.num_frames;
    let (gs, ge) = gt_clip;
    if gs < 1 || gs > ge || ge > n {
        return Err(Error::invalid(
            0,
            "gt_clip",
            format!("empty or out-of-range clip ({gs}, {ge}) for {n} frames"),
        ));
    }
    if region_boxes.len() != n {
        return Err(Error::Input(format!(
            "{} frames of boxes for a {n}-frame grid",
            region_boxes.len()
        )));
    }
    let gt = (gs as f64, ge as f64);
    let mut clip_iou = Matrix::zeros(n, grid.num_widths());
    for t in 1..=n {
        for p in 0..grid.num_widths() {
            clip_iou.set(t - 1, p, interval_iou(grid.get(t, p).clamped(n), gt));
        }
    }
    let best = grid.best(predicted);
    let cand = grid.get(best.0, best.1);
    let k = region_boxes.first().map_or(0, Vec::len);
    let mut region_nodes = Vec::with_capacity(k * (ge - gs + 1));
    let mut region_iou = Vec::with_capacity(k * (ge - gs + 1));
    for t in gs..=ge {
        let gt_box = gt_boxes.get(&t).ok_or_else(|| {
            Error::invalid(0, "gt_boxes", format!("no ground-truth box for frame {t}"))
        })?;
        for (i, b) in region_boxes[t - 1].iter().enumerate() {
            region_nodes.push((t - 1) * k + i);
            region_iou.push(b.iou(gt_box));
        }
    }
    Ok(Targets {
        clip_iou,
        best,
        offsets: (cand.start - gt.0, cand.end - gt.1),
        region_nodes,
        region_iou,
        gt_frames: ge - gs + 1,
    })
}

/// The three criteria and their weighted sum, all `1 x 1`.
#[derive(Clone, Copy, Debug)]
pub struct Losses {
    pub align: Var,
    pub reg: Var,
    pub exp: Var,
    pub total: Var,
}

/// Loss values read off a tape.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossValues {
    pub align: f64,
    pub reg: f64,
    pub exp: f64,
    pub total: f64,
}

impl Losses {
    pub fn values(&self, tape: &Tape) -> LossValues {
        LossValues {
            align: tape.value(self.align).scalar(),
            reg: tape.value(self.reg).scalar(),
            exp: tape.value(self.exp).scalar(),
            total: tape.value(self.total).scalar(),
        }
    }
}

pub fn compute_losses(
    tape: &mut Tape,
    out: &GroundingOutput,
    targets: &Targets,
    lambdas: Lambdas,
) -> Losses {
    let (n, p) = tape.shape(out.confidence);
    let align = tape.soft_bce(
        out.confidence,
        targets.clip_iou.data().to_vec(),
        1.0 / (n * p) as f64,
    );
    let (t, q) = targets.best;
    let row = tape.slice_rows(out.offsets, t - 1, 1);
    let pair = tape.slice_cols(row, 2 * q, 2);
    let reg = tape.smooth_l1(pair, vec![targets.offsets.0, targets.offsets.1]);
    let s = tape.gather_rows(out.matching, targets.region_nodes.clone());
    let exp = tape.soft_bce(
        s,
        targets.region_iou.clone(),
        1.0 / targets.region_nodes.len().max(1) as f64,
    );
    let a = tape.scale(align, lambdas.align);
    let r = tape.scale(reg, lambdas.reg);
    let e = tape.scale(exp, lambdas.exp);
    let total = tape.add_all(&[a, r, e]);
    Losses {
        align,
        reg,
        exp,
        total,
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::tensor::{dot, sigmoid, softmax};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const DM: usize = 3;
    const DQ: usize = 4;
    const DF: usize = 2;

    fn params(p: usize, seed: u64) -> (ParamStore, LocalizerParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let lp = LocalizerParams::new(
            &mut store,
            LocalizerDims {
                model_dim: DM,
                query_dim: DQ,
                frame_dim: DF,
                hidden: 2,
                attn_dim: 2,
                num_widths: p,
            },
            &mut rng,
        );
        (store, lp)
    }

    fn matvec(w: &Matrix, x: &[f64]) -> Vec<f64> {
        (0..w.cols())
            .map(|c| (0..w.rows()).map(|k| x[k] * w.get(k, c)).sum())
            .collect()
    }

    #[test]
    fn candidates() {
        let g = CandidateGrid::new(20, &[8]).unwrap();
        assert_eq!(g.len(), 20);
        let c = CandidateGrid::new(30, &DEFAULT_WIDTHS).unwrap().get(10, 0);
        assert_eq!((c.start, c.end), (6.0, 14.0));
        assert_eq!(CandidateGrid::new(30, &DEFAULT_WIDTHS).unwrap().num_widths(), 8);
        assert!(CandidateGrid::new(5, &[]).is_err());
    }

    #[test]
    fn best_breaks_ties_by_time_then_width() {
        let g = CandidateGrid::new(3, &[16, 8]).unwrap();
        let scores = Matrix::filled(3, 2, 0.5);
        assert_eq!(g.best(&scores), (1, 1));
        let mut s2 = scores.clone();
        s2.set(2, 0, 0.9);
        s2.set(1, 1, 0.9);
        assert_eq!(g.best(&s2), (2, 1));
    }

    #[test]
    fn aggregate_matches_scalar_oracle() {
        let (store, p) = params(2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mm = Matrix::uniform(6, DM, 1.0, &mut rng);
        let ff = Matrix::uniform(2, DF, 1.0, &mut rng);
        let qm = Matrix::uniform(1, DQ, 1.0, &mut rng);
        let mut tape = Tape::new(&store);
        let (m, f, q) = (tape.constant(mm.clone()), tape.constant(ff), tape.constant(qm.clone()));
        let valid = [true, true, true, true, false, true];
        let agg = aggregate_frames(&mut tape, m, f, q, &valid, 3, &p);
        let pooled = tape.value(agg.pooled).clone();
        let qa: Vec<f64> = matvec(store.get(p.agg_query), qm.row(0))
            .iter()
            .zip(store.get(p.agg_b).row(0))
            .map(|(a, b)| a + b)
            .collect();
        for (t, regs) in [(0, vec![0, 1, 2]), (1, vec![3, 5])] {
            let logits: Vec<f64> = regs
                .iter()
                .map(|&i| {
                    let h: Vec<f64> = matvec(store.get(p.agg_region), mm.row(i))
                        .iter()
                        .zip(&qa)
                        .map(|(a, b)| (a + b).tanh())
                        .collect();
                    dot(&h, store.get(p.agg_v).data())
                })
                .collect();
            let w = softmax(&logits);
            for c in 0..DM {
                let want: f64 = regs.iter().zip(&w).map(|(&i, a)| a * mm.get(i, c)).sum();
                assert!((pooled.get(t, c) - want).abs() < 1e-9);
            }
        }
        assert_eq!(tape.shape(agg.hidden), (2, 4));
    }

    #[test]
    fn aggregate_identical_regions_and_singleton() {
        let (store, p) = params(2, 3);
        let mut tape = Tape::new(&store);
        let m = tape.constant(Matrix::from_rows(&vec![vec![0.2, -0.4, 0.9]; 3]));
        let f = tape.constant(Matrix::zeros(1, DF));
        let q = tape.constant(Matrix::filled(1, DQ, 0.1));
        let agg = aggregate_frames(&mut tape, m, f, q, &[true; 3], 3, &p);
        let pooled = tape.value(agg.pooled);
        for (c, want) in [0.2, -0.4, 0.9].iter().enumerate() {
            assert!((pooled.get(0, c) - want).abs() < 1e-12);
        }
        let m1 = tape.constant(Matrix::from_rows(&[vec![0.5, 0.6, 0.7]]));
        let agg1 = aggregate_frames(&mut tape, m1, f, q, &[true], 1, &p);
        assert_eq!(tape.value(agg1.pooled).row(0), &[0.5, 0.6, 0.7]);
    }

    #[test]
    fn heads_zero_weights_and_scalar_oracle() {
        let (mut store, p) = params(3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hm = Matrix::uniform(2, 4, 1.0, &mut rng);
        let mm = Matrix::uniform(4, DM, 1.0, &mut rng);
        let qm = Matrix::uniform(1, DQ, 1.0, &mut rng);
        {
            let mut tape = Tape::new(&store);
            let (h, m, q) = (tape.constant(hm.clone()), tape.constant(mm.clone()), tape.constant(qm.clone()));
            let out = predict_heads(&mut tape, h, m, q, 2, &p);
            let vals = out.values(&tape, 2);
            assert_eq!(vals.confidence.shape(), (2, 3));
            assert_eq!(vals.offsets.shape(), (2, 6));
            assert_eq!(vals.matching.shape(), (2, 2));
            for t in 0..2 {
                let x: Vec<f64> = hm.row(t).iter().chain(qm.row(0)).copied().collect();
                let c = matvec(store.get(p.clip_w), &x);
                let o = matvec(store.get(p.offset_w), &x);
                for j in 0..3 {
                    let want = sigmoid(c[j] + store.get(p.clip_b).get(0, j));
                    assert!((vals.confidence.get(t, j) - want).abs() < 1e-9);
                }
                for j in 0..6 {
                    assert!((vals.offsets.get(t, j) - o[j] - store.get(p.offset_b).get(0, j)).abs() < 1e-9);
                }
                for i in 0..2 {
                    let node = t * 2 + i;
                    let x: Vec<f64> = mm.row(node).iter().chain(qm.row(0)).chain(hm.row(t)).copied().collect();
                    let want = sigmoid(matvec(store.get(p.match_w), &x)[0] + store.get(p.match_b).get(0, 0));
                    assert!((vals.matching.get(t, i) - want).abs() < 1e-9);
                }
            }
        }
        for id in [p.clip_w, p.clip_b, p.offset_w, p.offset_b, p.match_w, p.match_b] {
            let (r, c) = store.get(id).shape();
            *store.get_mut(id) = Matrix::zeros(r, c);
        }
        let mut tape = Tape::new(&store);
        let (h, m, q) = (tape.constant(hm), tape.constant(mm), tape.constant(qm));
        let vals = predict_heads(&mut tape, h, m, q, 2, &p).values(&tape, 2);
        assert!(vals.confidence.data().iter().all(|&x| x == 0.5));
        assert!(vals.matching.data().iter().all(|&x| x == 0.5));
        assert!(vals.offsets.data().iter().all(|&x| x == 0.0));
    }

    fn boxes(n: usize, k: usize) -> Vec<Vec<BBox>> {
        (0..n)
            .map(|_| (0..k).map(|i| BBox::new(0.2 + 0.3 * i as f64, 0.5, 0.2, 0.2)).collect())
            .collect()
    }

    fn gt_boxes(range: std::ops::RangeInclusive<usize>) -> BTreeMap<usize, BBox> {
        range.map(|t| (t, BBox::new(0.2, 0.5, 0.2, 0.2))).collect()
    }

    #[test]
    fn targets_offsets_and_soft_labels() {
        let g = CandidateGrid::new(20, &[8]).unwrap();
        let mut pred = Matrix::filled(20, 1, 0.1);
        pred.set(9, 0, 0.9);
        let t = compute_targets(&g, (5, 12), &boxes(20, 2), &gt_boxes(5..=12), &pred).unwrap();
        assert_eq!(t.best, (10, 0));
        assert_eq!(t.offsets, (1.0, 2.0));
        // Candidate at t = 9 spans (5, 13): against (5, 12) the IoU is 7/8.
        assert!((t.clip_iou.get(8, 0) - 7.0 / 8.0).abs() < 1e-12);
        assert_eq!(t.region_nodes.len(), 16);
        assert_eq!(t.region_iou[0], 1.0);
        assert_eq!(t.gt_frames, 8);

        let g = CandidateGrid::new(20, &[10]).unwrap();
        let t = compute_targets(&g, (1, 11), &boxes(20, 1), &gt_boxes(1..=11), &Matrix::zeros(20, 1)).unwrap();
        // Candidate at t = 6 spans (1, 11): identical to the ground truth.
        assert_eq!(t.clip_iou.get(5, 0), 1.0);
        // Candidate at t = 5 spans (0, 10), clamped to (1, 10).
        assert!((t.clip_iou.get(4, 0) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn clamped_candidate_against_gt() {
        let g = CandidateGrid::new(20, &[10]).unwrap();
        let t = compute_targets(&g, (5, 15), &boxes(20, 1), &gt_boxes(5..=15), &Matrix::zeros(20, 1)).unwrap();
        // (0, 10) clamps to (1, 10); overlap 5 over union 14.
        assert!((t.clip_iou.get(4, 0) - 5.0 / 14.0).abs() < 1e-12);
        assert!((interval_iou((0.0, 10.0), (5.0, 15.0)) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_clip_rejected() {
        let g = CandidateGrid::new(10, &[4]).unwrap();
        let r = compute_targets(&g, (6, 5), &boxes(10, 1), &BTreeMap::new(), &Matrix::zeros(10, 1));
        assert!(matches!(r, Err(Error::Validation { .. })));
    }

    fn constant_output(tape: &mut Tape, c: Matrix, o: Matrix, s: Matrix) -> GroundingOutput {
        GroundingOutput {
            confidence: tape.constant(c),
            offsets: tape.constant(o),
            matching: tape.constant(s),
        }
    }

    #[test]
    fn hand_losses() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let out = constant_output(
            &mut tape,
            Matrix::filled(1, 1, 0.5),
            Matrix::from_rows(&[vec![0.5, 2.0]]),
            Matrix::column(vec![0.5]),
        );
        let targets = Targets {
            clip_iou: Matrix::filled(1, 1, 0.5),
            best: (1, 0),
            offsets: (0.0, 0.0),
            region_nodes: vec![0],
            region_iou: vec![0.5],
            gt_frames: 1,
        };
        let l = compute_losses(&mut tape, &out, &targets, Lambdas::default()).values(&tape);
        assert!((l.align - std::f64::consts::LN_2).abs() < 1e-9);
        assert!((l.reg - 1.625).abs() < 1e-9);
        assert!((l.exp - std::f64::consts::LN_2).abs() < 1e-9);
        assert!((l.total - (l.align + 0.001 * l.reg + l.exp)).abs() < 1e-15);
    }

    #[test]
    fn perfect_confident_alignment_is_zero() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let out = constant_output(&mut tape, Matrix::filled(2, 2, 1.0), Matrix::zeros(2, 4), Matrix::column(vec![1.0]));
        let targets = Targets {
            clip_iou: Matrix::filled(2, 2, 1.0),
            best: (1, 0),
            offsets: (0.0, 0.0),
            region_nodes: vec![0],
            region_iou: vec![1.0],
            gt_frames: 1,
        };
        let l = compute_losses(&mut tape, &out, &targets, Lambdas::default()).values(&tape);
        assert!(l.align < 1e-6 && l.reg == 0.0);
    }

    #[test]
    fn alignment_minimized_at_target() {
        for y in [0.1, 0.37, 0.5, 0.9] {
            let loss = |c: f64| {
                let store = ParamStore::new();
                let mut tape = Tape::new(&store);
                let v = tape.constant(Matrix::filled(1, 1, c));
                let l = tape.soft_bce(v, vec![y], 1.0);
                tape.value(l).scalar()
            };
            let at = loss(y);
            for k in 1..100 {
                assert!(loss(k as f64 / 100.0) >= at - 1e-12);
            }
        }
    }
}

//! Cross-modal fusion of regions with the sentence and stacked
//! spatio-temporal graph convolutions.
//!
//! All region tensors are `NK x d` with rows in graph node order. Padding
//! regions only ever message themselves and their rows are zeroed after the
//! fusion and after every layer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{Direction, Message, SpatioTemporalGraph};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Matrix;
use crate::vocab::NUM_EDGE_LABELS;

pub const DEFAULT_MODEL_DIM: usize = 256;
pub const DEFAULT_LAYERS: usize = 2;
/// Width of the box vector appended for implicit attention.
pub const BOX_DIM: usize = 4;

/// Which subgraphs take part in each layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgraphs {
    pub implicit: bool,
    pub explicit: bool,
    pub temporal: bool,
}

impl Default for Subgraphs {
    fn default() -> Self {
        Self::ALL
    }
}

impl Subgraphs {
    pub const ALL: Subgraphs = Subgraphs {
        implicit: true,
        explicit: true,
        temporal: true,
    };
    pub const NONE: Subgraphs = Subgraphs {
        implicit: false,
        explicit: false,
        temporal: false,
    };
}

/// Message list in column form, ready for gathers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MessageIndex {
    pub receivers: Vec<usize>,
    pub sources: Vec<usize>,
    pub directions: Vec<Direction>,
    pub labels: Vec<usize>,
}

impl MessageIndex {
    pub fn new(messages: &[Message]) -> Self {
        Self {
            receivers: messages.iter().map(|m| m.receiver).collect(),
            sources: messages.iter().map(|m| m.source).collect(),
            directions: messages.iter().map(|m| m.direction).collect(),
            labels: messages.iter().map(|m| m.label).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.receivers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.receivers.is_empty()
    }

    /// Positions of the messages with direction `d`.
    fn with_direction(&self, d: Direction) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.directions[k] == d).collect()
    }
}

/// Graph messages of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphIndex {
    pub num_nodes: usize,
    pub regions_per_frame: usize,
    pub valid: Vec<bool>,
    pub implicit: MessageIndex,
    pub explicit: MessageIndex,
    pub temporal: MessageIndex,
}

impl GraphIndex {
    pub fn new(graph: &SpatioTemporalGraph) -> Result<Self> {
        let explicit = graph.explicit_messages();
        if let Some(bad) = explicit.iter().find(|m| m.label >= NUM_EDGE_LABELS) {
            return Err(Error::invalid(
                graph.locate(bad.receiver).0,
                "label",
                format!("edge label {} >= {NUM_EDGE_LABELS}", bad.label),
            ));
        }
        Ok(Self {
            num_nodes: graph.num_nodes(),
            regions_per_frame: graph.regions_per_frame,
            valid: graph.valid.clone(),
            implicit: MessageIndex::new(&graph.implicit_messages()),
            explicit: MessageIndex::new(&explicit),
            temporal: MessageIndex::new(&graph.temporal_messages()),
        })
    }

    /// `NK x 1` column of 1 for real regions and 0 for padding.
    pub fn mask(&self) -> Matrix {
        Matrix::column(self.valid.iter().map(|&v| f64::from(u8::from(v))).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionParams {
    /// Raw region feature to model width.
    pub region_w: ParamId,
    pub region_b: ParamId,
    pub attn_region: ParamId,
    pub attn_word: ParamId,
    pub attn_b: ParamId,
    pub attn_v: ParamId,
    pub gate_w: ParamId,
    pub gate_b: ParamId,
    /// Region-aware textual feature to model width.
    pub text_w: ParamId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerParams {
    pub in_dim: usize,
    pub imp_u: ParamId,
    pub imp_w: ParamId,
    pub exp_w: [ParamId; 3],
    pub exp_b: ParamId,
    pub tem_u: ParamId,
    pub tem_v: [ParamId; 3],
    pub tem_w: [ParamId; 3],
    /// Projection of the layer input for the residual term; `None` when the
    /// input already has the model width.
    pub residual: Option<ParamId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonerParams {
    pub model_dim: usize,
    pub fusion: FusionParams,
    pub relation_w: ParamId,
    pub relation_b: ParamId,
    pub layers: Vec<LayerParams>,
}

/// Sizes for [`ReasonerParams::new`].
#[derive(Clone, Copy, Debug)]
pub struct ReasonerDims {
    pub region_dim: usize,
    pub word_dim: usize,
    pub query_dim: usize,
    pub model_dim: usize,
    pub attn_dim: usize,
    pub layers: usize,
}

impl ReasonerParams {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, dims: ReasonerDims, rng: &mut R) -> Self {
        let ReasonerDims {
            region_dim,
            word_dim,
            query_dim,
            model_dim: dm,
            attn_dim: da,
            layers,
        } = dims;
        let fusion = FusionParams {
            region_w: store.add_weight("fusion.region_w", region_dim, dm, rng),
            region_b: store.add_bias("fusion.region_b", region_dim, dm, rng),
            attn_region: store.add_weight("fusion.attn_region", dm, da, rng),
            attn_word: store.add_weight("fusion.attn_word", word_dim, da, rng),
            attn_b: store.add_bias("fusion.attn_b", da, da, rng),
            attn_v: store.add_weight("fusion.attn_v", da, 1, rng),
            gate_w: store.add_weight("fusion.gate_w", word_dim, dm, rng),
            gate_b: store.add_bias("fusion.gate_b", word_dim, dm, rng),
            text_w: store.add_weight("fusion.text_w", word_dim, dm, rng),
        };
        let relation_w = store.add_weight("relation.w", query_dim, NUM_EDGE_LABELS, rng);
        let relation_b = store.add_bias("relation.b", query_dim, NUM_EDGE_LABELS, rng);
        let layers = (0..layers)
            .map(|l| {
                let in_dim = if l == 0 { 2 * dm } else { dm };
                let name = |s: &str| format!("layer{l}.{s}");
                let dirs = |store: &mut ParamStore, s: &str, out: usize, rng: &mut R| {
                    [0, 1, 2].map(|d| store.add_weight(name(&format!("{s}{d}")), in_dim, out, rng))
                };
                LayerParams {
                    in_dim,
                    imp_u: store.add_weight(name("imp_u"), in_dim + BOX_DIM, da, rng),
                    imp_w: store.add_weight(name("imp_w"), in_dim, dm, rng),
                    exp_w: dirs(store, "exp_w", dm, rng),
                    exp_b: store.add(
                        name("exp_b"),
                        Matrix::uniform(NUM_EDGE_LABELS, dm, 1.0 / (dm as f64).sqrt(), rng),
                    ),
                    tem_u: store.add_weight(name("tem_u"), in_dim, da, rng),
                    tem_v: dirs(store, "tem_v", da, rng),
                    tem_w: dirs(store, "tem_w", dm, rng),
                    residual: (in_dim != dm).then(|| store.add_weight(name("residual"), in_dim, dm, rng)),
                }
            })
            .collect();
        Self {
            model_dim: dm,
            fusion,
            relation_w,
            relation_b,
            layers,
        }
    }
}

/// Fused region features and intermediates.
pub struct Fusion {
    /// `NK x 2 dm`: `[r ⊙ g ; q W_q]`.
    pub v: Var,
    /// Region-aware textual features `NK x d_s`.
    pub text: Var,
    pub gate: Var,
    /// Word attention, `NK·L x 1`, region-major.
    pub attention: Var,
}

/// Additive word attention per region, textual gate, concatenation.
pub fn cross_modal_fusion(
    tape: &mut Tape,
    regions: Var,
    mask: Var,
    words: Var,
    p: &FusionParams,
) -> Fusion {
    let nk = tape.shape(regions).0;
    let l = tape.shape(words).0;
    let rw = tape.param(p.region_w);
    let rb = tape.param(p.region_b);
    let r = tape.matmul(regions, rw);
    let r = tape.add_row(r, rb);

    let wa = tape.param(p.attn_region);
    let ww = tape.param(p.attn_word);
    let ab = tape.param(p.attn_b);
    let av = tape.param(p.attn_v);
    let ra = tape.matmul(r, wa);
    let sa = tape.matmul(words, ww);
    let sa = tape.add_row(sa, ab);
    let region_of: Vec<usize> = (0..nk).flat_map(|i| std::iter::repeat_n(i, l)).collect();
    let word_of: Vec<usize> = (0..nk).flat_map(|_| 0..l).collect();
    let ra_e = tape.gather_rows(ra, region_of.clone());
    let sa_e = tape.gather_rows(sa, word_of.clone());
    let pre = tape.add(ra_e, sa_e);
    let pre = tape.tanh(pre);
    let logits = tape.matmul(pre, av);
    let attention = tape.segment_softmax(logits, region_of.clone());
    let words_e = tape.gather_rows(words, word_of);
    let weighted = tape.mul_col(words_e, attention);
    let text = tape.scatter_add_rows(weighted, region_of, nk);

    let gw = tape.param(p.gate_w);
    let gb = tape.param(p.gate_b);
    let gate = tape.matmul(text, gw);
    let gate = tape.add_row(gate, gb);
    let gate = tape.sigmoid(gate);
    let tw = tape.param(p.text_w);
    let text_proj = tape.matmul(text, tw);
    let gated = tape.mul(r, gate);
    let v = tape.concat_cols(&[gated, text_proj]);
    let v = tape.mul_col(v, mask);
    Fusion {
        v,
        text,
        gate,
        attention,
    }
}

/// `softmax(W_r s_q + b_r)` as a `51 x 1` column.
pub fn relation_coefficients(tape: &mut Tape, query: Var, p: &ReasonerParams) -> Var {
    let w = tape.param(p.relation_w);
    let b = tape.param(p.relation_b);
    let logits = tape.matmul(query, w);
    let logits = tape.add_row(logits, b);
    let logits = tape.transpose(logits);
    tape.softmax_col(logits)
}

/// Self-attention over each frame's regions using `U [v ; b]` keys.
pub fn implicit_conv(
    tape: &mut Tape,
    v: Var,
    boxes: Var,
    idx: &MessageIndex,
    layer: &LayerParams,
) -> Var {
    let nk = tape.shape(v).0;
    let u = tape.param(layer.imp_u);
    let w = tape.param(layer.imp_w);
    let vb = tape.concat_cols(&[v, boxes]);
    let keys = tape.matmul(vb, u);
    let vals = tape.matmul(v, w);
    let kr = tape.gather_rows(keys, idx.receivers.clone());
    let ks = tape.gather_rows(keys, idx.sources.clone());
    let logits = tape.row_dot(kr, ks);
    let alpha = tape.segment_softmax(logits, idx.receivers.clone());
    let msg = tape.gather_rows(vals, idx.sources.clone());
    let msg = tape.mul_col(msg, alpha);
    tape.scatter_add_rows(msg, idx.receivers.clone(), nk)
}

/// Labeled, directed convolution: every message contributes
/// `α[label] (W[dir] v_src + b[label])`.
pub fn explicit_conv(
    tape: &mut Tape,
    v: Var,
    idx: &MessageIndex,
    alpha: Var,
    layer: &LayerParams,
) -> Var {
    let nk = tape.shape(v).0;
    let bias = tape.param(layer.exp_b);
    let mut parts = Vec::new();
    let mut receivers = Vec::new();
    let mut labels = Vec::new();
    for d in Direction::ALL {
        let sel = idx.with_direction(d);
        if sel.is_empty() {
            continue;
        }
        let w = tape.param(layer.exp_w[d.index()]);
        let proj = tape.matmul(v, w);
        parts.push(tape.gather_rows(proj, sel.iter().map(|&k| idx.sources[k]).collect()));
        receivers.extend(sel.iter().map(|&k| idx.receivers[k]));
        labels.extend(sel.iter().map(|&k| idx.labels[k]));
    }
    if parts.is_empty() {
        let dm = tape.shape(bias).1;
        return tape.constant(Matrix::zeros(nk, dm));
    }
    let msg = tape.concat_rows(&parts);
    let b = tape.gather_rows(bias, labels.clone());
    let msg = tape.add(msg, b);
    let coef = tape.gather_rows(alpha, labels);
    let msg = tape.mul_col(msg, coef);
    tape.scatter_add_rows(msg, receivers, nk)
}

/// Direction-aware attention over each region's temporal neighbours.
pub fn temporal_conv(tape: &mut Tape, v: Var, idx: &MessageIndex, layer: &LayerParams) -> Var {
    let nk = tape.shape(v).0;
    let u = tape.param(layer.tem_u);
    let query = tape.matmul(v, u);
    let mut logits = Vec::new();
    let mut vals = Vec::new();
    let mut receivers = Vec::new();
    for d in Direction::ALL {
        let sel = idx.with_direction(d);
        if sel.is_empty() {
            continue;
        }
        let recv: Vec<usize> = sel.iter().map(|&k| idx.receivers[k]).collect();
        let src: Vec<usize> = sel.iter().map(|&k| idx.sources[k]).collect();
        let vk = tape.param(layer.tem_v[d.index()]);
        let wk = tape.param(layer.tem_w[d.index()]);
        let keys = tape.matmul(v, vk);
        let proj = tape.matmul(v, wk);
        let qr = tape.gather_rows(query, recv.clone());
        let ks = tape.gather_rows(keys, src.clone());
        logits.push(tape.row_dot(qr, ks));
        vals.push(tape.gather_rows(proj, src));
        receivers.extend(recv);
    }
    if logits.is_empty() {
        let dm = tape.params().get(layer.tem_w[0]).cols();
        return tape.constant(Matrix::zeros(nk, dm));
    }
    let logits = tape.concat_rows(&logits);
    let vals = tape.concat_rows(&vals);
    let alpha = tape.segment_softmax(logits, receivers.clone());
    let msg = tape.mul_col(vals, alpha);
    tape.scatter_add_rows(msg, receivers, nk)
}

/// Individual terms of one layer and its output.
pub struct LayerTerms {
    pub implicit: Option<Var>,
    pub explicit: Option<Var>,
    pub temporal: Option<Var>,
    pub residual: Var,
    pub output: Var,
}

/// `ReLU(v̄ + v̂ + ṽ + v_in)` over the enabled subgraphs, then masked.
#[allow(clippy::too_many_arguments)]
pub fn reason_layer(
    tape: &mut Tape,
    input: Var,
    boxes: Var,
    mask: Var,
    graph: &GraphIndex,
    alpha: Var,
    layer: &LayerParams,
    subgraphs: Subgraphs,
) -> LayerTerms {
    let implicit = subgraphs
        .implicit
        .then(|| implicit_conv(tape, input, boxes, &graph.implicit, layer));
    let explicit = subgraphs
        .explicit
        .then(|| explicit_conv(tape, input, &graph.explicit, alpha, layer));
    let temporal = subgraphs
        .temporal
        .then(|| temporal_conv(tape, input, &graph.temporal, layer));
    let residual = match layer.residual {
        Some(p) => {
            let w = tape.param(p);
            tape.matmul(input, w)
        }
        None => input,
    };
    let mut terms: Vec<Var> = [implicit, explicit, temporal].into_iter().flatten().collect();
    terms.push(residual);
    let sum = tape.add_all(&terms);
    let out = tape.relu(sum);
    let output = tape.mul_col(out, mask);
    LayerTerms {
        implicit,
        explicit,
        temporal,
        residual,
        output,
    }
}

/// Runs every layer; returns the final features `m` and per-layer terms.
#[allow(clippy::too_many_arguments)]
pub fn reason(
    tape: &mut Tape,
    fused: Var,
    boxes: Var,
    mask: Var,
    graph: &GraphIndex,
    alpha: Var,
    params: &ReasonerParams,
    subgraphs: Subgraphs,
) -> (Var, Vec<LayerTerms>) {
    let mut x = fused;
    let mut all = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let terms = reason_layer(tape, x, boxes, mask, graph, alpha, layer, subgraphs);
        x = terms.output;
        all.push(terms);
    }
    (x, all)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::featstore::RegionSet;
    use crate::geometry::BBox;
    use crate::graph::{build_graph, AnnotatedRelations, Triplet};
    use crate::tensor::{dot, sigmoid, softmax};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    const DR: usize = 5;
    const DS: usize = 4;
    const DM: usize = 3;
    const DA: usize = 2;

    fn params(layers: usize, seed: u64) -> (ParamStore, ReasonerParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let p = ReasonerParams::new(
            &mut store,
            ReasonerDims {
                region_dim: DR,
                word_dim: DS,
                query_dim: 2 * DS,
                model_dim: DM,
                attn_dim: DA,
                layers,
            },
            &mut rng,
        );
        (store, p)
    }

    fn frames(n: usize, k: usize, seed: u64) -> Vec<RegionSet> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (1..=n)
            .map(|t| RegionSet {
                frame_index: t,
                features: (0..k)
                    .map(|_| (0..DR).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect(),
                boxes: (0..k)
                    .map(|_| {
                        BBox::new(
                            rng.random_range(0.3..0.7),
                            rng.random_range(0.3..0.7),
                            rng.random_range(0.1..0.3),
                            rng.random_range(0.1..0.3),
                        )
                    })
                    .collect(),
                valid: vec![true; k],
                frame_feature: vec![0.0; 2],
            })
            .collect()
    }

    fn region_matrix(frames: &[RegionSet]) -> (Matrix, Matrix) {
        let feats: Vec<Vec<f64>> = frames.iter().flat_map(|f| f.features.clone()).collect();
        let boxes: Vec<Vec<f64>> = frames
            .iter()
            .flat_map(|f| f.boxes.iter().map(|b| b.to_array().to_vec()))
            .collect();
        (Matrix::from_rows(&feats), Matrix::from_rows(&boxes))
    }

    fn matvec(w: &Matrix, x: &[f64]) -> Vec<f64> {
        (0..w.cols())
            .map(|c| (0..w.rows()).map(|k| x[k] * w.get(k, c)).sum())
            .collect()
    }

    fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }

    #[test]
    fn fusion_matches_scalar_loop() {
        let (store, p) = params(1, 1);
        let fr = frames(1, 2, 2);
        let (regions, _) = region_matrix(&fr);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let words = Matrix::uniform(3, DS, 1.0, &mut rng);
        let mut tape = Tape::new(&store);
        let rv = tape.constant(regions.clone());
        let wv = tape.constant(words.clone());
        let mask = tape.constant(Matrix::filled(2, 1, 1.0));
        let f = cross_modal_fusion(&mut tape, rv, mask, wv, &p.fusion);
        let fp = &p.fusion;
        let v = tape.value(f.v).clone();
        let text = tape.value(f.text).clone();
        for i in 0..2 {
            let r = add(&matvec(store.get(fp.region_w), regions.row(i)), store.get(fp.region_b).row(0));
            let ra = matvec(store.get(fp.attn_region), &r);
            let logits: Vec<f64> = (0..3)
                .map(|j| {
                    let sa = add(&matvec(store.get(fp.attn_word), words.row(j)), store.get(fp.attn_b).row(0));
                    let h: Vec<f64> = add(&ra, &sa).iter().map(|x| x.tanh()).collect();
                    dot(&h, store.get(fp.attn_v).data())
                })
                .collect();
            let a = softmax(&logits);
            let q: Vec<f64> = (0..DS).map(|c| (0..3).map(|j| a[j] * words.get(j, c)).sum()).collect();
            for c in 0..DS {
                assert!((text.get(i, c) - q[c]).abs() < 1e-9);
            }
            let g: Vec<f64> = add(&matvec(store.get(fp.gate_w), &q), store.get(fp.gate_b).row(0))
                .into_iter()
                .map(sigmoid)
                .collect();
            let tq = matvec(store.get(fp.text_w), &q);
            for c in 0..DM {
                assert!((v.get(i, c) - r[c] * g[c]).abs() < 1e-9);
                assert!((v.get(i, DM + c) - tq[c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fusion_singleton_word_and_zero_gate() {
        let (mut store, p) = params(1, 4);
        *store.get_mut(p.fusion.gate_w) = Matrix::zeros(DS, DM);
        *store.get_mut(p.fusion.gate_b) = Matrix::zeros(1, DM);
        let mut tape = Tape::new(&store);
        let rv = tape.constant(Matrix::filled(3, DR, 0.2));
        let wv = tape.constant(Matrix::filled(1, DS, 0.5));
        let mask = tape.constant(Matrix::column(vec![1.0, 1.0, 0.0]));
        let f = cross_modal_fusion(&mut tape, rv, mask, wv, &p.fusion);
        assert!(tape.value(f.attention).data().iter().all(|&a| (a - 1.0).abs() < 1e-15));
        assert!(tape.value(f.gate).data().iter().all(|&g| g == 0.5));
        assert!(tape.value(f.v).row(2).iter().all(|&x| x == 0.0));
    }

    fn graph_index(fr: &[RegionSet], rel: &AnnotatedRelations, m: usize) -> GraphIndex {
        GraphIndex::new(&build_graph(fr, rel, m, 0.8).unwrap()).unwrap()
    }

    #[test]
    fn implicit_matches_double_loop() {
        let (store, p) = params(1, 5);
        let layer = &p.layers[0];
        let fr = frames(1, 3, 6);
        let gi = graph_index(&fr, &AnnotatedRelations::default(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vm = Matrix::uniform(3, 2 * DM, 1.0, &mut rng);
        let (_, boxes) = region_matrix(&fr);
        let mut tape = Tape::new(&store);
        let v = tape.constant(vm.clone());
        let b = tape.constant(boxes.clone());
        let out = implicit_conv(&mut tape, v, b, &gi.implicit, layer);
        let out = tape.value(out).clone();
        let key = |i: usize| {
            let mut x = vm.row(i).to_vec();
            x.extend_from_slice(boxes.row(i));
            matvec(store.get(layer.imp_u), &x)
        };
        for i in 0..3 {
            let a = softmax(&(0..3).map(|j| dot(&key(i), &key(j))).collect::<Vec<_>>());
            for c in 0..DM {
                let want: f64 = (0..3).map(|j| a[j] * matvec(store.get(layer.imp_w), vm.row(j))[c]).sum();
                assert!((out.get(i, c) - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn implicit_singleton_and_uniform() {
        let (store, p) = params(1, 8);
        let layer = &p.layers[0];
        let fr = frames(1, 1, 9);
        let gi = graph_index(&fr, &AnnotatedRelations::default(), 1);
        let vm = Matrix::from_rows(&[vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]]);
        let mut tape = Tape::new(&store);
        let v = tape.constant(vm.clone());
        let b = tape.constant(Matrix::filled(1, 4, 0.5));
        let out = implicit_conv(&mut tape, v, b, &gi.implicit, layer);
        let want = matvec(store.get(layer.imp_w), vm.row(0));
        for c in 0..DM {
            assert!((tape.value(out).get(0, c) - want[c]).abs() < 1e-12);
        }
        let fr = frames(1, 3, 10);
        let gi = graph_index(&fr, &AnnotatedRelations::default(), 1);
        let same = Matrix::from_rows(&vec![vec![0.1, -0.2, 0.3, 0.4, 0.5, 0.6]; 3]);
        let mut tape = Tape::new(&store);
        let v = tape.constant(same);
        let b = tape.constant(Matrix::filled(3, 4, 0.5));
        let out = implicit_conv(&mut tape, v, b, &gi.implicit, layer);
        // Identical neighbours: uniform weights, so every row equals W v.
        let want = matvec(store.get(layer.imp_w), &[0.1, -0.2, 0.3, 0.4, 0.5, 0.6]);
        for i in 0..3 {
            for c in 0..DM {
                assert!((tape.value(out).get(i, c) - want[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn explicit_matches_hand_expansion() {
        let (mut store, p) = params(1, 11);
        let layer = &p.layers[0];
        // Hand-set weights: direction d multiplies the first DM inputs by (d + 1).
        for d in 0..3 {
            let mut w = Matrix::zeros(2 * DM, DM);
            for c in 0..DM {
                w.set(c, c, (d + 1) as f64);
            }
            *store.get_mut(layer.exp_w[d]) = w;
        }
        let mut bias = Matrix::zeros(NUM_EDGE_LABELS, DM);
        for l in 0..NUM_EDGE_LABELS {
            for c in 0..DM {
                bias.set(l, c, 0.01 * l as f64 + c as f64);
            }
        }
        *store.get_mut(layer.exp_b) = bias.clone();
        let fr = frames(1, 3, 12);
        let rel = AnnotatedRelations::new(BTreeMap::from([(
            1,
            vec![
                Triplet { subject: 0, predicate: 3, object: 1 },
                Triplet { subject: 2, predicate: 9, object: 0 },
            ],
        )]));
        let gi = graph_index(&fr, &rel, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let vm = Matrix::uniform(3, 2 * DM, 1.0, &mut rng);
        let alpha_vals: Vec<f64> = softmax(&(0..NUM_EDGE_LABELS).map(|l| (l as f64).sin()).collect::<Vec<_>>());
        let mut tape = Tape::new(&store);
        let v = tape.constant(vm.clone());
        let alpha = tape.constant(Matrix::column(alpha_vals.clone()));
        let out = explicit_conv(&mut tape, v, &gi.explicit, alpha, layer);
        let out = tape.value(out).clone();
        let term = |src: usize, dir: usize, label: usize, c: usize| {
            alpha_vals[label] * ((dir + 1) as f64 * vm.get(src, c) + bias.get(label, c))
        };
        let (fwd, bwd, slf) = (0, 1, 2);
        for c in 0..DM {
            // Node 0: self, subject of label 3 (to 1), object of label 9 (from 2).
            let n0 = term(0, slf, 50, c) + term(1, fwd, 3, c) + term(2, bwd, 9, c);
            let n1 = term(1, slf, 50, c) + term(0, bwd, 3, c);
            let n2 = term(2, slf, 50, c) + term(0, fwd, 9, c);
            assert!((out.get(0, c) - n0).abs() < 1e-12);
            assert!((out.get(1, c) - n1).abs() < 1e-12);
            assert!((out.get(2, c) - n2).abs() < 1e-12);
        }
    }

    #[test]
    fn relation_coefficients_sum_to_one_and_shift_invariant() {
        let (mut store, p) = params(1, 14);
        let q = Matrix::filled(1, 2 * DS, 0.3);
        let a1 = {
            let mut tape = Tape::new(&store);
            let qv = tape.constant(q.clone());
            let a = relation_coefficients(&mut tape, qv, &p);
            tape.value(a).clone()
        };
        assert_eq!(a1.shape(), (NUM_EDGE_LABELS, 1));
        assert!((a1.sum() - 1.0).abs() < 1e-12);
        for x in store.get_mut(p.relation_b).data_mut() {
            *x += 3.5;
        }
        let mut tape = Tape::new(&store);
        let qv = tape.constant(q);
        let a2 = relation_coefficients(&mut tape, qv, &p);
        assert!(tape.value(a2).max_abs_diff(&a1) < 1e-12);
    }

    #[test]
    fn temporal_matches_scalar_loop() {
        let (store, p) = params(1, 15);
        let layer = &p.layers[0];
        let fr = frames(3, 2, 16);
        let gi = graph_index(&fr, &AnnotatedRelations::default(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let vm = Matrix::uniform(6, 2 * DM, 1.0, &mut rng);
        let mut tape = Tape::new(&store);
        let v = tape.constant(vm.clone());
        let out = temporal_conv(&mut tape, v, &gi.temporal, layer);
        let out = tape.value(out).clone();
        for node in 0..6 {
            let nb: Vec<usize> = (0..gi.temporal.len()).filter(|&k| gi.temporal.receivers[k] == node).collect();
            let q = matvec(store.get(layer.tem_u), vm.row(node));
            let logits: Vec<f64> = nb
                .iter()
                .map(|&k| {
                    let d = gi.temporal.directions[k].index();
                    dot(&q, &matvec(store.get(layer.tem_v[d]), vm.row(gi.temporal.sources[k])))
                })
                .collect();
            let a = softmax(&logits);
            for c in 0..DM {
                let want: f64 = nb
                    .iter()
                    .zip(&a)
                    .map(|(&k, w)| {
                        let d = gi.temporal.directions[k].index();
                        w * matvec(store.get(layer.tem_w[d]), vm.row(gi.temporal.sources[k]))[c]
                    })
                    .sum();
                assert!((out.get(node, c) - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn temporal_single_frame_is_self_only() {
        let (store, p) = params(1, 18);
        let layer = &p.layers[0];
        let fr = frames(1, 2, 19);
        let gi = graph_index(&fr, &AnnotatedRelations::default(), 5);
        assert_eq!(gi.temporal.len(), 2);
        let vm = Matrix::from_rows(&[vec![0.5; 6], vec![-0.5; 6]]);
        let mut tape = Tape::new(&store);
        let v = tape.constant(vm.clone());
        let out = temporal_conv(&mut tape, v, &gi.temporal, layer);
        let want = matvec(store.get(layer.tem_w[2]), vm.row(1));
        for c in 0..DM {
            assert!((tape.value(out).get(1, c) - want[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn temporal_symmetric_neighbours_get_equal_weight() {
        let (mut store, p) = params(1, 20);
        let layer = &p.layers[0];
        let v0 = store.get(layer.tem_v[0]).clone();
        *store.get_mut(layer.tem_v[1]) = v0;
        // Middle node sees identical features forward and backward.
        let vm = Matrix::from_rows(&[vec![0.4; 6], vec![0.1; 6], vec![0.4; 6]]);
        let mut tape = Tape::new(&store);
        let v = tape.constant(vm);
        let u = tape.param(layer.tem_u);
        let q = tape.matmul(v, u);
        let q1 = tape.value(q).row(1).to_vec();
        let k = matvec(store.get(layer.tem_v[0]), &[0.4; 6]);
        assert_eq!(dot(&q1, &k), dot(&q1, &matvec(store.get(layer.tem_v[1]), &[0.4; 6])));
    }

    #[test]
    fn layer_output_nonnegative_and_all_disabled_is_relu_of_residual() {
        let (store, p) = params(2, 22);
        let fr = frames(2, 2, 23);
        let gi = graph_index(&fr, &AnnotatedRelations::default(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let vm = Matrix::uniform(4, 2 * DM, 1.0, &mut rng);
        let (_, boxes) = region_matrix(&fr);
        let mut tape = Tape::new(&store);
        let v = tape.constant(vm.clone());
        let b = tape.constant(boxes);
        let mask = tape.constant(gi.mask());
        let alpha = tape.constant(Matrix::filled(NUM_EDGE_LABELS, 1, 1.0 / 51.0));
        let (m, layers) = reason(&mut tape, v, b, mask, &gi, alpha, &p, Subgraphs::ALL);
        assert!(tape.value(m).data().iter().all(|&x| x >= 0.0));
        assert_eq!(layers.len(), 2);
        let (m0, _) = reason(&mut tape, v, b, mask, &gi, alpha, &p, Subgraphs::NONE);
        let r = store.get(p.layers[0].residual.unwrap());
        let h1 = vm.matmul(r).map(|x| x.max(0.0));
        let h2 = h1.map(|x| x.max(0.0));
        assert!(tape.value(m0).max_abs_diff(&h2) < 1e-12);
    }

    #[test]
    fn bad_label_rejected() {
        let fr = frames(1, 2, 25);
        let mut g = build_graph(&fr, &AnnotatedRelations::default(), 1, 0.8).unwrap();
        g.explicit.push(crate::graph::ExplicitEdge { from: 0, to: 1, label: 51 });
        assert!(matches!(GraphIndex::new(&g), Err(Error::Validation { .. })));
    }
}

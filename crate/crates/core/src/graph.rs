//! Region graph over a video: implicit and explicit spatial subgraphs inside
//! each frame and a temporal subgraph linking regions across nearby frames.
//!
//! Vertices are `(frame, region)` pairs flattened frame-major: frame `t`
//! (1-based) region `i` is node `(t - 1) * K + i`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::datakit::AnnotationRecord;
use crate::error::{Error, Result};
use crate::featstore::RegionSet;
use crate::geometry::BBox;
use crate::vocab::{spatial, NUM_EDGE_LABELS, NUM_PREDICATES, SELF_LABEL};

pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_LINK_EPSILON: f64 = 0.8;

/// Direction of an edge as seen from the receiving vertex.
///
/// Explicit edges: `Forward` when the receiver is the relation's subject
/// (i-to-j), `Backward` when it is the object (j-to-i). Temporal edges:
/// `Forward` when the neighbour lies in a later frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
    SelfLoop,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Forward, Direction::Backward, Direction::SelfLoop];

    pub fn index(self) -> usize {
        match self {
            Direction::Forward => 0,
            Direction::Backward => 1,
            Direction::SelfLoop => 2,
        }
    }
}

/// Relation between two regions of one frame (local region indices).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: usize,
    pub predicate: usize,
    pub object: usize,
}

/// Labeled edge `from -> to`; self-loops carry [`SELF_LABEL`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplicitEdge {
    pub from: usize,
    pub to: usize,
    pub label: usize,
}

/// Temporal edge from `from` (the receiver) to its best match `to` in another
/// frame, or to itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalEdge {
    pub from: usize,
    pub to: usize,
    pub direction: Direction,
}

/// One incoming message for a convolution: `receiver` aggregates `source`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Message {
    pub receiver: usize,
    pub source: usize,
    pub direction: Direction,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatioTemporalGraph {
    pub num_frames: usize,
    pub regions_per_frame: usize,
    pub valid: Vec<bool>,
    /// Ordered node pairs `(receiver, source)`, `K²` per frame.
    pub implicit: Vec<(usize, usize)>,
    pub explicit: Vec<ExplicitEdge>,
    pub temporal: Vec<TemporalEdge>,
}

impl SpatioTemporalGraph {
    pub fn num_nodes(&self) -> usize {
        self.num_frames * self.regions_per_frame
    }

    pub fn node(&self, t: usize, i: usize) -> usize {
        (t - 1) * self.regions_per_frame + i
    }

    /// `(frame, region)` of a node, frame 1-based.
    pub fn locate(&self, node: usize) -> (usize, usize) {
        (node / self.regions_per_frame + 1, node % self.regions_per_frame)
    }

    fn keep(&self, m: &Message) -> bool {
        m.receiver == m.source || self.valid[m.source]
    }

    /// Implicit messages, dropping sources that are padding regions.
    pub fn implicit_messages(&self) -> Vec<Message> {
        self.implicit
            .iter()
            .map(|&(receiver, source)| Message {
                receiver,
                source,
                direction: if receiver == source {
                    Direction::SelfLoop
                } else {
                    Direction::Forward
                },
                label: 0,
            })
            .filter(|m| self.keep(m))
            .collect()
    }

    /// Explicit messages: each relation edge informs both endpoints.
    pub fn explicit_messages(&self) -> Vec<Message> {
        let mut out = Vec::with_capacity(2 * self.explicit.len());
        for e in &self.explicit {
            if e.from == e.to {
                out.push(Message {
                    receiver: e.from,
                    source: e.from,
                    direction: Direction::SelfLoop,
                    label: e.label,
                });
            } else {
                out.push(Message {
                    receiver: e.from,
                    source: e.to,
                    direction: Direction::Forward,
                    label: e.label,
                });
                out.push(Message {
                    receiver: e.to,
                    source: e.from,
                    direction: Direction::Backward,
                    label: e.label,
                });
            }
        }
        out.retain(|m| self.keep(m));
        out
    }

    pub fn temporal_messages(&self) -> Vec<Message> {
        self.temporal
            .iter()
            .map(|e| Message {
                receiver: e.from,
                source: e.to,
                direction: e.direction,
                label: 0,
            })
            .filter(|m| self.keep(m))
            .collect()
    }

    pub fn temporal_degree(&self, node: usize) -> usize {
        self.temporal.iter().filter(|e| e.from == node).count()
    }

    /// Plain-text edge list for debugging.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# frames={} regions_per_frame={}",
            self.num_frames, self.regions_per_frame
        );
        for &(a, b) in &self.implicit {
            let _ = writeln!(s, "imp {a} {b}");
        }
        for e in &self.explicit {
            let _ = writeln!(s, "exp {} {} {}", e.from, e.to, e.label);
        }
        for e in &self.temporal {
            let _ = writeln!(s, "tem {} {} {:?}", e.from, e.to, e.direction);
        }
        s
    }
}

/// All ordered pairs of `K` local regions, self-loops included.
pub fn build_implicit(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).collect()
}

/// Source of relation triplets for one frame.
pub trait RelationProvider: Sync {
    fn relations(&self, regions: &RegionSet) -> Result<Vec<Triplet>>;
}

/// How explicit edges are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationMode {
    /// Triplets stored in the annotation record.
    Annotated,
    /// Spatial predicates derived from box geometry.
    GeometricStub,
    /// A user-supplied [`RelationClassifier`].
    ExternalClassifier,
}

/// Triplets from annotations, keyed by 1-based frame.
#[derive(Clone, Debug, Default)]
pub struct AnnotatedRelations {
    by_frame: BTreeMap<usize, Vec<Triplet>>,
}

impl AnnotatedRelations {
    pub fn new(by_frame: BTreeMap<usize, Vec<Triplet>>) -> Self {
        Self { by_frame }
    }

    /// Uses the record's `relation_triplets`.
    pub fn from_record(record: &AnnotationRecord) -> Self {
        let mut by_frame: BTreeMap<usize, Vec<Triplet>> = BTreeMap::new();
        for tr in &record.relation_triplets {
            by_frame.entry(tr.frame).or_default().push(Triplet {
                subject: tr.subject,
                predicate: tr.predicate,
                object: tr.object,
            });
        }
        Self { by_frame }
    }
}

impl RelationProvider for AnnotatedRelations {
    fn relations(&self, regions: &RegionSet) -> Result<Vec<Triplet>> {
        Ok(self
            .by_frame
            .get(&regions.frame_index)
            .cloned()
            .unwrap_or_default())
    }
}

/// Gap below which two disjoint boxes count as `near`.
pub const NEAR_GAP: f64 = 0.02;

/// Spatial predicate for the ordered box pair `(a, b)`.
pub fn geometric_predicate(a: &BBox, b: &BBox) -> usize {
    let a_in_b = a.is_inside(b);
    let b_in_a = b.is_inside(a);
    match (a_in_b, b_in_a) {
        (true, false) => return spatial::INSIDE,
        (false, true) => return spatial::CONTAINS,
        (true, true) => return spatial::OVERLAPS,
        _ => {}
    }
    if a.intersection_area(b) > 0.0 {
        return spatial::OVERLAPS;
    }
    let (ax1, ay1, ax2, ay2) = a.corners();
    let (bx1, by1, bx2, by2) = b.corners();
    let gx = (bx1 - ax2).max(ax1 - bx2);
    let gy = (by1 - ay2).max(ay1 - by2);
    if gx.max(gy) < NEAR_GAP {
        spatial::NEAR
    } else if gx >= gy {
        if ax2 <= bx1 {
            spatial::LEFT_OF
        } else {
            spatial::RIGHT_OF
        }
    } else if ay2 <= by1 {
        spatial::ABOVE
    } else {
        spatial::BELOW
    }
}

/// One edge `i -> j` per unordered pair of valid regions (`i < j`), labeled
/// with [`geometric_predicate`].
#[derive(Clone, Copy, Debug, Default)]
pub struct GeometricStub;

impl RelationProvider for GeometricStub {
    fn relations(&self, regions: &RegionSet) -> Result<Vec<Triplet>> {
        let k = regions.len();
        let mut out = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                if regions.valid[i] && regions.valid[j] {
                    out.push(Triplet {
                        subject: i,
                        predicate: geometric_predicate(&regions.boxes[i], &regions.boxes[j]),
                        object: j,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Pairwise relation classifier; `None` means `no_relation`.
pub trait RelationClassifier: Sync {
    fn classify(&self, regions: &RegionSet, subject: usize, object: usize) -> Option<usize>;
}

/// Runs a [`RelationClassifier`] over all ordered pairs of valid regions.
pub struct ClassifierRelations<C>(pub C);

impl<C: RelationClassifier> RelationProvider for ClassifierRelations<C> {
    fn relations(&self, regions: &RegionSet) -> Result<Vec<Triplet>> {
        let k = regions.len();
        let mut out = Vec::new();
        for i in 0..k {
            for j in 0..k {
                if i != j && regions.valid[i] && regions.valid[j] {
                    if let Some(p) = self.0.classify(regions, i, j) {
                        out.push(Triplet {
                            subject: i,
                            predicate: p,
                            object: j,
                        });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Explicit edges of one frame in local indices: one per triplet plus a
/// self-loop on every region.
pub fn build_explicit(
    regions: &RegionSet,
    provider: &dyn RelationProvider,
) -> Result<Vec<ExplicitEdge>> {
    let k = regions.len();
    let mut edges: Vec<ExplicitEdge> = (0..k)
        .map(|i| ExplicitEdge {
            from: i,
            to: i,
            label: SELF_LABEL,
        })
        .collect();
    for tr in provider.relations(regions)? {
        if tr.predicate >= NUM_PREDICATES {
            return Err(Error::invalid(
                regions.frame_index,
                "predicate",
                format!("unknown predicate id {} (frame {})", tr.predicate, regions.frame_index),
            ));
        }
        if tr.subject >= k || tr.object >= k {
            return Err(Error::invalid(
                regions.frame_index,
                "region_ref",
                format!(
                    "triplet ({}, {}) outside {k} regions (frame {})",
                    tr.subject, tr.object, regions.frame_index
                ),
            ));
        }
        if tr.subject == tr.object {
            continue;
        }
        edges.push(ExplicitEdge {
            from: tr.subject,
            to: tr.object,
            label: tr.predicate,
        });
    }
    debug_assert!(edges.iter().all(|e| e.label < NUM_EDGE_LABELS));
    Ok(edges)
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = crate::tensor::dot(a, a).sqrt();
    let nb = crate::tensor::dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        crate::tensor::dot(a, b) / (na * nb)
    }
}

/// Linking score `cos(r_a, r_b) + (epsilon / dt) * IoU(box_a, box_b)`.
pub fn temporal_link_score(
    feat_a: &[f64],
    box_a: &BBox,
    feat_b: &[f64],
    box_b: &BBox,
    dt: usize,
    epsilon: f64,
) -> f64 {
    assert!(dt >= 1, "temporal distance must be at least 1");
    cosine(feat_a, feat_b) + epsilon / dt as f64 * box_a.iou(box_b)
}

/// Temporal edges (global node indices): a self-loop per region plus, for
/// every frame `k` with `1 <= |k - t| <= window`, one edge to the best-scoring
/// valid region of frame `k` (lowest index on ties).
pub fn build_temporal(frames: &[RegionSet], window: usize, epsilon: f64) -> Vec<TemporalEdge> {
    let n = frames.len();
    let k = frames.first().map_or(0, RegionSet::len);
    let mut edges = Vec::new();
    for t in 1..=n {
        let here = &frames[t - 1];
        for i in 0..k {
            let from = (t - 1) * k + i;
            edges.push(TemporalEdge {
                from,
                to: from,
                direction: Direction::SelfLoop,
            });
            let lo = t.saturating_sub(window).max(1);
            let hi = (t + window).min(n);
            for kf in lo..=hi {
                if kf == t {
                    continue;
                }
                let there = &frames[kf - 1];
                let dt = t.abs_diff(kf);
                let mut best: Option<(usize, f64)> = None;
                for j in 0..there.len() {
                    if !there.valid[j] {
                        continue;
                    }
                    let s = temporal_link_score(
                        &here.features[i],
                        &here.boxes[i],
                        &there.features[j],
                        &there.boxes[j],
                        dt,
                        epsilon,
                    );
                    if best.is_none_or(|(_, b)| s > b) {
                        best = Some((j, s));
                    }
                }
                if let Some((j, _)) = best {
                    edges.push(TemporalEdge {
                        from,
                        to: (kf - 1) * k + j,
                        direction: if kf > t {
                            Direction::Forward
                        } else {
                            Direction::Backward
                        },
                    });
                }
            }
        }
    }
    edges
}

/// Full graph over `frames` (all with the same `K`).
pub fn build_graph(
    frames: &[RegionSet],
    relations: &dyn RelationProvider,
    window: usize,
    epsilon: f64,
) -> Result<SpatioTemporalGraph> {
    let n = frames.len();
    let k = frames.first().map_or(0, RegionSet::len);
    if frames.iter().any(|f| f.len() != k) {
        return Err(Error::Input("frames disagree on region count".into()));
    }
    let local = build_implicit(k);
    let mut implicit = Vec::with_capacity(n * k * k);
    let mut explicit = Vec::new();
    let mut valid = Vec::with_capacity(n * k);
    for (ti, f) in frames.iter().enumerate() {
        let base = ti * k;
        implicit.extend(local.iter().map(|&(a, b)| (base + a, base + b)));
        explicit.extend(build_explicit(f, relations)?.into_iter().map(|e| ExplicitEdge {
            from: base + e.from,
            to: base + e.to,
            label: e.label,
        }));
        valid.extend_from_slice(&f.valid);
    }
    Ok(SpatioTemporalGraph {
        num_frames: n,
        regions_per_frame: k,
        valid,
        implicit,
        explicit,
        temporal: build_temporal(frames, window, epsilon),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn region_set(t: usize, feats: Vec<Vec<f64>>, boxes: Vec<BBox>) -> RegionSet {
        let k = feats.len();
        RegionSet {
            frame_index: t,
            features: feats,
            boxes,
            valid: vec![true; k],
            frame_feature: vec![],
        }
    }

    fn simple_frames(n: usize, k: usize) -> Vec<RegionSet> {
        (1..=n)
            .map(|t| {
                region_set(
                    t,
                    (0..k).map(|i| vec![1.0 + i as f64, (t * i) as f64 * 0.1, 0.5]).collect(),
                    (0..k)
                        .map(|i| BBox::new(0.1 + 0.2 * i as f64, 0.5, 0.1, 0.1))
                        .collect(),
                )
            })
            .collect()
    }

    #[test]
    fn implicit_edge_counts() {
        assert_eq!(build_implicit(1), vec![(0, 0)]);
        assert_eq!(build_implicit(3).len(), 9);
        assert_eq!(build_implicit(20).len(), 400);
    }

    #[test]
    fn explicit_without_triplets_is_self_loops_only() {
        let f = &simple_frames(1, 4)[0];
        let e = build_explicit(f, &AnnotatedRelations::default()).unwrap();
        assert_eq!(e.len(), 4);
        assert!(e.iter().all(|e| e.from == e.to && e.label == SELF_LABEL));
    }

    #[test]
    fn annotated_triplets_become_edges() {
        let f = &simple_frames(1, 4)[0];
        let rel = AnnotatedRelations::new(BTreeMap::from([(
            1,
            vec![
                Triplet { subject: 0, predicate: 9, object: 2 },
                Triplet { subject: 3, predicate: 12, object: 1 },
            ],
        )]));
        let e = build_explicit(f, &rel).unwrap();
        let non_self: Vec<_> = e.iter().filter(|e| e.from != e.to).collect();
        assert_eq!(non_self.len(), 2);
        assert_eq!((non_self[0].from, non_self[0].to, non_self[0].label), (0, 2, 9));
    }

    #[test]
    fn unknown_predicate_rejected() {
        let f = &simple_frames(1, 2)[0];
        let rel = AnnotatedRelations::new(BTreeMap::from([(
            1,
            vec![Triplet { subject: 0, predicate: 50, object: 1 }],
        )]));
        assert!(matches!(build_explicit(f, &rel), Err(Error::Validation { .. })));
    }

    #[test]
    fn stub_left_of() {
        let a = BBox::from_corners(0.05, 0.4, 0.2, 0.6);
        let b = BBox::from_corners(0.5, 0.4, 0.7, 0.6);
        assert_eq!(geometric_predicate(&a, &b), spatial::LEFT_OF);
        assert_eq!(geometric_predicate(&b, &a), spatial::RIGHT_OF);
        let f = region_set(1, vec![vec![1.0], vec![1.0]], vec![a, b]);
        let e = build_explicit(&f, &GeometricStub).unwrap();
        assert!(e.iter().any(|e| e.from == 0 && e.to == 1 && e.label == spatial::LEFT_OF));
    }

    #[test]
    fn stub_containment_and_vertical() {
        let big = BBox::from_corners(0.1, 0.1, 0.9, 0.9);
        let small = BBox::from_corners(0.3, 0.3, 0.4, 0.4);
        assert_eq!(geometric_predicate(&small, &big), spatial::INSIDE);
        assert_eq!(geometric_predicate(&big, &small), spatial::CONTAINS);
        let top = BBox::from_corners(0.4, 0.0, 0.6, 0.2);
        let bottom = BBox::from_corners(0.4, 0.6, 0.6, 0.8);
        assert_eq!(geometric_predicate(&top, &bottom), spatial::ABOVE);
        assert_eq!(geometric_predicate(&bottom, &top), spatial::BELOW);
        let touching = BBox::from_corners(0.61, 0.6, 0.7, 0.8);
        assert_eq!(geometric_predicate(&bottom, &touching), spatial::NEAR);
    }

    #[test]
    fn link_score_cases() {
        let b = BBox::new(0.5, 0.5, 0.2, 0.2);
        assert!((temporal_link_score(&[1.0, 2.0], &b, &[1.0, 2.0], &b, 1, 0.8) - 1.8).abs() < 1e-12);
        let far = BBox::new(0.1, 0.1, 0.1, 0.1);
        assert_eq!(temporal_link_score(&[1.0, 0.0], &b, &[0.0, 1.0], &far, 1, 0.8), 0.0);
        assert_eq!(temporal_link_score(&[0.0, 0.0], &b, &[1.0, 1.0], &far, 3, 0.8), 0.0);
    }

    #[test]
    fn link_score_half_cos_half_iou() {
        // cos = 0.5 between (1, 0) and (1/2, √3/2); boxes with IoU 1/2.
        let a = [1.0, 0.0];
        let b = [0.5, 3f64.sqrt() / 2.0];
        let ba = BBox::from_corners(0.0, 0.0, 0.4, 0.3);
        let bb = BBox::from_corners(0.0, 0.0, 0.2, 0.3);
        assert!((ba.iou(&bb) - 0.5).abs() < 1e-12);
        let s = temporal_link_score(&a, &ba, &b, &bb, 2, 0.8);
        assert!((s - 0.7).abs() < 1e-12, "{s}");
    }

    #[test]
    fn temporal_edge_counts_three_frames() {
        let frames = simple_frames(3, 2);
        let edges = build_temporal(&frames, 1, 0.8);
        let count = |node: usize| edges.iter().filter(|e| e.from == node).count();
        // t = 2 interior: 2M+1 = 3 edges; t = 1 boundary: forward + self.
        assert_eq!(count(2), 3);
        assert_eq!(count(3), 3);
        assert_eq!(count(0), 2);
        assert_eq!(count(5), 2);
        for e in &edges {
            let (tf, tt) = (e.from / 2, e.to / 2);
            let expected = match tt.cmp(&tf) {
                std::cmp::Ordering::Greater => Direction::Forward,
                std::cmp::Ordering::Less => Direction::Backward,
                std::cmp::Ordering::Equal => Direction::SelfLoop,
            };
            assert_eq!(e.direction, expected);
        }
    }

    #[test]
    fn ties_pick_lowest_index() {
        let b = BBox::new(0.5, 0.5, 0.2, 0.2);
        let frames = [
            region_set(1, vec![vec![1.0, 0.0]], vec![b]),
            region_set(2, vec![vec![2.0, 0.0], vec![3.0, 0.0]], vec![b, b]),
        ];
        // Pad frame 1 to two regions so K matches.
        let mut f1 = frames[0].clone();
        f1.features.push(vec![0.0, 0.0]);
        f1.boxes.push(BBox::EMPTY);
        f1.valid.push(false);
        let edges = build_temporal(&[f1, frames[1].clone()], 1, 0.8);
        let fwd: Vec<_> = edges
            .iter()
            .filter(|e| e.from == 0 && e.direction == Direction::Forward)
            .collect();
        assert_eq!(fwd.len(), 1);
        assert_eq!(fwd[0].to, 2);
        // Padding regions are never link targets.
        assert!(edges.iter().all(|e| e.to != 1 || e.from == 1));
    }

    #[test]
    fn graph_is_deterministic_and_masks_padding() {
        let mut frames = simple_frames(4, 3);
        frames[1].valid[2] = false;
        frames[1].features[2] = vec![0.0; 3];
        frames[1].boxes[2] = BBox::EMPTY;
        let g1 = build_graph(&frames, &GeometricStub, 2, 0.8).unwrap();
        let g2 = build_graph(&frames, &GeometricStub, 2, 0.8).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(g1.implicit.len(), 4 * 9);
        let pad = g1.node(2, 2);
        assert!(g1.implicit_messages().iter().all(|m| m.source != pad || m.receiver == pad));
        assert!(g1.explicit_messages().iter().all(|m| m.source != pad || m.receiver == pad));
        assert!(g1.to_edge_list().starts_with("# frames=4"));
    }

    proptest! {
        #[test]
        fn link_score_non_increasing_in_dt(
            fa in proptest::collection::vec(-1.0..1.0f64, 3),
            fb in proptest::collection::vec(-1.0..1.0f64, 3),
            x in 0.2..0.8f64, dx in -0.2..0.2f64, dt in 1usize..8,
        ) {
            let a = BBox::new(x, 0.5, 0.2, 0.2);
            let b = BBox::new(x + dx, 0.5, 0.2, 0.2);
            let s1 = temporal_link_score(&fa, &a, &fb, &b, dt, 0.8);
            let s2 = temporal_link_score(&fa, &a, &fb, &b, dt + 1, 0.8);
            prop_assert!(s2 <= s1 + 1e-15);
        }

        #[test]
        fn stub_swap_symmetry(
            ax in 0.1..0.9f64, ay in 0.1..0.9f64, bx in 0.1..0.9f64, by in 0.1..0.9f64,
            aw in 0.02..0.2f64, bw in 0.02..0.2f64,
        ) {
            let a = BBox::new(ax, ay, aw, aw);
            let b = BBox::new(bx, by, bw, bw);
            let ab = geometric_predicate(&a, &b);
            let ba = geometric_predicate(&b, &a);
            let mirror = |p: usize| match p {
                spatial::LEFT_OF => spatial::RIGHT_OF,
                spatial::RIGHT_OF => spatial::LEFT_OF,
                spatial::ABOVE => spatial::BELOW,
                spatial::BELOW => spatial::ABOVE,
                spatial::INSIDE => spatial::CONTAINS,
                spatial::CONTAINS => spatial::INSIDE,
                other => other,
            };
            prop_assert_eq!(ba, mirror(ab));
        }
    }
}

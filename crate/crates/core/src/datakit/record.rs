use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::vocab::{is_interrogative, NUM_PREDICATES};

/// Current annotation file schema version.
pub const SCHEMA_VERSION: u32 = 1;

/// Videos longer than this are uniformly downsampled at load time.
pub const MAX_FRAMES: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryType {
    Declarative,
    Interrogative,
}

/// One relation in one frame; region refs index that frame's proposals
/// (0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameTriplet {
    pub frame: usize,
    pub subject: usize,
    pub predicate: usize,
    pub object: usize,
}

/// One video / triplet / sentence sample. Frames are 1-based throughout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub video_id: String,
    pub num_frames: usize,
    pub sentence: Vec<String>,
    pub query_type: QueryType,
    /// Inclusive `(start, end)` frames of the queried object's tube.
    pub gt_clip: (usize, usize),
    /// Ground-truth box per frame of `gt_clip`.
    pub gt_boxes: BTreeMap<usize, BBox>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relation_triplets: Vec<FrameTriplet>,
    /// Source frame for each sampled frame when the record was downsampled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_frames: Option<Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationFile {
    schema_version: u32,
    records: Vec<AnnotationRecord>,
}

impl AnnotationRecord {
    /// Check every record invariant; `index` is reported in the error.
    pub fn validate(&self, index: usize) -> Result<()> {
        let n = self.num_frames;
        if n == 0 {
            return Err(Error::invalid(index, "num_frames", "must be at least 1"));
        }
        if self.sentence.is_empty() {
            return Err(Error::invalid(index, "sentence", "empty sentence"));
        }
        let (s, e) = self.gt_clip;
        if s < 1 || s > e || e > n {
            return Err(Error::invalid(
                index,
                "gt_clip",
                format!("gt_clip out of range: ({s}, {e}) with {n} frames"),
            ));
        }
        let expected: Vec<usize> = (s..=e).collect();
        let actual: Vec<usize> = self.gt_boxes.keys().copied().collect();
        if expected != actual {
            return Err(Error::invalid(
                index,
                "gt_boxes",
                format!("boxes must cover exactly frames {s}..={e}"),
            ));
        }
        for (t, b) in &self.gt_boxes {
            if !b.in_unit_range() || b.w <= 0.0 || b.h <= 0.0 {
                return Err(Error::invalid(
                    index,
                    "gt_boxes",
                    format!("frame {t}: box {:?} not normalized with positive size", b.to_array()),
                ));
            }
        }
        if self.query_type == QueryType::Interrogative
            && !self.sentence.iter().any(|w| is_interrogative(w))
        {
            return Err(Error::invalid(
                index,
                "query_type",
                "interrogative sentence without who/what",
            ));
        }
        for tr in &self.relation_triplets {
            if tr.frame < 1 || tr.frame > n {
                return Err(Error::invalid(
                    index,
                    "relation_triplets",
                    format!("frame {} out of range", tr.frame),
                ));
            }
            if tr.predicate >= NUM_PREDICATES {
                return Err(Error::invalid(
                    index,
                    "relation_triplets",
                    format!("unknown predicate id {}", tr.predicate),
                ));
            }
        }
        if let Some(src) = &self.source_frames {
            if src.len() != n {
                return Err(Error::invalid(
                    index,
                    "source_frames",
                    "length must equal num_frames",
                ));
            }
        }
        Ok(())
    }

    pub fn tube_len(&self) -> usize {
        self.gt_clip.1 + 1 - self.gt_clip.0
    }

    /// Frame of the feature source backing sampled frame `t`.
    pub fn feature_frame(&self, t: usize) -> usize {
        match &self.source_frames {
            Some(src) => src[t - 1],
            None => t,
        }
    }

    pub fn triplets_in_frame(&self, t: usize) -> impl Iterator<Item = &FrameTriplet> {
        self.relation_triplets.iter().filter(move |tr| tr.frame == t)
    }

    /// Uniformly resample to at most `max_frames` frames.
    pub fn downsampled(&self, max_frames: usize) -> AnnotationRecord {
        let n = self.num_frames;
        if n <= max_frames || max_frames < 2 {
            return self.clone();
        }
        let orig: Vec<usize> = (0..max_frames)
            .map(|j| 1 + ((j as f64) * (n - 1) as f64 / (max_frames - 1) as f64).round() as usize)
            .collect();
        let (s, e) = self.gt_clip;
        let inside: Vec<usize> = (0..max_frames)
            .filter(|&j| orig[j] >= s && orig[j] <= e)
            .collect();
        let (ns, ne) = match (inside.first(), inside.last()) {
            (Some(&a), Some(&b)) => (a + 1, b + 1),
            _ => {
                let mid = 0.5 * (s + e) as f64;
                let j = (0..max_frames)
                    .min_by(|&a, &b| {
                        (orig[a] as f64 - mid)
                            .abs()
                            .total_cmp(&(orig[b] as f64 - mid).abs())
                    })
                    .unwrap_or(0);
                (j + 1, j + 1)
            }
        };
        let gt_boxes = (ns..=ne)
            .map(|j| {
                let src = orig[j - 1].clamp(s, e);
                (j, self.gt_boxes[&src])
            })
            .collect();
        let relation_triplets = self
            .relation_triplets
            .iter()
            .flat_map(|tr| {
                orig.iter()
                    .enumerate()
                    .filter(move |(_, &o)| o == tr.frame)
                    .map(move |(j, _)| FrameTriplet { frame: j + 1, ..*tr })
            })
            .collect();
        let source_frames = orig
            .iter()
            .map(|&o| self.feature_frame(o))
            .collect();
        AnnotationRecord {
            video_id: self.video_id.clone(),
            num_frames: max_frames,
            sentence: self.sentence.clone(),
            query_type: self.query_type,
            gt_clip: (ns, ne),
            gt_boxes,
            relation_triplets,
            source_frames: Some(source_frames),
        }
    }
}

/// Parse an annotation document; records are validated and overlong videos
/// downsampled to [`MAX_FRAMES`]. Record order is preserved.
pub fn parse_annotations(text: &str, context: &str) -> Result<Vec<AnnotationRecord>> {
    let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        context: context.to_string(),
        message: format!("line {} column {}: {e}", e.line(), e.column()),
    })?;
    let version = doc
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Parse {
            context: context.to_string(),
            message: "missing schema_version".into(),
        })?;
    if version != SCHEMA_VERSION as u64 {
        return Err(Error::Parse {
            context: context.to_string(),
            message: format!("unsupported schema_version {version}"),
        });
    }
    let raw = doc
        .get("records")
        .and_then(serde_json::Value::as_array)
        .ok_or_else(|| Error::Parse {
            context: context.to_string(),
            message: "missing records array".into(),
        })?;
    raw.iter()
        .enumerate()
        .map(|(i, v)| {
            let rec: AnnotationRecord =
                serde_json::from_value(v.clone()).map_err(|e| Error::Parse {
                    context: context.to_string(),
                    message: format!("record {i}: {e}"),
                })?;
            rec.validate(i)?;
            Ok(rec.downsampled(MAX_FRAMES))
        })
        .collect()
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text, &path.display().to_string())
}

pub fn annotations_to_string(records: &[AnnotationRecord]) -> String {
    let doc = AnnotationFile {
        schema_version: SCHEMA_VERSION,
        records: records.to_vec(),
    };
    serde_json::to_string_pretty(&doc).expect("annotations serialize")
}

pub fn save_annotations(path: impl AsRef<Path>, records: &[AnnotationRecord]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, annotations_to_string(records)).map_err(|e| Error::io(path, e))
}

//! Per-frame region features behind a uniform provider interface.
//!
//! A provider hands out raw [`FrameFeatures`]; [`get_frame_bundle`] turns them
//! into a fixed-size [`RegionSet`] of exactly `K` regions, padding with
//! invalid zero-area regions when the provider yields fewer.

mod embed;
mod store;

pub use embed::{WordEmbeddings, DEFAULT_WORD_DIM};
pub use store::{
    resolve_manifest_path, write_store, FeatureManifest, FeatureStore, FrameEntry, VideoEntry,
    FEATURE_ROOT_ENV, MANIFEST_VERSION,
};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Default number of region proposals per frame.
pub const DEFAULT_REGIONS_PER_FRAME: usize = 20;

/// Raw provider output for one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    pub regions: Vec<Vec<f64>>,
    pub boxes: Vec<BBox>,
    pub frame: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoFeatures {
    pub video_id: String,
    pub frames: Vec<FrameFeatures>,
}

/// In-memory features for a set of videos; the synthetic generator emits one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub region_dim: usize,
    pub frame_dim: usize,
    pub videos: Vec<VideoFeatures>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl FeatureBundle {
    pub fn new(region_dim: usize, frame_dim: usize, videos: Vec<VideoFeatures>) -> Self {
        let index = videos
            .iter()
            .enumerate()
            .map(|(i, v)| (v.video_id.clone(), i))
            .collect();
        Self {
            region_dim,
            frame_dim,
            videos,
            index,
        }
    }

    pub fn video(&self, video_id: &str) -> Option<&VideoFeatures> {
        self.index.get(video_id).map(|&i| &self.videos[i])
    }
}

/// Source of per-frame region features.
pub trait FeatureProvider: Sync {
    fn region_dim(&self) -> usize;
    fn frame_dim(&self) -> usize;
    fn num_frames(&self, video_id: &str) -> Result<usize>;
    /// Frame `t` is 1-based.
    fn frame(&self, video_id: &str, t: usize) -> Result<FrameFeatures>;
}

impl FeatureProvider for FeatureBundle {
    fn region_dim(&self) -> usize {
        self.region_dim
    }

    fn frame_dim(&self) -> usize {
        self.frame_dim
    }

    fn num_frames(&self, video_id: &str) -> Result<usize> {
        self.video(video_id)
            .map(|v| v.frames.len())
            .ok_or_else(|| Error::Lookup(format!("unknown video {video_id}")))
    }

    fn frame(&self, video_id: &str, t: usize) -> Result<FrameFeatures> {
        let video = self
            .video(video_id)
            .ok_or_else(|| Error::Lookup(format!("unknown video {video_id}")))?;
        if t == 0 || t > video.frames.len() {
            return Err(Error::Lookup(format!(
                "frame {t} of video {video_id} outside 1..={}",
                video.frames.len()
            )));
        }
        Ok(video.frames[t - 1].clone())
    }
}

/// Exactly `K` regions of one frame, with padding flagged invalid.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionSet {
    /// 1-based frame index.
    pub frame_index: usize,
    pub features: Vec<Vec<f64>>,
    pub boxes: Vec<BBox>,
    pub valid: Vec<bool>,
    pub frame_feature: Vec<f64>,
}

impl RegionSet {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn num_valid(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Union-pair feature: element-wise mean of the two region features plus a
    /// trailing pair-marker channel set to 1.
    pub fn union_feature(&self, i: usize, j: usize) -> Vec<f64> {
        let mut out: Vec<f64> = self.features[i]
            .iter()
            .zip(&self.features[j])
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        out.push(1.0);
        out
    }

    pub fn union_box(&self, i: usize, j: usize) -> BBox {
        self.boxes[i].union_box(&self.boxes[j])
    }
}

/// Fetch frame `t` (1-based) as a `K`-region set. Extra proposals beyond `K`
/// are dropped in provider order.
pub fn get_frame_bundle(
    provider: &dyn FeatureProvider,
    video_id: &str,
    t: usize,
    k: usize,
) -> Result<RegionSet> {
    let raw = provider.frame(video_id, t)?;
    region_set_from_frame(raw, t, k, provider.region_dim())
}

pub fn region_set_from_frame(
    raw: FrameFeatures,
    t: usize,
    k: usize,
    region_dim: usize,
) -> Result<RegionSet> {
    if raw.regions.len() != raw.boxes.len() {
        return Err(Error::Integrity(format!(
            "frame {t}: {} features but {} boxes",
            raw.regions.len(),
            raw.boxes.len()
        )));
    }
    let mut features = Vec::with_capacity(k);
    let mut boxes = Vec::with_capacity(k);
    let mut valid = Vec::with_capacity(k);
    for (f, b) in raw.regions.into_iter().zip(raw.boxes).take(k) {
        if f.len() != region_dim {
            return Err(Error::Integrity(format!(
                "frame {t}: region feature of dim {} (expected {region_dim})",
                f.len()
            )));
        }
        if !b.in_unit_range() {
            return Err(Error::Integrity(format!(
                "frame {t}: box {b:?} outside [0,1]"
            )));
        }
        features.push(f);
        boxes.push(b);
        valid.push(true);
    }
    while features.len() < k {
        features.push(vec![0.0; region_dim]);
        boxes.push(BBox::EMPTY);
        valid.push(false);
    }
    Ok(RegionSet {
        frame_index: t,
        features,
        boxes,
        valid,
        frame_feature: raw.frame,
    })
}

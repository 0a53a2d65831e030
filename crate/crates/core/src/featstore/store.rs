//! File-backed feature store: a JSON manifest plus a raw little-endian `f32`
//! payload.
//!
//! Payload layout per frame, contiguous and in manifest order:
//!
//! ```text
//! num_regions x region_dim   region features
//! num_regions x 4            boxes [x, y, w, h]
//! frame_dim                  frame feature
//! ```
//!
//! Offsets and sizes in the manifest count `f32` elements, not bytes.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FeatureBundle, FeatureProvider, FrameFeatures};
use crate::error::{Error, Result};
use crate::geometry::BBox;

pub const MANIFEST_VERSION: u32 = 1;

/// Directory used to resolve relative manifest paths that do not exist as given.
pub const FEATURE_ROOT_ENV: &str = "STGRN_FEATURE_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub offset: u64,
    pub num_regions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub video_id: String,
    pub frames: Vec<FrameEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub format_version: u32,
    pub dtype: String,
    pub endianness: String,
    /// Payload file, relative to the manifest's directory.
    pub payload: String,
    pub region_dim: usize,
    pub frame_dim: usize,
    /// Total payload length in elements.
    pub num_elements: u64,
    pub videos: Vec<VideoEntry>,
}

impl FeatureManifest {
    fn frame_len(&self, num_regions: usize) -> u64 {
        (num_regions * (self.region_dim + 4) + self.frame_dim) as u64
    }

    fn check(&self, payload_bytes: u64) -> Result<()> {
        if self.format_version != MANIFEST_VERSION {
            return Err(Error::Format(format!(
                "unsupported manifest version {}",
                self.format_version
            )));
        }
        if self.dtype != "f32" {
            return Err(Error::Format(format!("unknown dtype {:?}", self.dtype)));
        }
        if self.endianness != "little" {
            return Err(Error::Format(format!(
                "unsupported endianness {:?}",
                self.endianness
            )));
        }
        if payload_bytes != self.num_elements * 4 {
            return Err(Error::Integrity(format!(
                "payload has {payload_bytes} bytes, manifest declares {} elements",
                self.num_elements
            )));
        }
        let mut cursor = 0u64;
        for v in &self.videos {
            for (t, f) in v.frames.iter().enumerate() {
                if f.offset < cursor {
                    return Err(Error::Integrity(format!(
                        "video {} frame {}: offset {} not monotone",
                        v.video_id,
                        t + 1,
                        f.offset
                    )));
                }
                cursor = f.offset + self.frame_len(f.num_regions);
                if cursor > self.num_elements {
                    return Err(Error::Integrity(format!(
                        "video {} frame {} extends past payload end",
                        v.video_id,
                        t + 1
                    )));
                }
            }
        }
        if cursor != self.num_elements {
            return Err(Error::Integrity(format!(
                "declared frames cover {cursor} elements, payload has {}",
                self.num_elements
            )));
        }
        Ok(())
    }
}

/// Read-only store opened from a manifest.
#[derive(Debug)]
pub struct FeatureStore {
    manifest: FeatureManifest,
    payload: Vec<f32>,
    index: HashMap<String, usize>,
}

/// Resolve a manifest path, falling back to `$STGRN_FEATURE_ROOT/<path>`.
pub fn resolve_manifest_path(path: &Path) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(FEATURE_ROOT_ENV) {
        Some(root) => Path::new(&root).join(path),
        None => path.to_path_buf(),
    }
}

impl FeatureStore {
    pub fn open(manifest_path: impl AsRef<Path>) -> Result<Self> {
        let manifest_path = resolve_manifest_path(manifest_path.as_ref());
        let text =
            fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: FeatureManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
            context: manifest_path.display().to_string(),
            message: e.to_string(),
        })?;
        let payload_path = manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&manifest.payload);
        let bytes = fs::read(&payload_path).map_err(|e| Error::io(&payload_path, e))?;
        manifest.check(bytes.len() as u64)?;
        let payload = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let index = manifest
            .videos
            .iter()
            .enumerate()
            .map(|(i, v)| (v.video_id.clone(), i))
            .collect();
        Ok(Self {
            manifest,
            payload,
            index,
        })
    }

    pub fn manifest(&self) -> &FeatureManifest {
        &self.manifest
    }

    pub fn video_ids(&self) -> impl Iterator<Item = &str> {
        self.manifest.videos.iter().map(|v| v.video_id.as_str())
    }

    fn entry(&self, video_id: &str) -> Result<&VideoEntry> {
        self.index
            .get(video_id)
            .map(|&i| &self.manifest.videos[i])
            .ok_or_else(|| Error::Lookup(format!("unknown video {video_id}")))
    }

    /// Load everything into an in-memory bundle.
    pub fn to_bundle(&self) -> Result<FeatureBundle> {
        let videos = self
            .manifest
            .videos
            .iter()
            .map(|v| {
                let frames = (1..=v.frames.len())
                    .map(|t| self.frame(&v.video_id, t))
                    .collect::<Result<Vec<_>>>()?;
                Ok(super::VideoFeatures {
                    video_id: v.video_id.clone(),
                    frames,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureBundle::new(
            self.manifest.region_dim,
            self.manifest.frame_dim,
            videos,
        ))
    }
}

impl FeatureProvider for FeatureStore {
    fn region_dim(&self) -> usize {
        self.manifest.region_dim
    }

    fn frame_dim(&self) -> usize {
        self.manifest.frame_dim
    }

    fn num_frames(&self, video_id: &str) -> Result<usize> {
        Ok(self.entry(video_id)?.frames.len())
    }

    fn frame(&self, video_id: &str, t: usize) -> Result<FrameFeatures> {
        let entry = self.entry(video_id)?;
        if t == 0 || t > entry.frames.len() {
            return Err(Error::Lookup(format!(
                "frame {t} of video {video_id} outside 1..={}",
                entry.frames.len()
            )));
        }
        let f = &entry.frames[t - 1];
        let (dr, df) = (self.manifest.region_dim, self.manifest.frame_dim);
        let mut at = f.offset as usize;
        let mut take = |n: usize| {
            let s: Vec<f64> = self.payload[at..at + n].iter().map(|&x| x as f64).collect();
            at += n;
            s
        };
        let regions = (0..f.num_regions).map(|_| take(dr)).collect();
        let boxes = (0..f.num_regions)
            .map(|_| {
                let b = take(4);
                BBox::new(b[0], b[1], b[2], b[3])
            })
            .collect();
        let frame = take(df);
        Ok(FrameFeatures {
            regions,
            boxes,
            frame,
        })
    }
}

/// Write `bundle` as `<dir>/<stem>.json` + `<dir>/<stem>.f32`; returns the manifest path.
///
/// Values are stored as `f32`.
pub fn write_store(bundle: &FeatureBundle, dir: &Path, stem: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let payload_name = format!("{stem}.f32");
    let mut bytes: Vec<u8> = Vec::new();
    let mut videos = Vec::with_capacity(bundle.videos.len());
    let push = |bytes: &mut Vec<u8>, xs: &[f64]| {
        for &x in xs {
            bytes.extend_from_slice(&(x as f32).to_le_bytes());
        }
    };
    for v in &bundle.videos {
        let mut frames = Vec::with_capacity(v.frames.len());
        for f in &v.frames {
            frames.push(FrameEntry {
                offset: (bytes.len() / 4) as u64,
                num_regions: f.regions.len(),
            });
            for r in &f.regions {
                if r.len() != bundle.region_dim {
                    return Err(Error::Integrity(format!(
                        "video {}: region feature dim {} != {}",
                        v.video_id,
                        r.len(),
                        bundle.region_dim
                    )));
                }
                push(&mut bytes, r);
            }
            for b in &f.boxes {
                push(&mut bytes, &b.to_array());
            }
            if f.frame.len() != bundle.frame_dim {
                return Err(Error::Integrity(format!(
                    "video {}: frame feature dim {} != {}",
                    v.video_id,
                    f.frame.len(),
                    bundle.frame_dim
                )));
            }
            push(&mut bytes, &f.frame);
        }
        videos.push(VideoEntry {
            video_id: v.video_id.clone(),
            frames,
        });
    }
    let manifest = FeatureManifest {
        format_version: MANIFEST_VERSION,
        dtype: "f32".into(),
        endianness: "little".into(),
        payload: payload_name.clone(),
        region_dim: bundle.region_dim,
        frame_dim: bundle.frame_dim,
        num_elements: (bytes.len() / 4) as u64,
        videos,
    };
    let payload_path = dir.join(&payload_name);
    fs::write(&payload_path, &bytes).map_err(|e| Error::io(&payload_path, e))?;
    let manifest_path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

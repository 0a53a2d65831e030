use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::record::{AnnotationRecord, QueryType};

/// Counts and means for one split. Durations are in sampled frames.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub declarative: usize,
    pub interrogative: usize,
    pub sentences: usize,
    /// Distinct videos; each video holds one relation triplet.
    pub video_triplet_pairs: usize,
    pub mean_video_frames: f64,
    pub mean_tube_frames: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub splits: BTreeMap<String, SplitStats>,
    pub total: SplitStats,
}

/// Statistics of one list of records. An empty list yields all zeros.
pub fn dataset_stats(records: &[AnnotationRecord]) -> SplitStats {
    if records.is_empty() {
        return SplitStats::default();
    }
    let declarative = records
        .iter()
        .filter(|r| r.query_type == QueryType::Declarative)
        .count();
    let mut videos: HashMap<&str, usize> = HashMap::new();
    for r in records {
        videos.entry(r.video_id.as_str()).or_insert(r.num_frames);
    }
    let mean_video_frames =
        videos.values().map(|&n| n as f64).sum::<f64>() / videos.len() as f64;
    let mean_tube_frames =
        records.iter().map(|r| r.tube_len() as f64).sum::<f64>() / records.len() as f64;
    SplitStats {
        declarative,
        interrogative: records.len() - declarative,
        sentences: records.len(),
        video_triplet_pairs: videos.len(),
        mean_video_frames,
        mean_tube_frames,
    }
}

/// Per-split statistics plus the pooled total.
pub fn stats_report<'a>(
    splits: impl IntoIterator<Item = (&'a str, &'a [AnnotationRecord])>,
) -> StatsReport {
    let mut report = StatsReport::default();
    let mut all: Vec<AnnotationRecord> = Vec::new();
    for (name, records) in splits {
        report.splits.insert(name.to_string(), dataset_stats(records));
        all.extend_from_slice(records);
    }
    report.total = dataset_stats(&all);
    report
}

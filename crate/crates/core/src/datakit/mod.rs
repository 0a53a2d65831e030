//! Annotated grounding samples: schema, loading, statistics and a synthetic
//! generator.

mod record;
mod stats;
mod synthetic;

pub use record::{
    annotations_to_string, load_annotations, parse_annotations, save_annotations,
    AnnotationRecord, FrameTriplet, QueryType, MAX_FRAMES, SCHEMA_VERSION,
};
pub use stats::{dataset_stats, stats_report, SplitStats, StatsReport};
pub use synthetic::{
    generate_synthetic, identity_code, QueryMix, SyntheticSceneConfig, CONTROL_CHANNELS,
};

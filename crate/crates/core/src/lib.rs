//! Spatio-temporal grounding of declarative and interrogative sentences in
//! video.
//!
//! The pipeline encodes the sentence with a bidirectional GRU and an
//! entity-aware attention query, builds a region graph per video (implicit
//! and explicit spatial subgraphs inside each frame, a temporal subgraph
//! across frames), runs stacked cross-modal graph convolutions over it, then
//! scores multi-scale candidate clips and per-region matches. Decoding picks
//! a clip and links one region per frame into a tube, greedily or by Viterbi.

pub mod autograd;
pub mod datakit;
pub mod decode;
pub mod error;
pub mod featstore;
pub mod geometry;
pub mod graph;
pub mod lang;
pub mod localizer;
pub mod model;
pub mod params;
pub mod reasoner;
pub mod runner;
pub mod tensor;
pub mod vocab;

pub use error::{Error, Result};

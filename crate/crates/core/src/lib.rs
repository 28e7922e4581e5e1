//! Affective alignment between language-model text and human corpora.
//!
//! Texts are scored into emotion or moral-foundation confidence vectors,
//! averaged per topic, and compared with a Jensen–Shannon based alignment
//! score. See [`pipeline::run_experiment`] for the end-to-end flow.

pub mod cli;
pub mod config;
pub mod generation;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod prompts;
pub mod report;
pub mod scoring;
pub mod significance;
pub mod taxonomy;
pub mod text;

pub use metrics::{alignment, jsd, pea, AffectVector, AlignmentScore, ProximityMatrix};
pub use pipeline::{run_experiment, AlignmentReport, ExperimentSpec};
pub use taxonomy::{EmotionKind, MoralKind, Taxonomy};

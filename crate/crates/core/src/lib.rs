//! Probing sentence embeddings for idiomatic-usage information, and locating it.
//!
//! The crate trains small MLP probes on vanilla embeddings and on embeddings
//! whose norm, dimension values or both have been replaced with noise, then
//! compares the resulting AUC distributions with random baselines. Whether a
//! probe beats the baselines after an ablation tells which container (vector
//! direction or vector norm) carries the information.
//!
//! Modules map onto the pipeline:
//!
//! * [`corpus`]: labeled sentences, statistics validation, expression-disjoint splits
//! * [`embed`]: static word vectors, mean pooling, the JSONL embedding store
//! * [`noise`]: norm and dimension ablations, half deletion, random vectors
//! * [`probe`]: the MLP probe, AUC-ROC and the random-prediction baseline
//! * [`stats`]: run aggregation, CI-overlap classification, norm correlation
//! * [`runner`] and [`report`]: the experiment matrix and its tables

pub mod condition;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod noise;
pub mod probe;
pub mod report;
pub mod runner;
pub mod seed;
pub mod stats;
pub mod synthetic;

pub use condition::{Condition, SplitKind};
pub use corpus::{Corpus, CorpusFormat, Expression, Label, LabeledSentence, SplitSpec};
pub use embed::{EmbeddingSet, SentenceEmbedding, WordVectorTable};
pub use error::{Error, Result};
pub use noise::{AblationKind, AblationSpec, RangeReport};
pub use probe::{ProbeConfig, ProbeModel, ScoredPrediction};
pub use runner::{ExperimentConfig, ExperimentOutcome, RunManifest, RunOptions};
pub use stats::{Classification, CorrelationReport, ExperimentSummary, RunSeries};

//! Caption quality evaluation without generating captions.
//!
//! A captioning model's per-token probabilities on the reference captions
//! are reduced through four tiers (filter, sentence score, image aggregate,
//! dataset aggregate) into 504 "pre-gen" metrics. These are validated
//! against reference-based "post-gen" metrics (CIDEr-D, BLEU, WMD) over
//! CIDEr-stratified datasets with Pearson correlation.
//!
//! Modules:
//! - [`datamodel`]: tokens, traces, datasets and their file formats.
//! - [`pregen`]: the tiered pre-gen metric space.
//! - [`postgen`]: CIDEr-D, BLEU and Word Mover's Distance.
//! - [`stats`]: Pearson correlation and its p-value.
//! - [`strat`]: stratification, score tables and metric ranking.
//! - [`toyworld`]: a synthetic captioning world with a quality knob.
//! - [`study`]: the end-to-end correlation pipeline and its CSV outputs.

pub mod datamodel;
mod error;
pub mod postgen;
pub mod pregen;
pub mod stats;
pub mod strat;
pub mod study;
pub mod toyworld;

pub use datamodel::{
    tokenize, CaptionTrace, Dataset, ImageEntry, Token, TokenPrediction, TraceSet,
};
pub use error::{Error, Result};
pub use postgen::{EmbeddingTable, IdfTable};
pub use pregen::{
    compute_all, compute_metric, enumerate_metrics, DatasetAggKind, FilterKind, ImageAggKind,
    PregenConfig, PregenMetricId, SentenceScoreKind,
};
pub use stats::{pearson, CorrelationResult, Pearson};
pub use strat::{stratify, SampleKey, ScoreTable, StratumAssignment};

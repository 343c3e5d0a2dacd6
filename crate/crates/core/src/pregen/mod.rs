//! The pre-gen metric space: four tiers composed into 504 metrics.
//!
//! Tier 1 filters prediction positions, tier 2 scores each caption, tier 3
//! aggregates caption scores per image (or joins them), and tier 4
//! aggregates to a single dataset score.

mod engine;
mod metric;
mod tiers;

pub use engine::{compute_all, compute_metric, PregenScores};
pub use metric::{enumerate_metrics, parse_metric_name, PregenMetricId};
pub use tiers::{
    apply_filter, sentence_score, Aggregator, DatasetAggKind, FilterKind, ImageAggKind,
    PregenConfig, SentenceScoreKind,
};

use std::io::Write;

use crate::error::Result;

/// Writes `metric,value` rows sorted by metric name.
pub fn write_scores_csv(writer: impl Write, scores: &PregenScores) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["metric", "value"])?;
    for (name, value) in scores {
        w.write_record([name.as_str(), &value.to_string()])?;
    }
    w.flush().map_err(|e| crate::Error::io("<csv>", e))?;
    Ok(())
}

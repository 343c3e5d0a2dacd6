use std::collections::BTreeMap;

use super::metric::PregenMetricId;
use super::tiers::{
    apply_filter, sentence_score, Aggregator, FilterKind, ImageAggKind, PregenConfig,
    SentenceScoreKind,
};
use crate::datamodel::{CaptionTrace, TraceSet};
use crate::error::{Error, Result};

/// Pre-gen scores keyed by canonical metric name.
pub type PregenScores = BTreeMap<String, f64>;

fn caption_score(
    filter: FilterKind,
    sentence: SentenceScoreKind,
    trace: &CaptionTrace,
    config: &PregenConfig,
) -> f64 {
    let selected = apply_filter(filter, trace, config);
    sentence_score(sentence, trace, &selected, config)
}

fn reduce_images(
    image: ImageAggKind,
    dataset: Aggregator,
    per_image: &[Vec<f64>],
) -> Result<f64> {
    match image {
        ImageAggKind::Join => {
            let joined: Vec<f64> = per_image.iter().flatten().copied().collect();
            dataset.apply(&joined)
        }
        ImageAggKind::Reduce(agg) => {
            let image_scores = per_image
                .iter()
                .map(|caps| agg.apply(caps))
                .collect::<Result<Vec<_>>>()?;
            dataset.apply(&image_scores)
        }
    }
}

/// Evaluates a single composition over traces grouped by image.
pub fn compute_metric(id: &PregenMetricId, traces: &TraceSet, config: &PregenConfig) -> Result<f64> {
    if traces.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    let per_image: Vec<Vec<f64>> = traces
        .images()
        .map(|(_, caps)| {
            caps.iter()
                .map(|t| caption_score(id.filter, id.sentence, t, config))
                .collect()
        })
        .collect();
    reduce_images(id.image, id.dataset, &per_image)
}

/// Evaluates all 504 compositions. Each (filter, sentence score) pair is
/// computed once per caption and shared by the 42 aggregator combinations
/// on top of it.
pub fn compute_all(traces: &TraceSet, config: &PregenConfig) -> Result<PregenScores> {
    if traces.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    let mut out = PregenScores::new();
    for &filter in FilterKind::ALL {
        let selections: Vec<Vec<Vec<usize>>> = traces
            .images()
            .map(|(_, caps)| caps.iter().map(|t| apply_filter(filter, t, config)).collect())
            .collect();
        for &sentence in SentenceScoreKind::ALL {
            let per_image: Vec<Vec<f64>> = traces
                .images()
                .zip(&selections)
                .map(|((_, caps), sels)| {
                    caps.iter()
                        .zip(sels)
                        .map(|(t, sel)| sentence_score(sentence, t, sel, config))
                        .collect()
                })
                .collect();
            for &image in ImageAggKind::ALL {
                let level: Vec<f64> = match image {
                    ImageAggKind::Join => per_image.iter().flatten().copied().collect(),
                    ImageAggKind::Reduce(agg) => per_image
                        .iter()
                        .map(|caps| agg.apply(caps))
                        .collect::<Result<_>>()?,
                };
                for &dataset in Aggregator::ALL {
                    let id = PregenMetricId::new(dataset, image, sentence, filter);
                    out.insert(id.canonical_name(), dataset.apply(&level)?);
                }
            }
        }
    }
    debug_assert_eq!(out.len(), 504);
    Ok(out)
}

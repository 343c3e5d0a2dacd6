use std::fmt;
use std::str::FromStr;

use super::tiers::{Aggregator, DatasetAggKind, FilterKind, ImageAggKind, SentenceScoreKind};
use crate::error::Error;

/// One composition of the four tiers. Its canonical name lists the tiers
/// from the dataset aggregator down to the filter, e.g.
/// `mean_max_normcount_prefix0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PregenMetricId {
    pub filter: FilterKind,
    pub sentence: SentenceScoreKind,
    pub image: ImageAggKind,
    pub dataset: DatasetAggKind,
}

impl PregenMetricId {
    pub fn new(
        dataset: DatasetAggKind,
        image: ImageAggKind,
        sentence: SentenceScoreKind,
        filter: FilterKind,
    ) -> Self {
        PregenMetricId {
            filter,
            sentence,
            image,
            dataset,
        }
    }

    pub fn canonical_name(&self) -> String {
        format!(
            "{}_{}_{}_{}",
            self.dataset.name(),
            self.image.name(),
            self.sentence.name(),
            self.filter.name()
        )
    }

    /// The best metric reported for the original study.
    pub fn best_reported() -> Self {
        PregenMetricId::new(
            Aggregator::Mean,
            ImageAggKind::Reduce(Aggregator::Max),
            SentenceScoreKind::NormCount,
            FilterKind::Prefix0,
        )
    }

    /// Corpus perplexity expressed in the tier space.
    pub fn perplexity() -> Self {
        PregenMetricId::new(
            Aggregator::Geomean,
            ImageAggKind::Join,
            SentenceScoreKind::Pplx,
            FilterKind::None,
        )
    }
}

impl fmt::Display for PregenMetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_name())
    }
}

// No component name is a prefix of another in its tier, so comparing the
// parts tier by tier orders ids exactly like their canonical names.
impl Ord for PregenMetricId {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let key = |m: &Self| (m.dataset.name(), m.image.name(), m.sentence.name(), m.filter.name());
        key(self).cmp(&key(other))
    }
}

impl PartialOrd for PregenMetricId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl FromStr for PregenMetricId {
    type Err = Error;

    fn from_str(name: &str) -> Result<Self, Error> {
        let bad = |reason: String| Error::MetricName {
            name: name.to_owned(),
            reason,
        };
        let parts: Vec<&str> = name.split('_').collect();
        let [t4, t3, t2, t1] = parts.as_slice() else {
            return Err(bad(format!(
                "expected 4 underscore-separated components, found {}",
                parts.len()
            )));
        };
        if *t4 == "join" {
            return Err(bad("`join` is not allowed as the dataset aggregator".into()));
        }
        Ok(PregenMetricId {
            dataset: t4.parse().map_err(|_| bad(format!("unknown dataset aggregator `{t4}`")))?,
            image: t3.parse().map_err(|_| bad(format!("unknown image aggregator `{t3}`")))?,
            sentence: t2.parse().map_err(|_| bad(format!("unknown sentence score `{t2}`")))?,
            filter: t1.parse().map_err(|_| bad(format!("unknown filter `{t1}`")))?,
        })
    }
}

pub fn parse_metric_name(name: &str) -> Result<PregenMetricId, Error> {
    name.parse()
}

/// All 3 × 4 × 7 × 6 = 504 compositions, sorted by canonical name.
pub fn enumerate_metrics() -> Vec<PregenMetricId> {
    fn by_name<T: Copy>(all: &[T], name: impl Fn(&T) -> &'static str) -> Vec<T> {
        let mut v = all.to_vec();
        v.sort_by_key(|x| name(x));
        v
    }
    // Nested loops over name-sorted tiers already yield canonical order.
    let datasets = by_name(Aggregator::ALL, |a| a.name());
    let images = by_name(ImageAggKind::ALL, |a| a.name());
    let sentences = by_name(SentenceScoreKind::ALL, |a| a.name());
    let filters = by_name(FilterKind::ALL, |a| a.name());
    let mut ids = Vec::with_capacity(504);
    for &dataset in &datasets {
        for &image in &images {
            for &sentence in &sentences {
                for &filter in &filters {
                    ids.push(PregenMetricId::new(dataset, image, sentence, filter));
                }
            }
        }
    }
    debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
    ids
}

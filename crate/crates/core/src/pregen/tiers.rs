//! The tier functions: filters, sentence scores and aggregators.

use std::fmt;
use std::str::FromStr;

use crate::datamodel::CaptionTrace;
use crate::error::{Error, Result};

/// Options shared by every tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PregenConfig {
    /// Whether the end-token prediction is a candidate position.
    pub include_end_token: bool,
}

impl Default for PregenConfig {
    fn default() -> Self {
        PregenConfig {
            include_end_token: true,
        }
    }
}

impl PregenConfig {
    /// Number of candidate positions `P` for a trace.
    pub fn candidate_positions(&self, trace: &CaptionTrace) -> usize {
        if self.include_end_token {
            trace.len() + 1
        } else {
            trace.len()
        }
    }
}

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!("unknown {} `{}`", stringify!($name), other)),
                }
            }
        }
    };
}

named_enum! {
    /// Tier 1: which predictions of a caption are kept.
    FilterKind {
        None => "none",
        Filter0 => "filter0",
        Prefix0 => "prefix0",
    }
}

named_enum! {
    /// Tier 2: reduction of the kept predictions into a caption score.
    SentenceScoreKind {
        Prob => "prob",
        Pplx => "pplx",
        Count => "count",
        NormCount => "normcount",
    }
}

named_enum! {
    /// Reducers shared by tiers 3 and 4.
    Aggregator {
        Sum => "sum",
        Mean => "mean",
        Median => "median",
        Geomean => "geomean",
        Max => "max",
        Min => "min",
    }
}

/// Tier 4 uses the plain reducers.
pub type DatasetAggKind = Aggregator;

/// Tier 3: per-image reduction, or `Join` to pool every caption score into
/// the tier-4 reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ImageAggKind {
    Reduce(Aggregator),
    Join,
}

impl ImageAggKind {
    pub const ALL: &'static [ImageAggKind] = &[
        ImageAggKind::Reduce(Aggregator::Sum),
        ImageAggKind::Reduce(Aggregator::Mean),
        ImageAggKind::Reduce(Aggregator::Median),
        ImageAggKind::Reduce(Aggregator::Geomean),
        ImageAggKind::Reduce(Aggregator::Max),
        ImageAggKind::Reduce(Aggregator::Min),
        ImageAggKind::Join,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ImageAggKind::Reduce(a) => a.name(),
            ImageAggKind::Join => "join",
        }
    }
}

impl fmt::Display for ImageAggKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ImageAggKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "join" {
            Ok(ImageAggKind::Join)
        } else {
            s.parse()
                .map(ImageAggKind::Reduce)
                .map_err(|_| format!("unknown ImageAggKind `{s}`"))
        }
    }
}

/// Selected positions (1-based, ascending) among the candidates `1..=P`.
pub fn apply_filter(kind: FilterKind, trace: &CaptionTrace, config: &PregenConfig) -> Vec<usize> {
    let candidates = &trace.predictions()[..config.candidate_positions(trace)];
    let positions = 1..=candidates.len();
    match kind {
        FilterKind::None => positions.collect(),
        FilterKind::Filter0 => positions.filter(|&i| candidates[i - 1].is_argmax).collect(),
        FilterKind::Prefix0 => positions
            .take_while(|&i| candidates[i - 1].is_argmax)
            .collect(),
    }
}

/// Tier-2 score of a caption over its selected positions.
///
/// Empty selections give `prob = 1`, `pplx = +inf`, `count = normcount = 0`;
/// any zero probability makes `pplx` infinite.
pub fn sentence_score(
    kind: SentenceScoreKind,
    trace: &CaptionTrace,
    selected: &[usize],
    config: &PregenConfig,
) -> f64 {
    let log_sum = || -> f64 {
        selected
            .iter()
            .map(|&i| trace.predictions()[i - 1].probability.ln())
            .sum()
    };
    match kind {
        SentenceScoreKind::Prob => log_sum().exp(),
        SentenceScoreKind::Pplx => {
            if selected.is_empty() {
                return f64::INFINITY;
            }
            let ls = log_sum();
            if ls == f64::NEG_INFINITY {
                f64::INFINITY
            } else {
                (-ls / selected.len() as f64).exp()
            }
        }
        SentenceScoreKind::Count => selected.len() as f64,
        SentenceScoreKind::NormCount => {
            selected.len() as f64 / config.candidate_positions(trace) as f64
        }
    }
}

impl Aggregator {
    /// Reduces a nonempty sequence. Values are consumed in the given order.
    pub fn apply(self, values: &[f64]) -> Result<f64> {
        if values.is_empty() {
            return Err(Error::EmptyAggregate);
        }
        let n = values.len() as f64;
        Ok(match self {
            Aggregator::Sum => values.iter().sum(),
            Aggregator::Mean => values.iter().sum::<f64>() / n,
            Aggregator::Median => {
                let mut sorted = values.to_vec();
                sorted.sort_by(f64::total_cmp);
                let mid = sorted.len() / 2;
                if sorted.len() % 2 == 1 {
                    sorted[mid]
                } else {
                    (sorted[mid - 1] + sorted[mid]) / 2.0
                }
            }
            Aggregator::Geomean => {
                if let Some(&neg) = values.iter().find(|&&v| v < 0.0) {
                    return Err(Error::NegativeGeomean(neg));
                }
                if values.contains(&0.0) {
                    0.0
                } else if values.contains(&f64::INFINITY) {
                    f64::INFINITY
                } else {
                    (values.iter().map(|v| v.ln()).sum::<f64>() / n).exp()
                }
            }
            Aggregator::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregator::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{tokens, TokenPrediction};
    use proptest::prelude::*;

    fn trace(flags: &[bool], probs: &[f64]) -> CaptionTrace {
        let m = flags.len() - 1;
        let toks = tokens(&vec!["w"; m].join(" "));
        let preds = flags
            .iter()
            .zip(probs)
            .map(|(&a, &p)| TokenPrediction::new(p, a).unwrap())
            .collect();
        CaptionTrace::new("i", "c", toks, preds).unwrap()
    }

    #[test]
    fn filter_examples() {
        let t = trace(&[true, false, true], &[0.5; 3]);
        let cfg = PregenConfig::default();
        assert_eq!(apply_filter(FilterKind::None, &t, &cfg), [1, 2, 3]);
        assert_eq!(apply_filter(FilterKind::Filter0, &t, &cfg), [1, 3]);
        assert_eq!(apply_filter(FilterKind::Prefix0, &t, &cfg), [1]);

        let f = trace(&[false, true, true], &[0.5; 3]);
        assert!(apply_filter(FilterKind::Prefix0, &f, &cfg).is_empty());
    }

    #[test]
    fn end_token_flag_drops_last_position() {
        let t = trace(&[true, true, true], &[0.5; 3]);
        let cfg = PregenConfig {
            include_end_token: false,
        };
        assert_eq!(apply_filter(FilterKind::None, &t, &cfg), [1, 2]);
        let sel = apply_filter(FilterKind::Prefix0, &t, &cfg);
        assert_eq!(sentence_score(SentenceScoreKind::NormCount, &t, &sel, &cfg), 1.0);
    }

    #[test]
    fn sentence_score_examples() {
        let cfg = PregenConfig::default();
        let t = trace(&[true, true, false], &[0.5, 0.5, 0.1]);
        let pplx = sentence_score(SentenceScoreKind::Pplx, &t, &[1, 2], &cfg);
        assert!((pplx - 2.0).abs() < 1e-12);
        let nc = sentence_score(SentenceScoreKind::NormCount, &t, &[1, 2], &cfg);
        assert!((nc - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(sentence_score(SentenceScoreKind::Count, &t, &[1, 2], &cfg), 2.0);

        let t = trace(&[true, true, true], &[0.5, 0.4, 1.0]);
        let prob = sentence_score(SentenceScoreKind::Prob, &t, &[1, 2], &cfg);
        assert!((prob - 0.2).abs() < 1e-12);
    }

    #[test]
    fn empty_selection_and_zero_probability_sentinels() {
        let cfg = PregenConfig::default();
        let t = trace(&[false, true], &[0.0, 0.5]);
        assert_eq!(sentence_score(SentenceScoreKind::Prob, &t, &[], &cfg), 1.0);
        assert_eq!(sentence_score(SentenceScoreKind::Pplx, &t, &[], &cfg), f64::INFINITY);
        assert_eq!(sentence_score(SentenceScoreKind::Count, &t, &[], &cfg), 0.0);
        assert_eq!(sentence_score(SentenceScoreKind::NormCount, &t, &[], &cfg), 0.0);
        assert_eq!(sentence_score(SentenceScoreKind::Pplx, &t, &[1, 2], &cfg), f64::INFINITY);
        assert_eq!(sentence_score(SentenceScoreKind::Prob, &t, &[1, 2], &cfg), 0.0);
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(Aggregator::Mean.apply(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert!((Aggregator::Geomean.apply(&[4.0, 1.0]).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(Aggregator::Median.apply(&[3.0, 1.0]).unwrap(), 2.0);
        assert_eq!(Aggregator::Median.apply(&[3.0, 1.0, 7.0]).unwrap(), 3.0);
        assert_eq!(Aggregator::Sum.apply(&[3.0, 1.0]).unwrap(), 4.0);
        assert_eq!(Aggregator::Max.apply(&[3.0, 1.0]).unwrap(), 3.0);
        assert_eq!(Aggregator::Min.apply(&[3.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn aggregate_errors_and_infinities() {
        assert!(matches!(Aggregator::Sum.apply(&[]), Err(Error::EmptyAggregate)));
        assert_eq!(
            Aggregator::Sum.apply(&[]).unwrap_err().to_string(),
            "no scores to aggregate"
        );
        assert!(Aggregator::Geomean.apply(&[1.0, -1.0]).is_err());
        let inf = f64::INFINITY;
        assert_eq!(Aggregator::Geomean.apply(&[0.0, 2.0]).unwrap(), 0.0);
        assert_eq!(Aggregator::Geomean.apply(&[inf, 2.0]).unwrap(), inf);
        assert_eq!(Aggregator::Mean.apply(&[inf, 2.0]).unwrap(), inf);
        assert_eq!(Aggregator::Min.apply(&[inf, 2.0]).unwrap(), 2.0);
        assert_eq!(Aggregator::Median.apply(&[inf, 2.0, 3.0]).unwrap(), 3.0);
    }

    #[test]
    fn names_parse_back() {
        for &k in ImageAggKind::ALL {
            assert_eq!(k.name().parse::<ImageAggKind>().unwrap(), k);
        }
        assert!("join".parse::<Aggregator>().is_err());
    }

    fn arb_trace() -> impl Strategy<Value = CaptionTrace> {
        proptest::collection::vec((0.0f64..=1.0, any::<bool>()), 2..9)
            .prop_map(|ps| {
                let flags: Vec<bool> = ps.iter().map(|p| p.1).collect();
                let probs: Vec<f64> = ps.iter().map(|p| p.0).collect();
                trace(&flags, &probs)
            })
    }

    proptest! {
        #[test]
        fn selections_nest(t in arb_trace(), end in any::<bool>()) {
            let cfg = PregenConfig { include_end_token: end };
            let none = apply_filter(FilterKind::None, &t, &cfg);
            let f0 = apply_filter(FilterKind::Filter0, &t, &cfg);
            let p0 = apply_filter(FilterKind::Prefix0, &t, &cfg);
            prop_assert!(p0.iter().all(|i| f0.contains(i)));
            prop_assert!(f0.iter().all(|i| none.contains(i)));
            prop_assert_eq!(p0.clone(), (1..=p0.len()).collect::<Vec<_>>());
        }

        #[test]
        fn score_ranges(t in arb_trace(), end in any::<bool>()) {
            let cfg = PregenConfig { include_end_token: end };
            let p = cfg.candidate_positions(&t) as f64;
            for &f in FilterKind::ALL {
                let sel = apply_filter(f, &t, &cfg);
                let nc = sentence_score(SentenceScoreKind::NormCount, &t, &sel, &cfg);
                let c = sentence_score(SentenceScoreKind::Count, &t, &sel, &cfg);
                let pr = sentence_score(SentenceScoreKind::Prob, &t, &sel, &cfg);
                let px = sentence_score(SentenceScoreKind::Pplx, &t, &sel, &cfg);
                prop_assert!((0.0..=1.0).contains(&nc));
                prop_assert!(c >= 0.0 && c <= p && c.fract() == 0.0);
                prop_assert!((0.0..=1.0).contains(&pr));
                prop_assert!(px >= 1.0 - 1e-12);
            }
        }

        #[test]
        fn flipping_argmax_never_lowers_counts(t in arb_trace(), pos in 0usize..8) {
            let cfg = PregenConfig::default();
            let pos = pos % t.predictions().len();
            let mut preds = t.predictions().to_vec();
            preds[pos].is_argmax = true;
            let flipped = CaptionTrace::new("i", "c", t.tokens().to_vec(), preds).unwrap();
            for f in [FilterKind::Filter0, FilterKind::Prefix0] {
                for s in [SentenceScoreKind::Count, SentenceScoreKind::NormCount] {
                    let before = sentence_score(s, &t, &apply_filter(f, &t, &cfg), &cfg);
                    let after = sentence_score(s, &flipped, &apply_filter(f, &flipped, &cfg), &cfg);
                    prop_assert!(after >= before);
                }
            }
        }

        #[test]
        fn aggregator_ordering(vals in proptest::collection::vec(0.0f64..100.0, 1..20)) {
            let get = |a: Aggregator| a.apply(&vals).unwrap();
            let (mn, gm, me, md, mx) = (get(Aggregator::Min), get(Aggregator::Geomean),
                get(Aggregator::Mean), get(Aggregator::Median), get(Aggregator::Max));
            let tol = 1e-9 * mx.max(1.0);
            prop_assert!(mn <= gm + tol && gm <= me + tol && me <= mx + tol);
            prop_assert!(mn <= md && md <= mx);
        }
    }
}

use super::ngram::{ngram_counts, MAX_ORDER};
use crate::datamodel::Token;

/// Additive sufficient statistics of corpus BLEU.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    /// Reference-clipped n-gram matches per order.
    pub matches: [u64; MAX_ORDER],
    /// Candidate n-gram totals per order.
    pub totals: [u64; MAX_ORDER],
    pub candidate_len: u64,
    /// Length of the reference closest in length (shorter on ties).
    pub reference_len: u64,
}

impl BleuStats {
    pub fn for_pair(candidate: &[Token], references: &[Vec<Token>]) -> Self {
        let mut stats = BleuStats {
            candidate_len: candidate.len() as u64,
            reference_len: closest_length(candidate.len(), references) as u64,
            ..Default::default()
        };
        for n in 1..=MAX_ORDER {
            let cand = ngram_counts(candidate, n);
            let ref_counts: Vec<_> = references.iter().map(|r| ngram_counts(r, n)).collect();
            for (g, &c) in &cand {
                let max_ref = ref_counts
                    .iter()
                    .filter_map(|rc| rc.get(g).copied())
                    .max()
                    .unwrap_or(0);
                stats.matches[n - 1] += u64::from(c.min(max_ref));
                stats.totals[n - 1] += u64::from(c);
            }
        }
        stats
    }

    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
    }

    /// Geometric mean of the modified precisions times the brevity penalty.
    /// Any zero (or undefined) precision yields 0.
    pub fn score(&self) -> f64 {
        if self.candidate_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for n in 0..MAX_ORDER {
            if self.matches[n] == 0 || self.totals[n] == 0 {
                return 0.0;
            }
            log_sum += (self.matches[n] as f64 / self.totals[n] as f64).ln();
        }
        let c = self.candidate_len as f64;
        let r = self.reference_len as f64;
        let bp = (1.0 - r / c).exp().min(1.0);
        bp * (log_sum / MAX_ORDER as f64).exp()
    }
}

fn closest_length(len: usize, references: &[Vec<Token>]) -> usize {
    references
        .iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(len), r))
        .unwrap_or(0)
}

/// Corpus BLEU-4 over `(candidate, references)` pairs.
pub fn bleu<'a>(corpus: impl IntoIterator<Item = (&'a [Token], &'a [Vec<Token>])>) -> f64 {
    let mut total = BleuStats::default();
    for (cand, refs) in corpus {
        total.add(&BleuStats::for_pair(cand, refs));
    }
    total.score()
}

use super::ngram::{ngram_counts, IdfTable, MAX_ORDER};
use crate::datamodel::Token;

/// Gaussian length-penalty width.
pub const SIGMA: f64 = 6.0;

struct TfIdf {
    weights: std::collections::BTreeMap<String, f64>,
    norm: f64,
}

fn tfidf(tokens: &[Token], n: usize, idf: &IdfTable) -> TfIdf {
    let weights: std::collections::BTreeMap<String, f64> = ngram_counts(tokens, n)
        .into_iter()
        .map(|(g, tf)| {
            let w = f64::from(tf) * idf.idf(&g);
            (g, w)
        })
        .collect();
    let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
    TfIdf { weights, norm }
}

/// CIDEr-D of one candidate against its references.
///
/// For each order the candidate weights are clipped to the reference's in
/// the dot product, the cosine is taken against each reference (0 if either
/// norm vanishes) and damped by `exp(-(lc - lr)^2 / (2 sigma^2))`. Orders are
/// averaged, references averaged, and the result scaled by 10.
pub fn cider_d(candidate: &[Token], references: &[Vec<Token>], idf: &IdfTable) -> f64 {
    if references.is_empty() {
        return 0.0;
    }
    let cand: Vec<TfIdf> = (1..=MAX_ORDER).map(|n| tfidf(candidate, n, idf)).collect();
    let mut total = 0.0;
    for reference in references {
        let delta = candidate.len() as f64 - reference.len() as f64;
        let penalty = (-(delta * delta) / (2.0 * SIGMA * SIGMA)).exp();
        let mut per_order = 0.0;
        for (n, c) in (1..=MAX_ORDER).zip(&cand) {
            let r = tfidf(reference, n, idf);
            if c.norm == 0.0 || r.norm == 0.0 {
                continue;
            }
            let dot: f64 = c
                .weights
                .iter()
                .filter_map(|(g, &wc)| r.weights.get(g).map(|&wr| wc.min(wr) * wr))
                .sum();
            per_order += dot / (c.norm * r.norm) * penalty;
        }
        total += per_order / MAX_ORDER as f64;
    }
    10.0 * total / references.len() as f64
}

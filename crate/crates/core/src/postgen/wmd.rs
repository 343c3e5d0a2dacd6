use std::collections::BTreeMap;

use super::embeddings::EmbeddingTable;
use super::transport::TransportProblem;
use crate::datamodel::Token;
use crate::error::{Error, Result};

fn embeddable_counts<'a>(tokens: &'a [Token], emb: &EmbeddingTable) -> BTreeMap<&'a str, u64> {
    let mut counts = BTreeMap::new();
    for t in tokens {
        if emb.get(t.as_str()).is_some() {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    counts
}

/// Word Mover's Distance between two token sequences.
///
/// Tokens without embeddings are dropped. The bag of words of each side is
/// scaled by the other side's token total so both marginals are integers
/// with the same sum; the transport objective is divided by that sum.
pub fn wmd(candidate: &[Token], reference: &[Token], emb: &EmbeddingTable) -> Result<f64> {
    let cand = embeddable_counts(candidate, emb);
    let refc = embeddable_counts(reference, emb);
    if cand.is_empty() || refc.is_empty() {
        return Err(Error::NoEmbeddableTokens);
    }
    let cand_total: u64 = cand.values().sum();
    let ref_total: u64 = refc.values().sum();
    let supplies = cand.values().map(|c| c * ref_total).collect();
    let demands = refc.values().map(|c| c * cand_total).collect();
    let costs = cand
        .keys()
        .map(|a| {
            let va = emb.get(a).expect("filtered");
            refc.keys()
                .map(|b| emb.distance(va, emb.get(b).expect("filtered")))
                .collect()
        })
        .collect();
    let problem = TransportProblem::new(supplies, demands, costs)?;
    Ok(problem.solve().objective / (cand_total * ref_total) as f64)
}

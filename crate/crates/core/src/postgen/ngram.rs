use std::collections::BTreeMap;

use crate::datamodel::{Dataset, Token};

pub const MAX_ORDER: usize = 4;

/// Counts of the n-grams of one order, keyed by the space-joined tokens.
pub type NGramCounts = BTreeMap<String, u32>;

/// N-gram counts of orders 1 through 4.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NGramMultiset {
    orders: [NGramCounts; MAX_ORDER],
}

impl NGramMultiset {
    pub fn new(tokens: &[Token]) -> Self {
        let mut orders: [NGramCounts; MAX_ORDER] = Default::default();
        for (n, counts) in (1..=MAX_ORDER).zip(orders.iter_mut()) {
            *counts = ngram_counts(tokens, n);
        }
        NGramMultiset { orders }
    }

    /// Counts for order `n` in `1..=4`.
    pub fn order(&self, n: usize) -> &NGramCounts {
        &self.orders[n - 1]
    }
}

pub fn ngram_counts(tokens: &[Token], n: usize) -> NGramCounts {
    let mut counts = NGramCounts::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for window in tokens.windows(n) {
        let key = window
            .iter()
            .map(Token::as_str)
            .collect::<Vec<_>>()
            .join(" ");
        *counts.entry(key).or_insert(0) += 1;
    }
    counts
}

/// Document frequencies over images (an image counts once per n-gram no
/// matter how many of its references contain it) and the derived weights
/// `idf(g) = ln(N / df(g))`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    idf: BTreeMap<String, f64>,
    corpus_size: usize,
}

impl IdfTable {
    pub fn build(dataset: &Dataset) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for image in dataset.images() {
            let mut seen: std::collections::BTreeSet<String> = Default::default();
            for reference in &image.references {
                for n in 1..=MAX_ORDER {
                    seen.extend(ngram_counts(reference, n).into_keys());
                }
            }
            for g in seen {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        let corpus_size = dataset.len();
        let log_n = (corpus_size as f64).ln();
        let idf = df
            .into_iter()
            .map(|(g, d)| (g, log_n - (d as f64).ln()))
            .collect();
        IdfTable { idf, corpus_size }
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    /// Weight of an n-gram. N-grams absent from every reference get
    /// `ln(N)`, i.e. their document frequency is clamped to 1.
    pub fn idf(&self, ngram: &str) -> f64 {
        self.idf
            .get(ngram)
            .copied()
            .unwrap_or_else(|| (self.corpus_size as f64).ln())
    }

    pub fn contains(&self, ngram: &str) -> bool {
        self.idf.contains_key(ngram)
    }
}

//! Reference-based caption metrics: CIDEr-D, BLEU-4 and Word Mover's
//! Distance (as the similarity `exp(-d)` to the closest reference).

mod bleu;
mod cider;
mod embeddings;
mod ngram;
pub mod transport;
mod wmd;

use std::collections::BTreeMap;
use std::io::Write;

pub use bleu::{bleu, BleuStats};
pub use cider::{cider_d, SIGMA};
pub use embeddings::EmbeddingTable;
pub use ngram::{ngram_counts, IdfTable, NGramCounts, NGramMultiset, MAX_ORDER};
pub use transport::{solve_transport, TransportProblem, TransportSolution};
pub use wmd::wmd;

use crate::datamodel::{Dataset, ImageEntry};
use crate::error::{Error, Result};

pub const CIDER: &str = "cider";
pub const BLEU: &str = "bleu";
pub const WMD_SIM: &str = "wmd_sim";

/// Post-gen metric names in output order.
pub const POSTGEN_METRICS: [&str; 3] = [BLEU, CIDER, WMD_SIM];

/// Post-gen metric values keyed by name.
pub type PostgenScores = BTreeMap<String, f64>;

/// Per-image scores together with the BLEU statistics needed to build
/// corpus BLEU over any subset of images.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePostgen {
    pub cider: f64,
    pub wmd_sim: f64,
    pub bleu: f64,
    pub bleu_stats: BleuStats,
}

impl ImagePostgen {
    pub fn scores(&self) -> PostgenScores {
        [(BLEU, self.bleu), (CIDER, self.cider), (WMD_SIM, self.wmd_sim)]
            .into_iter()
            .map(|(k, v)| (k.to_owned(), v))
            .collect()
    }
}

/// Scores the generated caption of one image. References with no
/// embeddable token are skipped for WMD; if none remain it is an error.
pub fn per_image_postgen(
    image: &ImageEntry,
    idf: &IdfTable,
    emb: &EmbeddingTable,
) -> Result<ImagePostgen> {
    let gen = image.generated()?;
    let cider = cider_d(gen, &image.references, idf);
    let mut best: Option<f64> = None;
    for reference in &image.references {
        match wmd(gen, reference, emb) {
            Ok(d) => best = Some(best.map_or(d, |b: f64| b.min(d))),
            Err(Error::NoEmbeddableTokens) => continue,
            Err(e) => return Err(e),
        }
    }
    let distance = best.ok_or(Error::NoEmbeddableTokens)?;
    let bleu_stats = BleuStats::for_pair(gen, &image.references);
    Ok(ImagePostgen {
        cider,
        wmd_sim: (-distance).exp(),
        bleu: bleu_stats.score(),
        bleu_stats,
    })
}

/// Per-image scores for every image, ascending id.
pub fn score_images(
    dataset: &Dataset,
    idf: &IdfTable,
    emb: &EmbeddingTable,
) -> Result<BTreeMap<String, ImagePostgen>> {
    dataset
        .images()
        .iter()
        .map(|img| Ok((img.image_id.clone(), per_image_postgen(img, idf, emb)?)))
        .collect()
}

/// Corpus scores from per-image results: mean CIDEr-D and mean WMD
/// similarity, and corpus BLEU from pooled statistics.
pub fn corpus_from_images<'a>(
    images: impl IntoIterator<Item = &'a ImagePostgen>,
) -> Result<PostgenScores> {
    let mut n = 0usize;
    let (mut cider, mut wmd_sim) = (0.0, 0.0);
    let mut stats = BleuStats::default();
    for img in images {
        n += 1;
        cider += img.cider;
        wmd_sim += img.wmd_sim;
        stats.add(&img.bleu_stats);
    }
    if n == 0 {
        return Err(Error::EmptyAggregate);
    }
    Ok([
        (BLEU, stats.score()),
        (CIDER, cider / n as f64),
        (WMD_SIM, wmd_sim / n as f64),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_owned(), v))
    .collect())
}

pub fn corpus_postgen(
    dataset: &Dataset,
    idf: &IdfTable,
    emb: &EmbeddingTable,
) -> Result<PostgenScores> {
    let per_image = score_images(dataset, idf, emb)?;
    corpus_from_images(per_image.values())
}

/// `image_id,metric,value` rows.
pub fn write_per_image_csv(
    writer: impl Write,
    per_image: &BTreeMap<String, ImagePostgen>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["image_id", "metric", "value"])?;
    for (id, img) in per_image {
        for (metric, value) in img.scores() {
            w.write_record([id.as_str(), metric.as_str(), &value.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// `metric,value` rows.
pub fn write_corpus_csv(writer: impl Write, scores: &PostgenScores) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["metric", "value"])?;
    for (metric, value) in scores {
        w.write_record([metric.as_str(), &value.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{function_words, LEXICON};
use crate::error::Result;
use crate::postgen::EmbeddingTable;

const SYNONYM_SPREAD: f64 = 0.15;

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Embeddings for the toy lexicon: every concept gets a random direction
/// and its surface forms sit within a small box around it, so synonyms are
/// close and distinct concepts far apart.
pub fn toy_embeddings(seed: u64, dim: usize) -> Result<EmbeddingTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(dim)?;
    for slot in LEXICON {
        for concept in slot {
            let base = random_vector(&mut rng, dim);
            for form in *concept {
                let v = base
                    .iter()
                    .map(|b| b + SYNONYM_SPREAD * rng.gen_range(-1.0..1.0))
                    .collect();
                table.insert(*form, v)?;
            }
        }
    }
    for word in function_words() {
        let v = random_vector(&mut rng, dim);
        table.insert(word, v)?;
    }
    Ok(table)
}

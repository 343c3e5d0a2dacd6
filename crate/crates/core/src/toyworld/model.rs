use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ToyWorld;
use crate::datamodel::{CaptionTrace, Token, TokenPrediction};
use crate::error::{Error, Result};

/// Surface form of token id 0 in model files.
pub const END_TOKEN: &str = "</s>";

pub(crate) const END: u32 = 0;

/// A token id or the start-of-caption context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Prev {
    Start,
    Token(u32),
}

type ContextKey = (Vec<String>, Prev);

/// Conditional bigram model `P(next | previous token, image attributes)`
/// with add-alpha smoothing, mixed with the uniform distribution at rate
/// epsilon. Token id 0 is the end token; words follow in sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    vocab: Vec<String>,
    index: BTreeMap<String, u32>,
    counts: BTreeMap<ContextKey, Vec<f64>>,
    alpha: f64,
    epsilon: f64,
    seed: u64,
}

impl ToyModel {
    /// Counts bigrams of every reference conditioned on its image's
    /// attributes. With probability epsilon each observed next token is
    /// replaced by a uniformly drawn vocabulary token before counting, and
    /// the smoothed distribution is then mixed with the uniform one:
    /// `P' = (1 - eps) P_smoothed + eps / |V|`.
    ///
    /// One uniform draw and one replacement token are consumed per bigram
    /// whatever epsilon is, so the corrupted bigrams of a lower rate are a
    /// subset of those of a higher rate under the same seed.
    pub fn train(world: &ToyWorld, epsilon: f64, alpha: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Config(format!("epsilon {epsilon} outside [0, 1]")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
        }
        let mut words: Vec<String> = world
            .dataset()
            .images()
            .iter()
            .flat_map(|img| img.references.iter().flatten())
            .map(|t| t.as_str().to_owned())
            .collect();
        words.sort();
        words.dedup();
        let mut vocab = vec![END_TOKEN.to_owned()];
        vocab.extend(words);
        let mut model = ToyModel::empty(vocab, alpha, epsilon, seed);
        let v = model.vocab.len();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (image, entry) in world.images().iter().zip(world.dataset().images()) {
            for reference in &entry.references {
                let mut prev = Prev::Start;
                let targets: Vec<u32> = reference
                    .iter()
                    .map(|t| model.id(t.as_str()).expect("vocab covers references"))
                    .chain(std::iter::once(END))
                    .collect();
                for target in targets {
                    let u: f64 = rng.gen();
                    let replacement = rng.gen_range(0..v as u32);
                    let observed = if u < epsilon { replacement } else { target };
                    let row = model
                        .counts
                        .entry((image.attributes.clone(), prev))
                        .or_insert_with(|| vec![0.0; v]);
                    row[observed as usize] += 1.0;
                    prev = Prev::Token(target);
                }
            }
        }
        Ok(model)
    }

    fn empty(vocab: Vec<String>, alpha: f64, epsilon: f64, seed: u64) -> Self {
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        ToyModel {
            vocab,
            index,
            counts: BTreeMap::new(),
            alpha,
            epsilon,
            seed,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub(crate) fn word(&self, id: u32) -> &str {
        &self.vocab[id as usize]
    }

    /// Next-token distribution for a context; unseen contexts are uniform.
    pub(crate) fn row(&self, attributes: &[String], prev: Prev) -> Vec<f64> {
        let v = self.vocab.len() as f64;
        let uniform = 1.0 / v;
        match self.counts.get(&(attributes.to_vec(), prev)) {
            None => vec![uniform; self.vocab.len()],
            Some(counts) => {
                let total: f64 = counts.iter().sum();
                let denom = total + self.alpha * v;
                counts
                    .iter()
                    .map(|&c| (1.0 - self.epsilon) * (c + self.alpha) / denom + self.epsilon * uniform)
                    .collect()
            }
        }
    }

    /// Distribution after `prev` (`None` for the start of a caption).
    pub fn distribution(&self, attributes: &[String], prev: Option<&str>) -> Result<Vec<(String, f64)>> {
        let prev = match prev {
            None => Prev::Start,
            Some(w) => Prev::Token(self.id(w).ok_or_else(|| Error::OutOfVocabulary(w.to_owned()))?),
        };
        Ok(self
            .row(attributes, prev)
            .into_iter()
            .enumerate()
            .map(|(i, p)| (self.vocab[i].clone(), p))
            .collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, &ModelFile::from(self))?;
        w.write_all(b"\n")
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let parsed: ModelFile =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
                line: e.line(),
                message: e.to_string(),
            })?;
        parsed.into_model()
    }
}

/// Index of the largest probability, lowest id on ties.
pub(crate) fn argmax(row: &[f64]) -> u32 {
    let mut best = 0;
    for (i, &p) in row.iter().enumerate().skip(1) {
        if p > row[best] {
            best = i;
        }
    }
    best as u32
}

#[derive(Serialize, Deserialize)]
struct ContextRow {
    attributes: Vec<String>,
    prev: Option<String>,
    counts: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    vocab: Vec<String>,
    alpha: f64,
    epsilon: f64,
    seed: u64,
    contexts: Vec<ContextRow>,
}

impl From<&ToyModel> for ModelFile {
    fn from(m: &ToyModel) -> Self {
        ModelFile {
            vocab: m.vocab.clone(),
            alpha: m.alpha,
            epsilon: m.epsilon,
            seed: m.seed,
            contexts: m
                .counts
                .iter()
                .map(|((attrs, prev), counts)| ContextRow {
                    attributes: attrs.clone(),
                    prev: match prev {
                        Prev::Start => None,
                        Prev::Token(id) => Some(m.vocab[*id as usize].clone()),
                    },
                    counts: counts.clone(),
                })
                .collect(),
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<ToyModel> {
        if self.vocab.first().map(String::as_str) != Some(END_TOKEN) {
            return Err(Error::Config(format!("model vocab must start with {END_TOKEN}")));
        }
        let mut model = ToyModel::empty(self.vocab, self.alpha, self.epsilon, self.seed);
        for ctx in self.contexts {
            if ctx.counts.len() != model.vocab.len() {
                return Err(Error::Config("context row length differs from vocab size".into()));
            }
            let prev = match ctx.prev {
                None => Prev::Start,
                Some(w) => Prev::Token(model.id(&w).ok_or(Error::OutOfVocabulary(w))?),
            };
            model.counts.insert((ctx.attributes, prev), ctx.counts);
        }
        Ok(model)
    }
}

/// Teacher-forced traces for every reference: at each position the
/// probability of the correct token (end token last) and whether it is the
/// argmax of its distribution. Caption ids are `r00`, `r01`, ...
pub fn emit_traces(model: &ToyModel, world: &ToyWorld) -> Result<Vec<CaptionTrace>> {
    let mut out = Vec::with_capacity(world.dataset().num_references());
    for (image, entry) in world.images().iter().zip(world.dataset().images()) {
        for (r, reference) in entry.references.iter().enumerate() {
            out.push(trace_reference(model, &image.attributes, &image.image_id, r, reference)?);
        }
    }
    Ok(out)
}

fn trace_reference(
    model: &ToyModel,
    attributes: &[String],
    image_id: &str,
    r: usize,
    reference: &[Token],
) -> Result<CaptionTrace> {
    let ids = reference
        .iter()
        .map(|t| model.id(t.as_str()).ok_or_else(|| Error::OutOfVocabulary(t.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut predictions = Vec::with_capacity(ids.len() + 1);
    let mut prev = Prev::Start;
    for target in ids.iter().copied().chain(std::iter::once(END)) {
        let row = model.row(attributes, prev);
        predictions.push(TokenPrediction::new(
            row[target as usize].min(1.0),
            argmax(&row) == target,
        )?);
        prev = Prev::Token(target);
    }
    CaptionTrace::new(image_id, format!("r{r:02}"), reference.to_vec(), predictions)
}

//! Shared domain types: tokens, per-caption probability traces, image entries
//! and datasets, plus the canonical tokenizer.

mod io;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, load_traces, parse_traces, save_dataset, save_traces, write_traces};

/// A canonical token: nonempty, made only of `[a-z0-9']`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Token(String);

impl Token {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.is_empty() {
            return Err(Error::InvalidField {
                field: "token".into(),
                message: "empty token".into(),
            });
        }
        if let Some(c) = text.chars().find(|&c| !is_token_char(c)) {
            return Err(Error::InvalidField {
                field: "token".into(),
                message: format!("`{text}` contains non-canonical character {c:?}"),
            });
        }
        Ok(Token(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Token {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Token::new(value)
    }
}

impl From<Token> for String {
    fn from(t: Token) -> String {
        t.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

fn is_token_char(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit() || c == '\''
}

/// Lowercases, blanks every character outside `[a-z0-9']`, and splits on
/// whitespace. All-punctuation input yields an empty sequence.
pub fn tokenize(text: &str) -> Vec<Token> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .map(|c| if is_token_char(c) { c } else { ' ' })
        .collect();
    cleaned
        .split_whitespace()
        .map(|piece| Token(piece.to_owned()))
        .collect()
}

/// Joins tokens with single spaces.
pub fn join_tokens(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(Token::as_str)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Convenience for tests and toy data: tokenizes each word of a
/// whitespace-separated string.
pub fn tokens(text: &str) -> Vec<Token> {
    tokenize(text)
}

/// The model's view of one reference position: the probability of the
/// correct next token and whether that token was the vocabulary argmax.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenPrediction {
    pub probability: f64,
    pub is_argmax: bool,
}

impl TokenPrediction {
    pub fn new(probability: f64, is_argmax: bool) -> Result<Self> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(Error::InvalidField {
                field: "p_ref".into(),
                message: format!("probability {probability} outside [0, 1]"),
            });
        }
        Ok(TokenPrediction {
            probability,
            is_argmax,
        })
    }
}

/// Teacher-forced predictions for one reference caption. Position `i`
/// (0-based) of `predictions` is the prediction of token `i`, and the last
/// entry is the end token.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptionTrace {
    image_id: String,
    caption_id: String,
    tokens: Vec<Token>,
    predictions: Vec<TokenPrediction>,
}

impl CaptionTrace {
    pub fn new(
        image_id: impl Into<String>,
        caption_id: impl Into<String>,
        tokens: Vec<Token>,
        predictions: Vec<TokenPrediction>,
    ) -> Result<Self> {
        let image_id = image_id.into();
        let caption_id = caption_id.into();
        if tokens.is_empty() {
            return Err(Error::InvalidField {
                field: "tokens".into(),
                message: format!("caption {caption_id} has no tokens"),
            });
        }
        if predictions.len() != tokens.len() + 1 {
            return Err(Error::LengthMismatch {
                image_id,
                caption_id,
                tokens: tokens.len(),
                expected: tokens.len() + 1,
                found: predictions.len(),
            });
        }
        Ok(CaptionTrace {
            image_id,
            caption_id,
            tokens,
            predictions,
        })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn caption_id(&self) -> &str {
        &self.caption_id
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// All `m + 1` predictions, end token last.
    pub fn predictions(&self) -> &[TokenPrediction] {
        &self.predictions
    }

    /// Caption length `m` (without the end token).
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Traces grouped by image, images in ascending id and captions in
/// ascending caption id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceSet {
    by_image: BTreeMap<String, Vec<CaptionTrace>>,
}

impl TraceSet {
    pub fn from_traces(traces: impl IntoIterator<Item = CaptionTrace>) -> Result<Self> {
        let mut by_image: BTreeMap<String, BTreeMap<String, CaptionTrace>> = BTreeMap::new();
        for trace in traces {
            let captions = by_image.entry(trace.image_id.clone()).or_default();
            if captions.contains_key(&trace.caption_id) {
                return Err(Error::DuplicateCaption {
                    image_id: trace.image_id,
                    caption_id: trace.caption_id,
                });
            }
            captions.insert(trace.caption_id.clone(), trace);
        }
        Ok(TraceSet {
            by_image: by_image
                .into_iter()
                .map(|(id, caps)| (id, caps.into_values().collect()))
                .collect(),
        })
    }

    pub fn images(&self) -> impl Iterator<Item = (&str, &[CaptionTrace])> {
        self.by_image
            .iter()
            .map(|(id, caps)| (id.as_str(), caps.as_slice()))
    }

    pub fn image_ids(&self) -> impl Iterator<Item = &str> {
        self.by_image.keys().map(String::as_str)
    }

    pub fn get(&self, image_id: &str) -> Option<&[CaptionTrace]> {
        self.by_image.get(image_id).map(Vec::as_slice)
    }

    pub fn num_images(&self) -> usize {
        self.by_image.len()
    }

    pub fn num_captions(&self) -> usize {
        self.by_image.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_image.is_empty()
    }

    /// All traces in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = &CaptionTrace> {
        self.by_image.values().flatten()
    }

    /// The subset of images listed in `ids`; unknown ids are an error.
    pub fn restrict<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<TraceSet> {
        let mut by_image = BTreeMap::new();
        for id in ids {
            let caps = self
                .by_image
                .get(id)
                .ok_or_else(|| Error::UnknownImage(id.to_owned()))?;
            by_image.insert(id.to_owned(), caps.clone());
        }
        Ok(TraceSet { by_image })
    }
}

/// One image: its reference captions and optionally a generated caption.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageEntry {
    #[serde(rename = "id")]
    pub image_id: String,
    #[serde(rename = "refs")]
    pub references: Vec<Vec<Token>>,
    #[serde(rename = "gen", default, skip_serializing_if = "Option::is_none")]
    pub generated: Option<Vec<Token>>,
}

impl ImageEntry {
    pub fn new(
        image_id: impl Into<String>,
        references: Vec<Vec<Token>>,
        generated: Option<Vec<Token>>,
    ) -> Result<Self> {
        let entry = ImageEntry {
            image_id: image_id.into(),
            references,
            generated,
        };
        entry.validate()?;
        Ok(entry)
    }

    fn validate(&self) -> Result<()> {
        if self.references.is_empty() {
            return Err(Error::InvalidField {
                field: "refs".into(),
                message: format!("image {} has no references", self.image_id),
            });
        }
        if self.references.iter().any(Vec::is_empty) {
            return Err(Error::InvalidField {
                field: "refs".into(),
                message: format!("image {} has an empty reference", self.image_id),
            });
        }
        Ok(())
    }

    pub fn generated(&self) -> Result<&[Token]> {
        self.generated
            .as_deref()
            .ok_or_else(|| Error::MissingGenerated(self.image_id.clone()))
    }
}

/// Images keyed by id, iterated in ascending id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    images: Vec<ImageEntry>,
}

impl Dataset {
    pub fn new(mut images: Vec<ImageEntry>) -> Result<Self> {
        for image in &images {
            image.validate()?;
        }
        images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        if let Some(w) = images.windows(2).find(|w| w[0].image_id == w[1].image_id) {
            return Err(Error::DuplicateImage(w[0].image_id.clone()));
        }
        Ok(Dataset { images })
    }

    pub fn images(&self) -> &[ImageEntry] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&ImageEntry> {
        self.images
            .binary_search_by(|img| img.image_id.as_str().cmp(image_id))
            .ok()
            .map(|i| &self.images[i])
    }

    pub fn num_references(&self) -> usize {
        self.images.iter().map(|i| i.references.len()).sum()
    }

    pub fn restrict<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<Dataset> {
        let wanted: BTreeSet<&str> = ids.into_iter().collect();
        let images: Vec<ImageEntry> = self
            .images
            .iter()
            .filter(|img| wanted.contains(img.image_id.as_str()))
            .cloned()
            .collect();
        if images.len() != wanted.len() {
            let missing = wanted
                .iter()
                .find(|id| self.get(id).is_none())
                .map(|s| s.to_string())
                .unwrap_or_default();
            return Err(Error::UnknownImage(missing));
        }
        Ok(Dataset { images })
    }

    /// Same images with `generated` replaced from `captions`.
    pub fn with_generated(&self, captions: &BTreeMap<String, Vec<Token>>) -> Result<Dataset> {
        let images = self
            .images
            .iter()
            .map(|img| {
                let gen = captions
                    .get(&img.image_id)
                    .ok_or_else(|| Error::MissingGenerated(img.image_id.clone()))?;
                Ok(ImageEntry {
                    generated: Some(gen.clone()),
                    ..img.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { images })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strs(toks: &[Token]) -> Vec<&str> {
        toks.iter().map(Token::as_str).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(strs(&tokenize("A man, riding!")), ["a", "man", "riding"]);
        assert_eq!(strs(&tokenize("dog")), ["dog"]);
        assert_eq!(strs(&tokenize("it's 2 dogs")), ["it's", "2", "dogs"]);
        assert!(tokenize("?!, ...").is_empty());
    }

    #[test]
    fn token_rejects_non_canonical() {
        assert!(Token::new("Dog").is_err());
        assert!(Token::new("").is_err());
        assert!(Token::new("a b").is_err());
        assert!(Token::new("it's").is_ok());
    }

    #[test]
    fn trace_length_invariant() {
        let p = TokenPrediction::new(0.5, true).unwrap();
        let err = CaptionTrace::new("i", "c", tokens("a dog"), vec![p, p]).unwrap_err();
        assert!(err.to_string().contains("length mismatch"), "{err}");
        assert!(err.to_string().contains('c'));
        assert!(CaptionTrace::new("i", "c", tokens("a dog"), vec![p; 3]).is_ok());
    }

    #[test]
    fn trace_set_rejects_duplicates_and_orders() {
        let p = TokenPrediction::new(0.5, true).unwrap();
        let mk = |img: &str, cap: &str| CaptionTrace::new(img, cap, tokens("dog"), vec![p; 2]).unwrap();
        let err = TraceSet::from_traces(vec![mk("a", "1"), mk("a", "1")]).unwrap_err();
        assert!(err.to_string().contains("duplicate caption"));

        let set = TraceSet::from_traces(vec![mk("b", "2"), mk("a", "9"), mk("b", "1")]).unwrap();
        let order: Vec<(&str, &str)> = set.iter().map(|t| (t.image_id(), t.caption_id())).collect();
        assert_eq!(order, [("a", "9"), ("b", "1"), ("b", "2")]);
    }

    #[test]
    fn dataset_sorted_and_unique() {
        let img = |id: &str| ImageEntry::new(id, vec![tokens("a dog")], None).unwrap();
        let ds = Dataset::new(vec![img("b"), img("a")]).unwrap();
        assert_eq!(ds.images()[0].image_id, "a");
        assert!(Dataset::new(vec![img("a"), img("a")]).is_err());
        assert!(ImageEntry::new("x", vec![], None).is_err());
        assert!(ImageEntry::new("x", vec![vec![]], None).is_err());
    }

    proptest! {
        #[test]
        fn tokenizer_is_idempotent(s in "\\PC{0,40}") {
            let once = tokenize(&s);
            let twice = tokenize(&join_tokens(&once));
            prop_assert_eq!(once, twice);
        }
    }
}

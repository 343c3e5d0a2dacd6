//! A synthetic captioning world: images are attribute tuples, references
//! come from templates with synonym variation, and models are conditional
//! bigram tables whose quality is set by a corruption rate.

mod beam;
mod embed;
mod model;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use beam::{beam_search, greedy_decode, normalized_score};
pub use embed::toy_embeddings;
pub use model::{emit_traces, ToyModel, END_TOKEN};

use crate::datamodel::{Dataset, ImageEntry, Token};
use crate::error::{Error, Result};

/// Attribute slots and their concepts; every concept lists its surface
/// forms, the first being the most frequent.
pub(crate) const LEXICON: [&[&[&str]]; 4] = [
    &[
        &["red", "crimson"],
        &["blue", "navy"],
        &["green"],
        &["black", "dark"],
        &["white", "pale"],
        &["brown", "tan"],
    ],
    &[
        &["dog", "puppy"],
        &["cat", "kitten"],
        &["man", "guy"],
        &["woman", "lady"],
        &["bird"],
        &["horse", "pony"],
    ],
    &[
        &["running", "sprinting"],
        &["sitting", "resting"],
        &["jumping", "leaping"],
        &["eating"],
        &["playing"],
    ],
    &[
        &["grass", "lawn"],
        &["beach", "shore"],
        &["street", "road"],
        &["snow"],
    ],
];

const COLOR: usize = 0;
const OBJECT: usize = 1;
const ACTION: usize = 2;
const PLACE: usize = 3;

enum Piece {
    Word(&'static str),
    Slot(usize),
}

use Piece::{Slot, Word};

const TEMPLATES: [&[Piece]; 4] = [
    &[Word("a"), Slot(COLOR), Slot(OBJECT), Word("is"), Slot(ACTION), Word("on"), Word("the"), Slot(PLACE)],
    &[Word("a"), Slot(COLOR), Slot(OBJECT), Slot(ACTION), Word("near"), Word("the"), Slot(PLACE)],
    &[Word("the"), Slot(PLACE), Word("has"), Word("a"), Slot(COLOR), Slot(OBJECT), Slot(ACTION)],
    &[Word("there"), Word("is"), Word("a"), Slot(COLOR), Slot(OBJECT), Slot(ACTION), Word("on"), Word("the"), Slot(PLACE)],
];

/// Probability of using a concept's first surface form.
const MAIN_FORM_PROB: f64 = 0.65;

pub(crate) fn function_words() -> Vec<&'static str> {
    let mut words: Vec<&'static str> = TEMPLATES
        .iter()
        .flat_map(|t| t.iter())
        .filter_map(|p| match p {
            Word(w) => Some(*w),
            Slot(_) => None,
        })
        .collect();
    words.sort_unstable();
    words.dedup();
    words
}

/// An image: an identifier and its attribute symbols.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyImage {
    #[serde(rename = "id")]
    pub image_id: String,
    pub attributes: Vec<String>,
}

/// Images with attributes and their reference captions.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyWorld {
    images: Vec<ToyImage>,
    dataset: Dataset,
}

#[derive(Serialize, Deserialize)]
struct WorldFile {
    images: Vec<ToyImage>,
}

impl ToyWorld {
    /// Builds a world from explicit parts; every dataset image needs
    /// attributes and vice versa.
    pub fn from_parts(mut images: Vec<ToyImage>, dataset: Dataset) -> Result<Self> {
        images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        let ids: Vec<&str> = images.iter().map(|i| i.image_id.as_str()).collect();
        let ds_ids: Vec<&str> = dataset.images().iter().map(|i| i.image_id.as_str()).collect();
        if ids != ds_ids {
            return Err(Error::Config(
                "world images and dataset images differ".into(),
            ));
        }
        Ok(ToyWorld { images, dataset })
    }

    pub fn images(&self) -> &[ToyImage] {
        &self.images
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn image(&self, image_id: &str) -> Option<&ToyImage> {
        self.images
            .binary_search_by(|i| i.image_id.as_str().cmp(image_id))
            .ok()
            .map(|i| &self.images[i])
    }

    /// Saves image attributes only; references live in `dataset.json`.
    pub fn save_attributes(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(
            &mut w,
            &WorldFile {
                images: self.images.clone(),
            },
        )?;
        w.write_all(b"\n")
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(attributes: impl AsRef<Path>, dataset: Dataset) -> Result<Self> {
        let path = attributes.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let parsed: WorldFile =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
                line: e.line(),
                message: e.to_string(),
            })?;
        ToyWorld::from_parts(parsed.images, dataset)
    }
}

fn pick_form(rng: &mut ChaCha8Rng, forms: &[&'static str]) -> &'static str {
    if forms.len() == 1 || rng.gen_bool(MAIN_FORM_PROB) {
        forms[0]
    } else {
        forms[rng.gen_range(1..forms.len())]
    }
}

/// Generates `num_images` images with `refs_per_image` references each.
pub fn gen_world(seed: u64, num_images: usize, refs_per_image: usize) -> Result<ToyWorld> {
    if num_images < 2 {
        return Err(Error::Config("a world needs at least 2 images".into()));
    }
    if refs_per_image == 0 {
        return Err(Error::Config("refs_per_image must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = num_images.to_string().len().max(4);
    let mut images = Vec::with_capacity(num_images);
    let mut entries = Vec::with_capacity(num_images);
    for i in 0..num_images {
        let concepts: Vec<usize> = LEXICON.iter().map(|slot| rng.gen_range(0..slot.len())).collect();
        let image_id = format!("img{i:0width$}");
        let references = (0..refs_per_image)
            .map(|_| {
                let template = TEMPLATES[rng.gen_range(0..TEMPLATES.len())];
                template
                    .iter()
                    .map(|piece| {
                        let word: &str = match piece {
                            Word(w) => w,
                            Slot(s) => pick_form(&mut rng, LEXICON[*s][concepts[*s]]),
                        };
                        Token::new(word).expect("lexicon words are canonical")
                    })
                    .collect()
            })
            .collect();
        images.push(ToyImage {
            image_id: image_id.clone(),
            attributes: concepts
                .iter()
                .zip(LEXICON)
                .map(|(&c, slot)| slot[c][0].to_owned())
                .collect(),
        });
        entries.push(ImageEntry::new(image_id, references, None)?);
    }
    ToyWorld::from_parts(images, Dataset::new(entries)?)
}

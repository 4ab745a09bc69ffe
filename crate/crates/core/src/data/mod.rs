//! Dataset ingestion and binary task assembly: IDX decoding, the EMNIST
//! balanced split, per-task positive/negative sampling, and a procedural
//! glyph generator used when no dataset is available.

mod emnist;
mod idx;
mod synth;
mod task;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use emnist::{load_emnist, load_emnist_dir, write_emnist_dir, EmnistFiles, REQUIRED_CHARS};
pub use idx::{maybe_gunzip, parse_idx, read_idx_file, serialize_idx, IdxTensor, IMAGE_MAGIC, LABEL_MAGIC};
pub use synth::{render_glyph, synthetic_corpus, synthetic_glyphs, GlyphJitter, SYNTH_ALPHABET};
pub use task::{build_task, TaskDataset, TaskSpec, DEFAULT_NEGATIVES};

pub const SIDE: usize = 28;
pub const PIXELS: usize = SIDE * SIDE;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("{what}: expected {expected} bytes, found {actual}")]
    Length {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{}: {inner}", path.display())]
    InFile { path: PathBuf, inner: Box<DataError> },
    #[error("mapping lacks required characters: {0:?}")]
    MissingChars(Vec<char>),
    #[error("character {0:?} is not available")]
    UnknownChar(char),
    #[error("not enough samples of {ch:?} in the {split} split: need {needed}, have {available}")]
    Insufficient {
        ch: char,
        split: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("invalid task spec: {0}")]
    Spec(String),
}

impl DataError {
    fn at(self, path: &Path) -> Self {
        DataError::InFile {
            path: path.to_path_buf(),
            inner: Box::new(self),
        }
    }
}

/// Grayscale 28×28 images with integer class labels.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledImages {
    pixels: Vec<u8>,
    labels: Vec<u32>,
}

impl LabeledImages {
    pub fn new(pixels: Vec<u8>, labels: Vec<u32>) -> Result<Self, DataError> {
        if pixels.len() != labels.len() * PIXELS {
            return Err(DataError::Length {
                what: "pixel buffer",
                expected: labels.len() * PIXELS,
                actual: pixels.len(),
            });
        }
        Ok(Self { pixels, labels })
    }

    /// Pairs an image tensor with a label tensor.
    pub fn from_idx(images: &IdxTensor, labels: &IdxTensor) -> Result<Self, DataError> {
        if images.dims.len() != 3 || images.dims[1] != SIDE || images.dims[2] != SIDE {
            return Err(DataError::Format(format!(
                "expected images of shape (n, 28, 28), found {:?}",
                images.dims
            )));
        }
        if labels.dims.len() != 1 || labels.dims[0] != images.dims[0] {
            return Err(DataError::Format(format!(
                "{} images but label dims {:?}",
                images.dims[0], labels.dims
            )));
        }
        Self::new(
            images.data.clone(),
            labels.data.iter().map(|&l| u32::from(l)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.pixels[i * PIXELS..(i + 1) * PIXELS]
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Pixels scaled to `[0, 1]`.
    pub fn input(&self, i: usize) -> Vec<f64> {
        self.image(i).iter().map(|&p| f64::from(p) / 255.0).collect()
    }

    /// Indices of every sample with the given class, in file order.
    pub fn indices_of(&self, class: u32) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn push(&mut self, image: &[u8], label: u32) {
        assert_eq!(image.len(), PIXELS);
        self.pixels.extend_from_slice(image);
        self.labels.push(label);
    }
}

/// Character ↔ class index table.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CharMap {
    by_char: BTreeMap<char, u32>,
}

impl CharMap {
    pub fn new(entries: impl IntoIterator<Item = (char, u32)>) -> Self {
        Self {
            by_char: entries.into_iter().collect(),
        }
    }

    pub fn class_of(&self, c: char) -> Result<u32, DataError> {
        self.by_char
            .get(&c)
            .copied()
            .ok_or(DataError::UnknownChar(c))
    }

    pub fn char_of(&self, class: u32) -> Option<char> {
        self.by_char
            .iter()
            .find(|(_, &v)| v == class)
            .map(|(&c, _)| c)
    }

    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        self.by_char.keys().copied()
    }

    pub fn missing(&self, required: &[char]) -> Vec<char> {
        required
            .iter()
            .copied()
            .filter(|c| !self.by_char.contains_key(c))
            .collect()
    }
}

/// A train split, a test split, and the class table shared by both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub train: LabeledImages,
    pub test: LabeledImages,
    pub classes: CharMap,
}

use std::fs;
use std::path::{Path, PathBuf};

use super::{read_idx_file, serialize_idx, CharMap, Corpus, DataError, IdxTensor, LabeledImages, PIXELS, SIDE};

/// Characters every experiment needs.
pub const REQUIRED_CHARS: [char; 10] = ['0', '1', '2', '3', 'O', 'Z', 'P', 'Q', 'R', 'S'];

const PREFIX: &str = "emnist-balanced";

/// Resolved paths of the balanced-split files inside a directory. Each IDX
/// file may be plain or carry a `.gz` suffix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmnistFiles {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    pub mapping: PathBuf,
}

fn find(dir: &Path, stem: &str) -> Result<PathBuf, DataError> {
    let plain = dir.join(stem);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{stem}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(DataError::Io {
        path: plain,
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found (plain or .gz)"),
    })
}

impl EmnistFiles {
    pub fn locate(dir: &Path) -> Result<Self, DataError> {
        Ok(Self {
            train_images: find(dir, &format!("{PREFIX}-train-images-idx3-ubyte"))?,
            train_labels: find(dir, &format!("{PREFIX}-train-labels-idx1-ubyte"))?,
            test_images: find(dir, &format!("{PREFIX}-test-images-idx3-ubyte"))?,
            test_labels: find(dir, &format!("{PREFIX}-test-labels-idx1-ubyte"))?,
            mapping: find(dir, &format!("{PREFIX}-mapping.txt"))?,
        })
    }
}

fn parse_mapping(text: &str) -> Result<CharMap, DataError> {
    let mut entries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || DataError::Format(format!("mapping line {}: {line:?}", n + 1));
        let mut parts = line.split_whitespace();
        let class: u32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let code: u32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let ch = char::from_u32(code).ok_or_else(bad)?;
        entries.push((ch, class));
    }
    Ok(CharMap::new(entries))
}

/// Stored EMNIST images are transposed; flip them upright.
fn transpose_all(images: &mut LabeledImages) {
    let mut pixels = images.pixels().to_vec();
    for img in pixels.chunks_exact_mut(PIXELS) {
        for r in 0..SIDE {
            for c in r + 1..SIDE {
                img.swap(r * SIDE + c, c * SIDE + r);
            }
        }
    }
    *images = LabeledImages::new(pixels, images.labels().to_vec())
        .expect("transpose preserves sizes");
}

/// Loads one split plus the mapping table.
pub fn load_emnist(
    image_path: &Path,
    label_path: &Path,
    mapping_path: &Path,
) -> Result<(LabeledImages, CharMap), DataError> {
    let text = fs::read_to_string(mapping_path).map_err(|source| DataError::Io {
        path: mapping_path.to_path_buf(),
        source,
    })?;
    let classes = parse_mapping(&text)?;
    let missing = classes.missing(&REQUIRED_CHARS);
    if !missing.is_empty() {
        return Err(DataError::MissingChars(missing));
    }
    let imgs = read_idx_file(image_path)?;
    let labels = read_idx_file(label_path)?;
    let mut images = LabeledImages::from_idx(&imgs, &labels)?;
    transpose_all(&mut images);
    Ok((images, classes))
}

pub fn load_emnist_dir(dir: &Path) -> Result<Corpus, DataError> {
    let files = EmnistFiles::locate(dir)?;
    let (train, classes) = load_emnist(&files.train_images, &files.train_labels, &files.mapping)?;
    let (test, _) = load_emnist(&files.test_images, &files.test_labels, &files.mapping)?;
    Ok(Corpus {
        train,
        test,
        classes,
    })
}

fn write_file(path: PathBuf, bytes: &[u8]) -> Result<(), DataError> {
    fs::write(&path, bytes).map_err(|source| DataError::Io { path, source })
}

/// Writes `corpus` in the balanced-split layout [`load_emnist_dir`] reads,
/// plain (not gzipped) and in the stored (transposed) orientation.
pub fn write_emnist_dir(corpus: &Corpus, dir: &Path) -> Result<EmnistFiles, DataError> {
    fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let files = EmnistFiles {
        train_images: dir.join(format!("{PREFIX}-train-images-idx3-ubyte")),
        train_labels: dir.join(format!("{PREFIX}-train-labels-idx1-ubyte")),
        test_images: dir.join(format!("{PREFIX}-test-images-idx3-ubyte")),
        test_labels: dir.join(format!("{PREFIX}-test-labels-idx1-ubyte")),
        mapping: dir.join(format!("{PREFIX}-mapping.txt")),
    };
    for (split, img_path, lbl_path) in [
        (&corpus.train, &files.train_images, &files.train_labels),
        (&corpus.test, &files.test_images, &files.test_labels),
    ] {
        let mut stored = split.clone();
        transpose_all(&mut stored);
        let n = stored.len();
        let images = IdxTensor {
            dims: vec![n, SIDE, SIDE],
            data: stored.pixels().to_vec(),
        };
        let labels = IdxTensor {
            dims: vec![n],
            data: stored
                .labels()
                .iter()
                .map(|&l| u8::try_from(l).map_err(|_| DataError::Format(format!("label {l} exceeds a byte"))))
                .collect::<Result<_, _>>()?,
        };
        write_file(img_path.clone(), &serialize_idx(&images))?;
        write_file(lbl_path.clone(), &serialize_idx(&labels))?;
    }
    let mut mapping = String::new();
    let mut rows: Vec<(u32, char)> = corpus
        .classes
        .chars()
        .map(|c| corpus.classes.class_of(c).map(|k| (k, c)))
        .collect::<Result<_, _>>()?;
    rows.sort_unstable();
    for (k, c) in rows {
        mapping.push_str(&format!("{k} {}\n", c as u32));
    }
    write_file(files.mapping.clone(), mapping.as_bytes())?;
    Ok(files)
}

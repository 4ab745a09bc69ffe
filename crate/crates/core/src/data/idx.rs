use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::DataError;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Raw unsigned-byte IDX tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxTensor {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxTensor {
    pub fn magic(&self) -> u32 {
        0x0000_0800 | self.dims.len() as u32
    }
}

/// Decodes an IDX byte stream. Only unsigned-byte label (`0x801`) and image
/// (`0x803`) files are accepted.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxTensor, DataError> {
    if bytes.len() < 4 {
        return Err(DataError::Length {
            what: "idx header",
            expected: 4,
            actual: bytes.len(),
        });
    }
    let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    let ndims = match magic {
        IMAGE_MAGIC => 3,
        LABEL_MAGIC => 1,
        other => return Err(DataError::Format(format!("unexpected idx magic {other:#010x}"))),
    };
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(DataError::Length {
            what: "idx dimensions",
            expected: header,
            actual: bytes.len(),
        });
    }
    let dims: Vec<usize> = (0..ndims)
        .map(|d| {
            let o = 4 + 4 * d;
            u32::from_be_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize
        })
        .collect();
    let payload: usize = dims.iter().product();
    let actual = bytes.len() - header;
    if actual != payload {
        return Err(DataError::Length {
            what: "idx payload",
            expected: payload,
            actual,
        });
    }
    Ok(IdxTensor {
        dims,
        data: bytes[header..].to_vec(),
    })
}

pub fn serialize_idx(t: &IdxTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * t.dims.len() + t.data.len());
    out.extend_from_slice(&t.magic().to_be_bytes());
    for &d in &t.dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(&t.data);
    out
}

/// Inflates gzip data (detected by its magic); other bytes pass through.
pub fn maybe_gunzip(bytes: Vec<u8>) -> Result<Vec<u8>, DataError> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(bytes.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| DataError::Format(format!("gzip: {e}")))?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

pub fn read_idx_file(path: &Path) -> Result<IdxTensor, DataError> {
    let bytes = fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_idx(&maybe_gunzip(bytes)?).map_err(|e| e.at(path))
}

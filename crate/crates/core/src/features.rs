//! Flat binary feature files.
//!
//! Layout: a 16-byte header of four little-endian `u32` values
//! `magic | version | rows | dim`, followed by `rows * dim` little-endian
//! `f32` values in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// `b"CTFS"` read as a little-endian `u32`.
pub const FEATURE_MAGIC: u32 = u32::from_le_bytes(*b"CTFS");
pub const FEATURE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    data: Vec<f32>,
}

impl FeatureStore {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::FeatureFormat("feature dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::FeatureFormat(format!(
                "{} values is not a multiple of dim {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::FeatureFormat("ragged rows".into()));
        }
        Self::new(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, index: usize) -> &[f32] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn get(&self, index: usize) -> Option<&[f32]> {
        (index < self.rows()).then(|| self.row(index))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let rows = u32::try_from(self.rows()).expect("row count fits in u32");
        let dim = u32::try_from(self.dim).expect("dim fits in u32");
        for v in [FEATURE_MAGIC, FEATURE_VERSION, rows, dim] {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)
            .map_err(|e| Error::FeatureFormat(format!("short header: {e}")))?;
        let word = |i: usize| u32::from_le_bytes(header[i * 4..i * 4 + 4].try_into().unwrap());
        if word(0) != FEATURE_MAGIC {
            return Err(Error::FeatureFormat(format!("bad magic {:#010x}", word(0))));
        }
        if word(1) != FEATURE_VERSION {
            return Err(Error::FeatureFormat(format!("unsupported version {}", word(1))));
        }
        let rows = word(2) as usize;
        let dim = word(3) as usize;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| Error::FeatureFormat(e.to_string()))?;
        if bytes.len() != rows * dim * 4 {
            return Err(Error::FeatureFormat(format!(
                "expected {} payload bytes for {rows}x{dim}, found {}",
                rows * dim * 4,
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(dim, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_fixed() {
        let store = FeatureStore::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.25]]).unwrap();
        let mut bytes = Vec::new();
        store.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 16 + 4 * 4);
        assert_eq!(&bytes[0..4], b"CTFS");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
        let back = FeatureStore::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, store);
        assert_eq!(back.row(1), &[0.5, 3.25]);
    }

    #[test]
    fn rejects_truncated_payload_and_bad_magic() {
        let store = FeatureStore::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let mut bytes = Vec::new();
        store.write_to(&mut bytes).unwrap();
        assert!(FeatureStore::read_from(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(FeatureStore::read_from(bytes.as_slice()).is_err());
    }
}

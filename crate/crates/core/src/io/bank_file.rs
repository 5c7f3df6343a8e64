//! Binary feature-bank files.
//!
//! Layout (little-endian): magic `SFBANK1\0`, layer count `u32`, then for each
//! layer `out u32`, `in u32`, `out*in*9` weights and `out` biases as `f32`.

use std::fs;
use std::path::Path;

use super::IoError;
use crate::perception::{BankProvenance, ConvLayer, FeatureBank};

pub const BANK_MAGIC: &[u8; 8] = b"SFBANK1\0";

pub fn encode_bank(bank: &FeatureBank) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(BANK_MAGIC);
    out.extend_from_slice(&(bank.layers().len() as u32).to_le_bytes());
    for layer in bank.layers() {
        out.extend_from_slice(&(layer.out_channels as u32).to_le_bytes());
        out.extend_from_slice(&(layer.in_channels as u32).to_le_bytes());
        for v in layer.weights.iter().chain(&layer.bias) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], IoError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                IoError::MalformedBank(format!(
                    "truncated: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, IoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f64>, IoError> {
        let bytes = self.take(
            count
                .checked_mul(4)
                .ok_or_else(|| IoError::MalformedBank("size overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect())
    }
}

pub fn decode_bank(bytes: &[u8]) -> Result<FeatureBank, IoError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8).ok() != Some(BANK_MAGIC.as_slice()) {
        return Err(IoError::MalformedBank("bad magic bytes".into()));
    }
    let count = cur.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let out_channels = cur.u32()? as usize;
        let in_channels = cur.u32()? as usize;
        let weights = cur.f32s(out_channels * in_channels * 9)?;
        let bias = cur.f32s(out_channels)?;
        layers.push(ConvLayer {
            out_channels,
            in_channels,
            weights,
            bias,
        });
    }
    if cur.pos != bytes.len() {
        return Err(IoError::MalformedBank(format!(
            "{} trailing bytes after the declared layers",
            bytes.len() - cur.pos
        )));
    }
    Ok(FeatureBank::new(layers, BankProvenance::Loaded)?)
}

pub fn save_bank(bank: &FeatureBank, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    fs::write(path, encode_bank(bank)).map_err(|e| IoError::write(path, e))
}

pub fn load_bank(path: impl AsRef<Path>) -> Result<FeatureBank, IoError> {
    let path = path.as_ref();
    decode_bank(&fs::read(path).map_err(|e| IoError::open(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{generate_bank, DEFAULT_LAYER_PLAN};

    #[test]
    fn generated_bank_round_trips_exactly() {
        let bank = generate_bank(11, &DEFAULT_LAYER_PLAN).unwrap();
        let back = decode_bank(&encode_bank(&bank)).unwrap();
        assert_eq!(back.layers(), bank.layers());
        assert_eq!(back.provenance(), BankProvenance::Loaded);
    }

    #[test]
    fn byte_layout() {
        let bank = generate_bank(0, &[2]).unwrap();
        let bytes = encode_bank(&bank);
        assert_eq!(&bytes[..8], b"SFBANK1\0");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &3u32.to_le_bytes());
        assert_eq!(bytes.len(), 20 + 4 * (2 * 3 * 9 + 2));
        let w0 = f32::from_le_bytes(bytes[20..24].try_into().unwrap());
        assert_eq!(f64::from(w0), bank.layers()[0].weights[0]);
    }

    #[test]
    fn size_mismatches_rejected() {
        let bytes = encode_bank(&generate_bank(0, &[2, 4]).unwrap());
        assert!(matches!(
            decode_bank(&bytes[..bytes.len() - 1]),
            Err(IoError::MalformedBank(_))
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_bank(&long), Err(IoError::MalformedBank(_))));
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode_bank(&bad_magic), Err(IoError::MalformedBank(_))));
        // second layer declares 5 inputs after a 2-output layer
        let mut chain = bytes;
        let off = 12 + 8 + 4 * (2 * 3 * 9 + 2) + 4;
        chain[off..off + 4].copy_from_slice(&5u32.to_le_bytes());
        assert!(decode_bank(&chain).is_err());
    }
}

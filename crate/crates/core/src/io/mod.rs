//! File formats: PNG images, stroke JSON, SVG export, bank files, loss CSV and
//! run manifests.

mod bank_file;
mod loss_csv;
mod manifest;
mod png_io;
mod strokes;
mod svg;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::perception::PerceptionError;

pub use bank_file::{decode_bank, encode_bank, load_bank, save_bank, BANK_MAGIC};
pub use loss_csv::{read_loss_csv, write_loss_csv, LOSS_CSV_HEADER};
pub use manifest::{load_manifest, save_manifest, BankSource, RunManifest, RunMode, MANIFEST_VERSION};
pub use png_io::{load_png, save_png, to_rgb8};
pub use strokes::{load_strokes, save_strokes, StrokeDocument, StrokeRecord, STROKE_FORMAT_VERSION};
pub use svg::{export_svg, hex_color, svg_document};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: file not found", path.display())]
    NotFound { path: PathBuf },
    #[error("{}: cannot read: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{}: cannot write: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{}: malformed PNG: {reason}", path.display())]
    MalformedPng { path: PathBuf, reason: String },
    #[error("{}: unsupported PNG bit depth {depth} (need 8)", path.display())]
    UnsupportedBitDepth { path: PathBuf, depth: u8 },
    #[error("{}: unsupported PNG color type {color_type} (need RGB or RGBA)", path.display())]
    UnsupportedColorType { path: PathBuf, color_type: String },
    #[error("{}: malformed document: {reason}", path.display())]
    MalformedText { path: PathBuf, reason: String },
    #[error("format version {found} is not supported (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("malformed bank file: {0}")]
    MalformedBank(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}

impl IoError {
    fn open(path: &Path, source: std::io::Error) -> Self {
        if source.kind() == std::io::ErrorKind::NotFound {
            IoError::NotFound {
                path: path.to_path_buf(),
            }
        } else {
            IoError::Read {
                path: path.to_path_buf(),
                source,
            }
        }
    }

    fn write(path: &Path, source: std::io::Error) -> Self {
        IoError::Write {
            path: path.to_path_buf(),
            source,
        }
    }

    fn malformed_png(path: &Path, err: png::DecodingError) -> Self {
        match err {
            png::DecodingError::IoError(e) if e.kind() != std::io::ErrorKind::UnexpectedEof => Self::open(path, e),
            other => IoError::MalformedPng {
                path: path.to_path_buf(),
                reason: other.to_string(),
            },
        }
    }

    fn encode(path: &Path, err: png::EncodingError) -> Self {
        match err {
            png::EncodingError::IoError(e) => Self::write(path, e),
            other => IoError::Invalid(format!("{}: {other}", path.display())),
        }
    }
}

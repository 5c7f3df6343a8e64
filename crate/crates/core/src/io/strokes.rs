//! Versioned JSON stroke documents.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::geometry::{GeometryError, Point2, Stroke, StrokeField};

pub const STROKE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrokeRecord {
    pub location: [f64; 2],
    pub offsets: [[f64; 2]; 3],
    pub width: f64,
    pub color: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrokeDocument {
    pub version: u32,
    pub height: usize,
    pub width: usize,
    pub background: [f64; 3],
    pub strokes: Vec<StrokeRecord>,
}

impl StrokeDocument {
    pub fn from_field(field: &StrokeField, background: [f64; 3]) -> Self {
        Self {
            version: STROKE_FORMAT_VERSION,
            height: field.height(),
            width: field.width(),
            background,
            strokes: field
                .strokes()
                .iter()
                .map(|s| StrokeRecord {
                    location: [s.location.x, s.location.y],
                    offsets: s.offsets.map(|p| [p.x, p.y]),
                    width: s.width,
                    color: s.color,
                })
                .collect(),
        }
    }

    /// Validates and converts to a field; stroke errors name the stroke index.
    pub fn to_field(&self) -> Result<StrokeField, IoError> {
        if self.version != STROKE_FORMAT_VERSION {
            return Err(IoError::VersionMismatch {
                expected: STROKE_FORMAT_VERSION,
                found: self.version,
            });
        }
        if !self.background.iter().all(|c| (0.0..=1.0).contains(c)) {
            return Err(IoError::Invalid(format!(
                "background {:?} outside [0, 1]",
                self.background
            )));
        }
        let strokes = self
            .strokes
            .iter()
            .enumerate()
            .map(|(index, r)| {
                Stroke::new(
                    Point2::new(r.location[0], r.location[1]),
                    r.offsets.map(|[x, y]| Point2::new(x, y)),
                    r.width,
                    r.color,
                )
                .map_err(|e| GeometryError::InvalidStroke {
                    index,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(StrokeField::new(strokes, self.height, self.width)?)
    }
}

pub fn save_strokes(field: &StrokeField, background: [f64; 3], path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&StrokeDocument::from_field(field, background))
        .map_err(|e| IoError::Invalid(e.to_string()))?;
    fs::write(path, text).map_err(|e| IoError::write(path, e))
}

/// Loads a field and its background color.
pub fn load_strokes(path: impl AsRef<Path>) -> Result<(StrokeField, [f64; 3]), IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| IoError::open(path, e))?;
    let doc: StrokeDocument = serde_json::from_str(&text).map_err(|e| IoError::MalformedText {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok((doc.to_field()?, doc.background))
}

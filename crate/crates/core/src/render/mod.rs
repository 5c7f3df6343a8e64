//! Stroke rasterization.
//!
//! A pixel is colored by the strokes whose sampled spines are closest to it.
//! [`render_hard`] is the discontinuous nearest-stroke renderer, [`render_soft`]
//! replaces the width test by a sigmoid and the nearest-stroke assignment by a
//! softmax over negative distances, and [`render_vjp`] is its exact backward pass.
//!
//! Every pixel only considers the `K` strokes nearest to the center of its tile
//! (see [`knn_candidates`]).

mod disk;
mod distance;
mod hard;
mod knn;
mod soft;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use disk::{disk_distance_map, render_disks_hard, Disk, DistanceMap};
pub use distance::{sample_field, stroke_distance};
pub use hard::render_hard;
pub use knn::{knn_candidates, Tile, TileCandidates, TileGrid};
pub use soft::{render_soft, render_vjp, AssignmentTensor, RenderTape, StrokeGrads, TapeEntry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("invalid render config: {0}")]
    InvalidConfig(String),
    #[error("render tape does not belong to this field/config")]
    TapeMismatch,
    #[error("upstream gradient has {actual} values, expected {expected}")]
    UpstreamShape { expected: usize, actual: usize },
}

/// Knobs of the soft renderer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderConfig {
    /// Spine samples per stroke (`S`).
    pub samples_per_curve: usize,
    /// Candidate strokes per tile (`K`).
    pub knn: usize,
    /// Sigmoid slope of the coverage mask, per pixel.
    pub mask_sharpness: f64,
    /// Softmax slope of the assignment, per pixel.
    pub assign_sharpness: f64,
    pub background: [f64; 3],
    /// Side of the square pruning tiles; edge tiles are clipped.
    pub tile_size: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            samples_per_curve: 10,
            knn: 20,
            mask_sharpness: 5.0,
            assign_sharpness: 2.0,
            background: [1.0; 3],
            tile_size: 16,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        let bad = |m: String| Err(RenderError::InvalidConfig(m));
        if self.samples_per_curve < 2 {
            return bad(format!(
                "samples_per_curve must be >= 2, got {}",
                self.samples_per_curve
            ));
        }
        if self.knn == 0 {
            return bad("knn must be >= 1".into());
        }
        if self.tile_size == 0 {
            return bad("tile_size must be >= 1".into());
        }
        for (name, v) in [
            ("mask_sharpness", self.mask_sharpness),
            ("assign_sharpness", self.assign_sharpness),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !self.background.iter().all(|c| (0.0..=1.0).contains(c)) {
            return bad(format!("background {:?} outside [0, 1]", self.background));
        }
        Ok(())
    }

    /// Same config with both sharpness constants multiplied by `factor`.
    pub fn sharpened(&self, factor: f64) -> Self {
        Self {
            mask_sharpness: self.mask_sharpness * factor,
            assign_sharpness: self.assign_sharpness * factor,
            ..*self
        }
    }
}

/// Logistic function, stable for arguments of either sign.
#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

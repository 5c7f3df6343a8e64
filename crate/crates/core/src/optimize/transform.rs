//! Unconstrained latent parameters and their smooth maps onto valid strokes.
//!
//! Per stroke row: location and offsets pass through, `width = softplus(z) + WIDTH_FLOOR`,
//! `color = sigmoid(z)` per channel.

use crate::geometry::{param, GeometryError, Stroke, StrokeField, PARAMS_PER_STROKE};
use crate::render::StrokeGrads;

use super::OptimizeError;

/// Smallest width any latent value can produce, in pixels.
pub const WIDTH_FLOOR: f64 = 0.25;

/// Latent color logits are clamped to this magnitude when inverting exact 0/1 colors.
const MAX_COLOR_LOGIT: f64 = 36.0;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    crate::render::sigmoid(x)
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for `y > 0`.
#[inline]
pub fn softplus_inv(y: f64) -> f64 {
    if y > 20.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// N x 12 unconstrained parameters: location (2), offsets (6), width latent, color latents (3).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentParams {
    pub rows: Vec<[f64; PARAMS_PER_STROKE]>,
}

impl LatentParams {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn as_flat(&self) -> &[f64] {
        self.rows.as_flattened()
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        self.rows.as_flattened_mut()
    }
}

pub fn to_field(latent: &LatentParams, height: usize, width: usize) -> Result<StrokeField, OptimizeError> {
    let rows: Vec<[f64; PARAMS_PER_STROKE]> = latent
        .rows
        .iter()
        .enumerate()
        .map(|(index, z)| {
            if let Some(coordinate) = z.iter().position(|v| !v.is_finite()) {
                return Err(OptimizeError::NonFiniteParameter {
                    stroke: index,
                    coordinate,
                });
            }
            let mut p = *z;
            p[param::WIDTH] = softplus(z[param::WIDTH]) + WIDTH_FLOOR;
            for c in 0..3 {
                p[param::COLOR + c] = sigmoid(z[param::COLOR + c]);
            }
            Ok(p)
        })
        .collect::<Result<_, _>>()?;
    Ok(StrokeField::from_params(&rows, height, width)?)
}

/// Latent preimage of a field. Widths at or below the floor and colors at
/// exactly 0 or 1 map to large finite latents.
pub fn from_field(field: &StrokeField) -> LatentParams {
    LatentParams {
        rows: field.strokes().iter().map(latent_of).collect(),
    }
}

fn latent_of(stroke: &Stroke) -> [f64; PARAMS_PER_STROKE] {
    let mut z = stroke.to_params();
    let excess = (stroke.width - WIDTH_FLOOR).max(1e-300);
    z[param::WIDTH] = softplus_inv(excess);
    for c in 0..3 {
        z[param::COLOR + c] = logit(stroke.color[c]).clamp(-MAX_COLOR_LOGIT, MAX_COLOR_LOGIT);
    }
    z
}

/// Chains field-space gradients through the latent transforms.
pub fn chain_gradients(latent: &LatentParams, field_grads: &StrokeGrads) -> StrokeGrads {
    latent
        .rows
        .iter()
        .zip(field_grads)
        .map(|(z, g)| {
            let mut out = *g;
            out[param::WIDTH] *= sigmoid(z[param::WIDTH]);
            for c in param::COLOR..param::COLOR + 3 {
                let s = sigmoid(z[c]);
                out[c] *= s * (1.0 - s);
            }
            out
        })
        .collect()
}

impl From<GeometryError> for OptimizeError {
    fn from(e: GeometryError) -> Self {
        OptimizeError::Geometry(e)
    }
}

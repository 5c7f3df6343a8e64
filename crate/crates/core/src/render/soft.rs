//! Soft renderer and its vector-Jacobian product.
//!
//! For a pixel `p` with candidate strokes `n`:
//!
//! ```text
//! d_n = min_s |p - q_{n,s}|                     spine distance over samples
//! c_n = sigmoid(mask_sharpness * (width_n - d_n))   coverage
//! a_n = softmax_n(-assign_sharpness * d_n)          assignment
//! out = sum_n a_n c_n color_n + (1 - sum_n a_n c_n) * background
//! ```
//!
//! The sample `s` achieving the minimum is recorded on the tape; gradients flow
//! through that sample only. Candidate selection is treated as constant.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;

use super::distance::nearest_squared;
use super::knn::{candidates_for_grid, Tile, TileGrid};
use super::{sample_field, sigmoid, RenderConfig, RenderError};
use crate::geometry::{bernstein, param, sample_parameter, Point2, StrokeField, PARAMS_PER_STROKE};
use crate::image::{Canvas, Image};

/// Gradient rows, one `[f64; 12]` per stroke in field order.
pub type StrokeGrads = Vec<[f64; PARAMS_PER_STROKE]>;

/// Forward-pass record for one (pixel, candidate stroke) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapeEntry {
    /// Index of the nearest spine sample.
    pub sample: u32,
    pub distance: f64,
    pub coverage: f64,
    pub assignment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TileTape {
    pub tile: Tile,
    pub candidates: Vec<usize>,
    /// `pixel_count x candidates.len()` entries, pixels row-major within the tile.
    pub entries: Vec<TapeEntry>,
}

/// Everything [`render_vjp`] needs from the forward pass.
#[derive(Debug, Clone)]
pub struct RenderTape {
    height: usize,
    width: usize,
    stroke_count: usize,
    fingerprint: u64,
    samples: Vec<Point2>,
    tiles: Vec<TileTape>,
    grid: TileGrid,
}

/// Per-pixel soft assignment weights over the pixel's candidate strokes.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentTensor {
    pub candidates: Vec<usize>,
    pub weights: Vec<f64>,
}

impl RenderTape {
    pub fn stroke_count(&self) -> usize {
        self.stroke_count
    }

    /// Candidate strokes and tape entries for pixel `(row, col)`.
    pub fn pixel_entries(&self, row: usize, col: usize) -> (&[usize], &[TapeEntry]) {
        let tt = &self.tiles[self.grid.tile_index_of(row, col)];
        let k = tt.candidates.len();
        let local = (row - tt.tile.row0) * tt.tile.cols() + (col - tt.tile.col0);
        (&tt.candidates, &tt.entries[local * k..(local + 1) * k])
    }

    pub fn assignment(&self, row: usize, col: usize) -> AssignmentTensor {
        let (candidates, entries) = self.pixel_entries(row, col);
        AssignmentTensor {
            candidates: candidates.to_vec(),
            weights: entries.iter().map(|e| e.assignment).collect(),
        }
    }

    /// Recomposes the forward output from the recorded weights.
    pub fn replay(&self, field: &StrokeField, config: &RenderConfig) -> Result<Canvas, RenderError> {
        self.check(field, config)?;
        let mut canvas =
            Image::filled(self.height, self.width, config.background).expect("tape dimensions come from a valid field");
        let strokes = field.strokes();
        for tt in &self.tiles {
            let k = tt.candidates.len();
            if k == 0 {
                continue;
            }
            let t = tt.tile;
            for (local, chunk) in tt.entries.chunks_exact(k).enumerate() {
                let weights: Vec<(f64, [f64; 3])> = chunk
                    .iter()
                    .zip(&tt.candidates)
                    .map(|(e, &n)| (e.assignment * e.coverage, strokes[n].color))
                    .collect();
                let (i, j) = (t.row0 + local / t.cols(), t.col0 + local % t.cols());
                canvas.set(i, j, composite(&weights, config.background));
            }
        }
        Ok(canvas)
    }

    fn check(&self, field: &StrokeField, config: &RenderConfig) -> Result<(), RenderError> {
        if self.height != field.height()
            || self.width != field.width()
            || self.stroke_count != field.len()
            || self.fingerprint != fingerprint(field, config)
        {
            return Err(RenderError::TapeMismatch);
        }
        Ok(())
    }
}

fn fingerprint(field: &StrokeField, config: &RenderConfig) -> u64 {
    let mut h = DefaultHasher::new();
    field.height().hash(&mut h);
    field.width().hash(&mut h);
    for row in field.to_params() {
        for v in row {
            v.to_bits().hash(&mut h);
        }
    }
    config.samples_per_curve.hash(&mut h);
    config.knn.hash(&mut h);
    config.tile_size.hash(&mut h);
    config.mask_sharpness.to_bits().hash(&mut h);
    config.assign_sharpness.to_bits().hash(&mut h);
    for c in config.background {
        c.to_bits().hash(&mut h);
    }
    h.finish()
}

#[inline]
fn composite(weights: &[(f64, [f64; 3])], background: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    let mut covered = 0.0;
    for (w, color) in weights {
        covered += w;
        for c in 0..3 {
            out[c] += w * color[c];
        }
    }
    for c in 0..3 {
        out[c] += (1.0 - covered) * background[c];
    }
    out
}

/// Soft render of `field`, returning the canvas and the tape for [`render_vjp`].
pub fn render_soft(field: &StrokeField, config: &RenderConfig) -> Result<(Canvas, RenderTape), RenderError> {
    config.validate()?;
    let s = config.samples_per_curve;
    let samples = sample_field(field, s);
    let grid = TileGrid::new(field.height(), field.width(), config.tile_size);
    let candidates = candidates_for_grid(&grid, &samples, config);
    let strokes = field.strokes();
    let (gm, ga) = (config.mask_sharpness, config.assign_sharpness);

    let tiles: Vec<(TileTape, Vec<[f64; 3]>)> = candidates
        .into_par_iter()
        .map(|tc| {
            let t = tc.tile;
            let k = tc.strokes.len();
            let mut entries = Vec::with_capacity(t.pixel_count() * k);
            let mut block = Vec::with_capacity(t.pixel_count());
            let mut weights = Vec::with_capacity(k);
            for i in t.row0..t.row1 {
                for j in t.col0..t.col1 {
                    let p = Point2::pixel_center(i, j);
                    let first = entries.len();
                    let mut max_logit = f64::NEG_INFINITY;
                    for &n in &tc.strokes {
                        let (dsq, sample) = nearest_squared(&samples[n * s..(n + 1) * s], p);
                        let distance = dsq.sqrt();
                        max_logit = max_logit.max(-ga * distance);
                        entries.push(TapeEntry {
                            sample: sample as u32,
                            distance,
                            coverage: sigmoid(gm * (strokes[n].width - distance)),
                            assignment: 0.0,
                        });
                    }
                    let pixel = &mut entries[first..];
                    let mut total = 0.0;
                    for e in pixel.iter_mut() {
                        e.assignment = (-ga * e.distance - max_logit).exp();
                        total += e.assignment;
                    }
                    weights.clear();
                    for (e, &n) in pixel.iter_mut().zip(&tc.strokes) {
                        e.assignment /= total;
                        weights.push((e.assignment * e.coverage, strokes[n].color));
                    }
                    block.push(composite(&weights, config.background));
                }
            }
            (
                TileTape {
                    tile: t,
                    candidates: tc.strokes,
                    entries,
                },
                block,
            )
        })
        .collect();

    let mut canvas =
        Image::filled(field.height(), field.width(), config.background).expect("field dimensions are validated");
    let mut tapes = Vec::with_capacity(tiles.len());
    for (tt, block) in tiles {
        let t = tt.tile;
        for (local, rgb) in block.into_iter().enumerate() {
            canvas.set(t.row0 + local / t.cols(), t.col0 + local % t.cols(), rgb);
        }
        tapes.push(tt);
    }

    let tape = RenderTape {
        height: field.height(),
        width: field.width(),
        stroke_count: field.len(),
        fingerprint: fingerprint(field, config),
        samples,
        tiles: tapes,
        grid,
    };
    Ok((canvas, tape))
}

/// Gradient of `sum(upstream * render_soft(field))` with respect to every
/// stroke's 12 parameters (location, offsets, width, color).
///
/// `upstream` is laid out like an [`Image`] buffer: `height x width x 3`.
pub fn render_vjp(
    field: &StrokeField,
    config: &RenderConfig,
    tape: &RenderTape,
    upstream: &[f64],
) -> Result<StrokeGrads, RenderError> {
    tape.check(field, config)?;
    let expected = field.height() * field.width() * 3;
    if upstream.len() != expected {
        return Err(RenderError::UpstreamShape {
            expected,
            actual: upstream.len(),
        });
    }
    let s = config.samples_per_curve;
    let basis: Vec<[f64; 3]> = (0..s).map(|k| bernstein(sample_parameter(k, s))).collect();
    let strokes = field.strokes();
    let (gm, ga) = (config.mask_sharpness, config.assign_sharpness);
    let bg = config.background;
    let w = field.width();

    // Per-tile partial gradients indexed by candidate slot, reduced in tile order below.
    let partials: Vec<Vec<[f64; PARAMS_PER_STROKE]>> = tape
        .tiles
        .par_iter()
        .map(|tt| {
            let k = tt.candidates.len();
            let mut acc = vec![[0.0; PARAMS_PER_STROKE]; k];
            if k == 0 {
                return acc;
            }
            let t = tt.tile;
            let mut u = vec![0.0; k];
            for (local, pixel) in tt.entries.chunks_exact(k).enumerate() {
                let (i, j) = (t.row0 + local / t.cols(), t.col0 + local % t.cols());
                let g = &upstream[(i * w + j) * 3..(i * w + j) * 3 + 3];
                if g[0] == 0.0 && g[1] == 0.0 && g[2] == 0.0 {
                    continue;
                }
                let p = Point2::pixel_center(i, j);
                // u_n = g . (color_n - background); e_n = c_n u_n; mean_e = sum a_n e_n
                let mut mean_e = 0.0;
                for (slot, (e, &n)) in pixel.iter().zip(&tt.candidates).enumerate() {
                    let col = strokes[n].color;
                    u[slot] = g[0] * (col[0] - bg[0]) + g[1] * (col[1] - bg[1]) + g[2] * (col[2] - bg[2]);
                    mean_e += e.assignment * e.coverage * u[slot];
                }
                for (slot, (e, &n)) in pixel.iter().zip(&tt.candidates).enumerate() {
                    let row = &mut acc[slot];
                    let a = e.assignment;
                    let ac = a * e.coverage;
                    for c in 0..3 {
                        row[param::COLOR + c] += ac * g[c];
                    }
                    let x = gm * (strokes[n].width - e.distance);
                    let dcov = gm * sigmoid(x) * sigmoid(-x);
                    let d_width = a * u[slot] * dcov;
                    row[param::WIDTH] += d_width;
                    let d_dist = -ga * a * (e.coverage * u[slot] - mean_e) - d_width;
                    if e.distance > 0.0 && d_dist != 0.0 {
                        let sample = e.sample as usize;
                        let q = tape.samples[n * s + sample];
                        let gx = d_dist * (q.x - p.x) / e.distance;
                        let gy = d_dist * (q.y - p.y) / e.distance;
                        row[param::LOCATION_X] += gx;
                        row[param::LOCATION_Y] += gy;
                        for (m, b) in basis[sample].iter().enumerate() {
                            row[param::OFFSETS + 2 * m] += b * gx;
                            row[param::OFFSETS + 2 * m + 1] += b * gy;
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let mut grads = vec![[0.0; PARAMS_PER_STROKE]; field.len()];
    for (tt, acc) in tape.tiles.iter().zip(partials) {
        for (&n, row) in tt.candidates.iter().zip(acc) {
            for (dst, v) in grads[n].iter_mut().zip(row) {
                *dst += v;
            }
        }
    }
    Ok(grads)
}

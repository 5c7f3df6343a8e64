use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{param, PARAMS_PER_STROKE};
use crate::image::Image;

use super::transform::{logit, softplus_inv, LatentParams, WIDTH_FLOOR};
use super::OptimizeError;

const MAX_INIT_LOGIT: f64 = 6.0;

/// Places `n` strokes on a jittered grid of `ceil(sqrt(n))` cells per side,
/// colored by the content pixel under each location.
///
/// When the grid has more cells than strokes, cells are taken at evenly spaced
/// indices so the unused cells are spread over the canvas.
pub fn init_strokes(content: &Image, n: usize, seed: u64) -> Result<LatentParams, OptimizeError> {
    if n == 0 {
        return Err(OptimizeError::InvalidArgument("need at least one stroke".into()));
    }
    let (h, w) = (content.height(), content.width());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (n as f64).sqrt().ceil() as usize;
    let cells = side * side;
    let (cell_w, cell_h) = (w as f64 / side as f64, h as f64 / side as f64);
    let width = h.min(w) as f64 * 2.0 / (n as f64).sqrt();
    let width_latent = softplus_inv((width - WIDTH_FLOOR).max(1e-3));

    let rows = (0..n)
        .map(|k| {
            let cell = k * cells / n;
            let (row, col) = ((cell / side) as f64, (cell % side) as f64);
            let mut z = [0.0; PARAMS_PER_STROKE];
            let x = (col + 0.5 + rng.random_range(-0.25..0.25)) * cell_w;
            let y = (row + 0.5 + rng.random_range(-0.25..0.25)) * cell_h;
            z[param::LOCATION_X] = x;
            z[param::LOCATION_Y] = y;
            for o in &mut z[param::OFFSETS..param::OFFSETS + 6] {
                *o = rng.random_range(-width..=width);
            }
            z[param::WIDTH] = width_latent;
            let px = content.get((y.floor() as usize).min(h - 1), (x.floor() as usize).min(w - 1));
            for c in 0..3 {
                let clamped = px[c].clamp(1e-6, 1.0 - 1e-6);
                z[param::COLOR + c] = logit(clamped).clamp(-MAX_INIT_LOGIT, MAX_INIT_LOGIT);
            }
            z
        })
        .collect();
    Ok(LatentParams { rows })
}

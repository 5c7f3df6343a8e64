use rayon::prelude::*;

use super::distance::nearest_squared;
use super::knn::{candidates_for_grid, TileGrid};
use super::{sample_field, RenderConfig, RenderError};
use crate::geometry::{Point2, StrokeField};
use crate::image::{Canvas, Image};

/// Nearest-stroke rendering: each pixel looks at its tile's candidates, picks
/// the one with the smallest spine distance (lowest index on ties) and paints
/// its color if that distance is within the stroke's width.
pub fn render_hard(field: &StrokeField, config: &RenderConfig) -> Result<Canvas, RenderError> {
    config.validate()?;
    let s = config.samples_per_curve;
    let samples = sample_field(field, s);
    let grid = TileGrid::new(field.height(), field.width(), config.tile_size);
    let candidates = candidates_for_grid(&grid, &samples, config);
    let strokes = field.strokes();

    let blocks: Vec<Vec<[f64; 3]>> = candidates
        .par_iter()
        .map(|tc| {
            let t = tc.tile;
            let mut block = Vec::with_capacity(t.pixel_count());
            for i in t.row0..t.row1 {
                for j in t.col0..t.col1 {
                    let p = Point2::pixel_center(i, j);
                    let mut best: Option<(f64, usize)> = None;
                    for &n in &tc.strokes {
                        let d = nearest_squared(&samples[n * s..(n + 1) * s], p).0.sqrt();
                        if best.is_none_or(|(bd, _)| d < bd) {
                            best = Some((d, n));
                        }
                    }
                    let color = match best {
                        Some((d, n)) if d <= strokes[n].width => strokes[n].color,
                        _ => config.background,
                    };
                    block.push(color);
                }
            }
            block
        })
        .collect();

    let mut canvas =
        Image::filled(field.height(), field.width(), config.background).expect("field dimensions are validated");
    for (tc, block) in candidates.iter().zip(blocks) {
        let t = tc.tile;
        let mut it = block.into_iter();
        for i in t.row0..t.row1 {
            for j in t.col0..t.col1 {
                canvas.set(i, j, it.next().expect("block matches tile"));
            }
        }
    }
    Ok(canvas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Stroke;

    #[test]
    fn empty_field_is_background() {
        let field = StrokeField::empty(9, 7).unwrap();
        let cfg = RenderConfig {
            background: [0.1, 0.2, 0.3],
            ..Default::default()
        };
        let c = render_hard(&field, &cfg).unwrap();
        assert_eq!(c, Image::filled(9, 7, [0.1, 0.2, 0.3]).unwrap());
    }

    #[test]
    fn straight_stroke_paints_band() {
        // horizontal segment from x=4 to x=28 at y=16, width 3
        let stroke = Stroke::new(
            Point2::new(16.0, 16.0),
            [Point2::new(-12.0, 0.0), Point2::new(0.0, 0.0), Point2::new(12.0, 0.0)],
            3.0,
            [1.0, 0.0, 0.0],
        )
        .unwrap();
        let field = StrokeField::new(vec![stroke], 32, 32).unwrap();
        // 25 samples put a sample every 1 px, so sampled distance is exact at
        // pixel centers between the endpoints up to half-pixel aliasing in x
        let cfg = RenderConfig {
            samples_per_curve: 25,
            background: [1.0; 3],
            ..Default::default()
        };
        let c = render_hard(&field, &cfg).unwrap();
        let samples = stroke.world_curve().sample(25).unwrap();
        for i in 0..32 {
            for j in 0..32 {
                let p = Point2::pixel_center(i, j);
                let d = samples.iter().map(|q| q.distance(p)).fold(f64::INFINITY, f64::min);
                let expected = if d <= 3.0 { [1.0, 0.0, 0.0] } else { [1.0; 3] };
                assert_eq!(c.get(i, j), expected, "pixel ({i}, {j})");
            }
        }
        assert_eq!(c.get(16, 16), [1.0, 0.0, 0.0]);
        assert_eq!(c.get(13, 16), [1.0, 0.0, 0.0]);
        assert_eq!(c.get(12, 16), [1.0; 3]);
    }
}

//! Per-tile K-nearest stroke selection.

use std::cmp::Ordering;

use rayon::prelude::*;

use super::distance::nearest_squared;
use super::{RenderConfig, RenderError};
use crate::geometry::{Point2, StrokeField};

/// Pixel rectangle `[row0, row1) x [col0, col1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tile {
    pub row0: usize,
    pub row1: usize,
    pub col0: usize,
    pub col1: usize,
}

impl Tile {
    pub fn rows(&self) -> usize {
        self.row1 - self.row0
    }

    pub fn cols(&self) -> usize {
        self.col1 - self.col0
    }

    pub fn pixel_count(&self) -> usize {
        self.rows() * self.cols()
    }

    /// Geometric center of the (possibly clipped) tile in canvas coordinates.
    pub fn center(&self) -> Point2 {
        Point2::new(
            0.5 * (self.col0 + self.col1) as f64,
            0.5 * (self.row0 + self.row1) as f64,
        )
    }
}

/// Row-major tiling of a canvas; the last row/column of tiles is clipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileGrid {
    pub height: usize,
    pub width: usize,
    pub tile_size: usize,
    tiles: Vec<Tile>,
}

impl TileGrid {
    pub fn new(height: usize, width: usize, tile_size: usize) -> Self {
        assert!(tile_size > 0);
        let mut tiles = Vec::new();
        for row0 in (0..height).step_by(tile_size) {
            for col0 in (0..width).step_by(tile_size) {
                tiles.push(Tile {
                    row0,
                    row1: (row0 + tile_size).min(height),
                    col0,
                    col1: (col0 + tile_size).min(width),
                });
            }
        }
        Self {
            height,
            width,
            tile_size,
            tiles,
        }
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn tile_index_of(&self, row: usize, col: usize) -> usize {
        let tiles_per_row = self.width.div_ceil(self.tile_size);
        (row / self.tile_size) * tiles_per_row + col / self.tile_size
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileCandidates {
    pub tile: Tile,
    /// Stroke indices in ascending order.
    pub strokes: Vec<usize>,
}

/// For each tile, the `K` strokes whose sample set is nearest to the tile
/// center (lowest index on ties), or every stroke when `K >= N`.
pub fn knn_candidates(field: &StrokeField, config: &RenderConfig) -> Result<Vec<TileCandidates>, RenderError> {
    config.validate()?;
    let samples = super::sample_field(field, config.samples_per_curve);
    let grid = TileGrid::new(field.height(), field.width(), config.tile_size);
    Ok(candidates_for_grid(&grid, &samples, config))
}

pub(crate) fn candidates_for_grid(grid: &TileGrid, samples: &[Point2], config: &RenderConfig) -> Vec<TileCandidates> {
    let s = config.samples_per_curve;
    let n = samples.len() / s;
    grid.tiles()
        .par_iter()
        .map(|&tile| {
            let strokes = if config.knn >= n {
                (0..n).collect()
            } else {
                let center = tile.center();
                let mut ranked: Vec<(f64, usize)> = samples
                    .chunks_exact(s)
                    .enumerate()
                    .map(|(k, pts)| (nearest_squared(pts, center).0, k))
                    .collect();
                let by_distance = |a: &(f64, usize), b: &(f64, usize)| match a.0.total_cmp(&b.0) {
                    Ordering::Equal => a.1.cmp(&b.1),
                    o => o,
                };
                ranked.select_nth_unstable_by(config.knn - 1, by_distance);
                let mut picked: Vec<usize> = ranked[..config.knn].iter().map(|r| r.1).collect();
                picked.sort_unstable();
                picked
            };
            TileCandidates { tile, strokes }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Stroke;

    fn dot_stroke(x: f64, y: f64) -> Stroke {
        Stroke::new(Point2::new(x, y), [Point2::default(); 3], 1.0, [0.0; 3]).unwrap()
    }

    #[test]
    fn grid_covers_canvas_once() {
        let grid = TileGrid::new(37, 20, 16);
        let mut hits = vec![0u8; 37 * 20];
        for t in grid.tiles() {
            for i in t.row0..t.row1 {
                for j in t.col0..t.col1 {
                    hits[i * 20 + j] += 1;
                }
            }
        }
        assert!(hits.iter().all(|&h| h == 1));
        assert_eq!(grid.tiles().len(), 3 * 2);
        assert_eq!(grid.tile_index_of(36, 19), 5);
        assert_eq!(grid.tiles()[5].center(), Point2::new(18.0, 34.5));
    }

    #[test]
    fn all_strokes_when_k_covers_n() {
        let field = StrokeField::new(vec![dot_stroke(1.0, 1.0), dot_stroke(30.0, 30.0)], 32, 32).unwrap();
        let cfg = RenderConfig {
            knn: 2,
            tile_size: 8,
            ..Default::default()
        };
        for tc in knn_candidates(&field, &cfg).unwrap() {
            assert_eq!(tc.strokes, vec![0, 1]);
        }
    }

    #[test]
    fn nearest_single_stroke_per_tile() {
        // tile centers at (8, 8), (24, 8), (8, 24), (24, 24)
        let field = StrokeField::new(
            vec![dot_stroke(3.0, 29.0), dot_stroke(24.0, 8.0), dot_stroke(30.0, 30.0)],
            32,
            32,
        )
        .unwrap();
        let cfg = RenderConfig {
            knn: 1,
            tile_size: 16,
            ..Default::default()
        };
        let c = knn_candidates(&field, &cfg).unwrap();
        assert_eq!(c[1].strokes, vec![1]);
        assert_eq!(c[2].strokes, vec![0]);
        assert_eq!(c[3].strokes, vec![2]);
        // brute force for tile 0: compare distances from its center
        let center = c[0].tile.center();
        let best = (0..3)
            .min_by(|&a, &b| {
                let da = field.strokes()[a].location.distance(center);
                let db = field.strokes()[b].location.distance(center);
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .unwrap();
        assert_eq!(c[0].strokes, vec![best]);
    }

    #[test]
    fn equidistant_tie_prefers_lower_index() {
        let field = StrokeField::new(vec![dot_stroke(12.0, 8.0), dot_stroke(4.0, 8.0)], 16, 16).unwrap();
        let cfg = RenderConfig {
            knn: 1,
            tile_size: 16,
            ..Default::default()
        };
        assert_eq!(knn_candidates(&field, &cfg).unwrap()[0].strokes, vec![0]);
    }

    #[test]
    fn candidates_unique_and_in_range() {
        let strokes: Vec<Stroke> = (0..30)
            .map(|k| dot_stroke((k * 7 % 50) as f64, (k * 13 % 50) as f64))
            .collect();
        let field = StrokeField::new(strokes, 50, 50).unwrap();
        let cfg = RenderConfig {
            knn: 5,
            tile_size: 7,
            ..Default::default()
        };
        for tc in knn_candidates(&field, &cfg).unwrap() {
            assert_eq!(tc.strokes.len(), 5);
            assert!(tc.strokes.windows(2).all(|w| w[0] < w[1]));
            assert!(tc.strokes.iter().all(|&s| s < 30));
        }
    }
}

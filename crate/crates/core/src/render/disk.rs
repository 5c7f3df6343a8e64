//! Flat disks: the minimal distance-field renderer the stroke renderer generalizes.

use crate::geometry::Point2;
use crate::image::{Canvas, Image, ImageError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: Point2,
    pub radius: f64,
    pub color: [f64; 3],
}

/// Per-pixel distances to a disk center or stroke spine.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
    /// Index of the disk or stroke the map was computed for.
    pub source: usize,
}

impl DistanceMap {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

/// Euclidean distance from every pixel center to `disk.center`.
pub fn disk_distance_map(disk: &Disk, height: usize, width: usize) -> DistanceMap {
    let mut values = Vec::with_capacity(height * width);
    for i in 0..height {
        for j in 0..width {
            values.push(Point2::pixel_center(i, j).distance(disk.center));
        }
    }
    DistanceMap {
        height,
        width,
        values,
        source: 0,
    }
}

/// Each pixel takes the color of the nearest disk among those covering it
/// (`distance < radius`), ties to the lowest index; uncovered pixels take
/// `background`.
pub fn render_disks_hard(
    disks: &[Disk],
    height: usize,
    width: usize,
    background: [f64; 3],
) -> Result<Canvas, ImageError> {
    let maps: Vec<DistanceMap> = disks
        .iter()
        .enumerate()
        .map(|(k, d)| DistanceMap {
            source: k,
            ..disk_distance_map(d, height, width)
        })
        .collect();
    let mut canvas = Image::filled(height, width, background)?;
    for i in 0..height {
        for j in 0..width {
            let mut winner: Option<(f64, usize)> = None;
            for (k, (disk, map)) in disks.iter().zip(&maps).enumerate() {
                let d = map.get(i, j);
                if d < disk.radius && winner.is_none_or(|(best, _)| d < best) {
                    winner = Some((d, k));
                }
            }
            if let Some((_, k)) = winner {
                canvas.set(i, j, disks[k].color);
            }
        }
    }
    Ok(canvas)
}

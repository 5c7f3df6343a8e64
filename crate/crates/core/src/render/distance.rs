use crate::geometry::{Point2, StrokeField};

/// Distance from `pixel` to the nearest of `samples`, with the index of that
/// sample (lowest index on ties).
///
/// Panics if `samples` is empty.
pub fn stroke_distance(samples: &[Point2], pixel: Point2) -> (f64, usize) {
    let (best_sq, best) = nearest_squared(samples, pixel);
    (best_sq.sqrt(), best)
}

#[inline]
pub(crate) fn nearest_squared(samples: &[Point2], pixel: Point2) -> (f64, usize) {
    assert!(!samples.is_empty(), "stroke_distance needs at least one sample");
    let mut best = 0;
    let mut best_sq = samples[0].distance_squared(pixel);
    for (s, q) in samples.iter().enumerate().skip(1) {
        let d = q.distance_squared(pixel);
        if d < best_sq {
            best_sq = d;
            best = s;
        }
    }
    (best_sq, best)
}

/// Spine samples of every stroke, flattened as `N x samples` points.
pub fn sample_field(field: &StrokeField, samples: usize) -> Vec<Point2> {
    let mut out = Vec::with_capacity(field.len() * samples);
    for stroke in field.strokes() {
        stroke.world_curve().sample_into(samples, &mut out);
    }
    out
}

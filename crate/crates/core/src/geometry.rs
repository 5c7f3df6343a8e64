//! Points, quadratic Bézier spines and the 12-parameter brush stroke.
//!
//! Canvas convention: pixel `(row i, column j)` has its center at
//! `(x, y) = (j + 0.5, i + 0.5)`.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scalars per stroke: location (2), offsets (6), width (1), color (3).
pub const PARAMS_PER_STROKE: usize = 12;

/// Index of each stroke parameter inside a `[f64; PARAMS_PER_STROKE]` row.
pub mod param {
    pub const LOCATION_X: usize = 0;
    pub const LOCATION_Y: usize = 1;
    /// First offset coordinate; offset `k` occupies `OFFSETS + 2k` (x) and `OFFSETS + 2k + 1` (y).
    pub const OFFSETS: usize = 2;
    pub const WIDTH: usize = 8;
    pub const COLOR: usize = 9;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("curve parameter t = {0} is outside [0, 1]")]
    ParameterOutOfRange(f64),
    #[error("need at least 2 samples per curve, got {0}")]
    TooFewSamples(usize),
    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),
    #[error("stroke width must be positive and finite, got {0}")]
    InvalidWidth(f64),
    #[error("color channel {channel} = {value} is outside [0, 1]")]
    InvalidColor { channel: usize, value: f64 },
    #[error("canvas dimensions must be at least 1x1, got {height}x{width}")]
    EmptyCanvas { height: usize, width: usize },
    #[error("stroke {index}: {source}")]
    InvalidStroke {
        index: usize,
        #[source]
        source: Box<GeometryError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub fn distance_squared(self, other: Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn distance(self, other: Point2) -> f64 {
        self.distance_squared(other).sqrt()
    }

    /// Center of the pixel at `(row, col)`.
    #[inline]
    pub fn pixel_center(row: usize, col: usize) -> Self {
        Self::new(col as f64 + 0.5, row as f64 + 0.5)
    }
}

impl Add for Point2 {
    type Output = Point2;
    #[inline]
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    #[inline]
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    #[inline]
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// Bernstein weights of the quadratic basis at `t`.
#[inline]
pub fn bernstein(t: f64) -> [f64; 3] {
    let mt = 1.0 - t;
    [mt * mt, 2.0 * mt * t, t * t]
}

/// Curve parameter of sample `s` out of `count` equally spaced samples.
#[inline]
pub fn sample_parameter(s: usize, count: usize) -> f64 {
    debug_assert!(count >= 2);
    s as f64 / (count - 1) as f64
}

/// Quadratic Bézier curve in absolute canvas coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticBezier {
    pub p0: Point2,
    pub p1: Point2,
    pub p2: Point2,
}

impl QuadraticBezier {
    pub fn new(p0: Point2, p1: Point2, p2: Point2) -> Result<Self, GeometryError> {
        if !(p0.is_finite() && p1.is_finite() && p2.is_finite()) {
            return Err(GeometryError::NonFinite("control point"));
        }
        Ok(Self { p0, p1, p2 })
    }

    /// `(1-t)^2 p0 + 2(1-t)t p1 + t^2 p2` for `t` in `[0, 1]`.
    pub fn eval(&self, t: f64) -> Result<Point2, GeometryError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(GeometryError::ParameterOutOfRange(t));
        }
        Ok(self.eval_unchecked(t))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, t: f64) -> Point2 {
        // Endpoints are returned verbatim so that B(0) = p0 and B(1) = p2 hold bit-exactly.
        if t == 0.0 {
            return self.p0;
        }
        if t == 1.0 {
            return self.p2;
        }
        // p0 + t (2(1-t)(p1-p0) + t(p2-p0)): same polynomial, exact for coincident control points
        let a = self.p1 - self.p0;
        let b = self.p2 - self.p0;
        let two_mt = 2.0 * (1.0 - t);
        Point2::new(
            self.p0.x + t * (two_mt * a.x + t * b.x),
            self.p0.y + t * (two_mt * a.y + t * b.y),
        )
    }

    /// `count` points at parameters equally spaced in `t`, endpoints included.
    pub fn sample(&self, count: usize) -> Result<Vec<Point2>, GeometryError> {
        if count < 2 {
            return Err(GeometryError::TooFewSamples(count));
        }
        let mut out = Vec::with_capacity(count);
        self.sample_into(count, &mut out);
        Ok(out)
    }

    pub(crate) fn sample_into(&self, count: usize, out: &mut Vec<Point2>) {
        out.extend((0..count).map(|s| self.eval_unchecked(sample_parameter(s, count))));
    }

    pub fn control_points(&self) -> [Point2; 3] {
        [self.p0, self.p1, self.p2]
    }
}

/// Axis-aligned box, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point2,
    pub max: Point2,
}

impl Aabb {
    pub fn from_points(points: &[Point2]) -> Option<Self> {
        let first = *points.first()?;
        let mut bounds = Aabb { min: first, max: first };
        for p in &points[1..] {
            bounds.min.x = bounds.min.x.min(p.x);
            bounds.min.y = bounds.min.y.min(p.y);
            bounds.max.x = bounds.max.x.max(p.x);
            bounds.max.y = bounds.max.y.max(p.y);
        }
        Some(bounds)
    }

    pub fn expand(self, margin: f64) -> Self {
        Aabb {
            min: Point2::new(self.min.x - margin, self.min.y - margin),
            max: Point2::new(self.max.x + margin, self.max.y + margin),
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// One brush stroke. The spine's control points are `location + offsets[k]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stroke {
    pub location: Point2,
    pub offsets: [Point2; 3],
    /// Half-thickness in pixels.
    pub width: f64,
    pub color: [f64; 3],
}

impl Stroke {
    pub fn new(location: Point2, offsets: [Point2; 3], width: f64, color: [f64; 3]) -> Result<Self, GeometryError> {
        let stroke = Self {
            location,
            offsets,
            width,
            color,
        };
        stroke.validate()?;
        Ok(stroke)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !self.location.is_finite() {
            return Err(GeometryError::NonFinite("location"));
        }
        if !self.offsets.iter().all(|p| p.is_finite()) {
            return Err(GeometryError::NonFinite("offset"));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(GeometryError::InvalidWidth(self.width));
        }
        for (channel, &value) in self.color.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(GeometryError::InvalidColor { channel, value });
            }
        }
        Ok(())
    }

    pub fn world_curve(&self) -> QuadraticBezier {
        QuadraticBezier {
            p0: self.location + self.offsets[0],
            p1: self.location + self.offsets[1],
            p2: self.location + self.offsets[2],
        }
    }

    /// Box around the `samples` spine points grown by `width` on every side.
    pub fn bounds(&self, samples: usize) -> Result<Aabb, GeometryError> {
        let points = self.world_curve().sample(samples)?;
        Ok(Aabb::from_points(&points)
            .expect("sample() returns at least two points")
            .expand(self.width))
    }

    pub fn to_params(&self) -> [f64; PARAMS_PER_STROKE] {
        let o = &self.offsets;
        [
            self.location.x,
            self.location.y,
            o[0].x,
            o[0].y,
            o[1].x,
            o[1].y,
            o[2].x,
            o[2].y,
            self.width,
            self.color[0],
            self.color[1],
            self.color[2],
        ]
    }

    /// Inverse of [`Stroke::to_params`]; the result is validated.
    pub fn from_params(p: &[f64; PARAMS_PER_STROKE]) -> Result<Self, GeometryError> {
        Stroke::new(
            Point2::new(p[0], p[1]),
            [
                Point2::new(p[2], p[3]),
                Point2::new(p[4], p[5]),
                Point2::new(p[6], p[7]),
            ],
            p[8],
            [p[9], p[10], p[11]],
        )
    }
}

/// An ordered set of strokes on an `height x width` canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct StrokeField {
    strokes: Vec<Stroke>,
    height: usize,
    width: usize,
}

impl StrokeField {
    pub fn new(strokes: Vec<Stroke>, height: usize, width: usize) -> Result<Self, GeometryError> {
        if height == 0 || width == 0 {
            return Err(GeometryError::EmptyCanvas { height, width });
        }
        for (index, stroke) in strokes.iter().enumerate() {
            stroke.validate().map_err(|e| GeometryError::InvalidStroke {
                index,
                source: Box::new(e),
            })?;
        }
        Ok(Self { strokes, height, width })
    }

    pub fn empty(height: usize, width: usize) -> Result<Self, GeometryError> {
        Self::new(Vec::new(), height, width)
    }

    pub fn strokes(&self) -> &[Stroke] {
        &self.strokes
    }

    pub fn len(&self) -> usize {
        self.strokes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strokes.is_empty()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// N x 12 parameter rows in stroke order.
    pub fn to_params(&self) -> Vec<[f64; PARAMS_PER_STROKE]> {
        self.strokes.iter().map(Stroke::to_params).collect()
    }

    pub fn from_params(rows: &[[f64; PARAMS_PER_STROKE]], height: usize, width: usize) -> Result<Self, GeometryError> {
        let strokes = rows
            .iter()
            .enumerate()
            .map(|(index, row)| {
                Stroke::from_params(row).map_err(|e| GeometryError::InvalidStroke {
                    index,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(strokes, height, width)
    }
}

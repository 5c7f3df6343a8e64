//! Central finite-difference checks for the renderer VJP and the loss gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{param, Point2, Stroke, StrokeField, PARAMS_PER_STROKE};
use crate::image::Image;
use crate::perception::{generate_bank, LossTarget, LossWeights, PerceptionError, DEFAULT_LAYER_PLAN};
use crate::render::{render_soft, render_vjp, sample_field, RenderConfig, RenderError, RenderTape};

/// Stroke coordinates that move the spine; width and color never do.
pub const GEOMETRIC_COORDINATES: usize = param::WIDTH;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    pub eps: f64,
    /// Geometric coordinates of a stroke whose sample argmin is this close to a
    /// tie on some pixel it influences are excluded.
    pub tie_tolerance: f64,
    /// Assignment weight below which a pixel does not count as influenced.
    pub influence_floor: f64,
    /// Denominator floor of [`relative_error`].
    pub floor: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            tie_tolerance: 1e-3,
            influence_floor: 1e-12,
            floor: 1e-5,
        }
    }
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinateCheck {
    pub stroke: usize,
    pub coordinate: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FdReport {
    pub checks: Vec<CoordinateCheck>,
    /// Coordinates near argmin ties; measured but not part of the verdict.
    pub excluded: Vec<CoordinateCheck>,
}

impl FdReport {
    pub fn max_rel_error(&self) -> f64 {
        self.checks.iter().map(|c| c.rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&CoordinateCheck> {
        self.checks.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }

    pub fn merge(&mut self, other: FdReport) {
        self.checks.extend(other.checks);
        self.excluded.extend(other.excluded);
    }
}

/// Random valid field: locations inside the canvas, offsets within `reach`
/// pixels, widths in `[0.5, 3)`.
pub fn random_field(rng: &mut impl Rng, strokes: usize, height: usize, width: usize, reach: f64) -> StrokeField {
    let strokes = (0..strokes)
        .map(|_| {
            let mut offset = || Point2::new(rng.random_range(-reach..reach), rng.random_range(-reach..reach));
            let offsets = [offset(), offset(), offset()];
            Stroke {
                location: Point2::new(
                    rng.random_range(0.0..width as f64),
                    rng.random_range(0.0..height as f64),
                ),
                offsets,
                width: rng.random_range(0.5..3.0),
                color: [rng.random(), rng.random(), rng.random()],
            }
        })
        .collect();
    StrokeField::new(strokes, height, width).expect("random strokes are valid")
}

/// Per stroke, the smallest gap between its nearest and second-nearest sample
/// distance over the pixels where its assignment weight is at least
/// `influence_floor`.
pub fn argmin_gaps(field: &StrokeField, config: &RenderConfig, tape: &RenderTape, influence_floor: f64) -> Vec<f64> {
    let s = config.samples_per_curve;
    let samples = sample_field(field, s);
    let mut gaps = vec![f64::INFINITY; field.len()];
    for row in 0..field.height() {
        for col in 0..field.width() {
            let p = Point2::pixel_center(row, col);
            let (candidates, entries) = tape.pixel_entries(row, col);
            for (&k, entry) in candidates.iter().zip(entries) {
                if entry.assignment < influence_floor {
                    continue;
                }
                let (mut d1, mut d2) = (f64::INFINITY, f64::INFINITY);
                for q in &samples[k * s..(k + 1) * s] {
                    let d = q.distance(p);
                    if d < d1 {
                        d2 = d1;
                        d1 = d;
                    } else if d < d2 {
                        d2 = d;
                    }
                }
                gaps[k] = gaps[k].min(d2 - d1);
            }
        }
    }
    gaps
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Checks `render_vjp` against central differences of `sum(upstream * render)`.
pub fn check_render_vjp(
    field: &StrokeField,
    config: &RenderConfig,
    upstream: &[f64],
    options: &FdOptions,
) -> Result<FdReport, RenderError> {
    let (_, tape) = render_soft(field, config)?;
    let analytic = render_vjp(field, config, &tape, upstream)?;
    let gaps = argmin_gaps(field, config, &tape, options.influence_floor);
    let base = field.to_params();
    let render_at = |k: usize, c: usize, value: f64| -> Result<Image, RenderError> {
        let mut params = base.clone();
        params[k][c] = value;
        let f = StrokeField::from_params(&params, field.height(), field.width()).expect("perturbed field stays valid");
        Ok(render_soft(&f, config)?.0)
    };
    let mut report = FdReport::default();
    for (k, grads) in analytic.iter().enumerate() {
        for c in 0..PARAMS_PER_STROKE {
            let x = base[k][c];
            let plus = render_at(k, c, x + options.eps)?;
            let minus = render_at(k, c, x - options.eps)?;
            let diff: Vec<f64> = plus
                .as_slice()
                .iter()
                .zip(minus.as_slice())
                .map(|(p, m)| p - m)
                .collect();
            let numeric = dot(&diff, upstream) / (2.0 * options.eps);
            let check = CoordinateCheck {
                stroke: k,
                coordinate: c,
                analytic: grads[c],
                numeric,
                rel_error: relative_error(grads[c], numeric, options.floor),
            };
            if c < GEOMETRIC_COORDINATES && gaps[k] < options.tie_tolerance {
                report.excluded.push(check);
            } else {
                report.checks.push(check);
            }
        }
    }
    Ok(report)
}

/// Checks the loss image gradient at every value of `image` (coordinate =
/// flat buffer index, stroke = 0).
pub fn check_loss_gradient(
    target: &LossTarget,
    image: &Image,
    options: &FdOptions,
) -> Result<FdReport, PerceptionError> {
    let (_, analytic) = target.evaluate_with_gradient(image)?;
    let mut probe = image.clone();
    let mut report = FdReport::default();
    for i in 0..analytic.len() {
        let x = image.as_slice()[i];
        probe.as_mut_slice()[i] = x + options.eps;
        let plus = target.evaluate(&probe)?.total;
        probe.as_mut_slice()[i] = x - options.eps;
        let minus = target.evaluate(&probe)?.total;
        probe.as_mut_slice()[i] = x;
        let numeric = (plus - minus) / (2.0 * options.eps);
        report.checks.push(CoordinateCheck {
            stroke: 0,
            coordinate: i,
            analytic: analytic[i],
            numeric,
            rel_error: relative_error(analytic[i], numeric, options.floor),
        });
    }
    Ok(report)
}

pub fn random_image(rng: &mut impl Rng, height: usize, width: usize) -> Image {
    Image::from_fn(height, width, |_, _| [rng.random(), rng.random(), rng.random()]).expect("nonempty")
}

pub fn random_upstream(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[derive(Debug, Clone, Default)]
pub struct SuiteReport {
    pub render: FdReport,
    pub loss: FdReport,
}

impl SuiteReport {
    pub fn max_rel_error(&self) -> f64 {
        self.render.max_rel_error().max(self.loss.max_rel_error())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GradCheckError {
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}

/// Renderer check on `fields` random 8-stroke 32x32 fields (S=5, K=8) and a loss
/// check on one random 16x16 image pair.
pub fn run_suite(seed: u64, fields: usize, options: &FdOptions) -> Result<SuiteReport, GradCheckError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = RenderConfig {
        samples_per_curve: 5,
        knn: 8,
        ..RenderConfig::default()
    };
    let mut suite = SuiteReport::default();
    for _ in 0..fields {
        let field = random_field(&mut rng, 8, 32, 32, 8.0);
        let upstream = random_upstream(&mut rng, 32 * 32 * 3);
        suite
            .render
            .merge(check_render_vjp(&field, &config, &upstream, options)?);
    }
    let bank = generate_bank(seed, &DEFAULT_LAYER_PLAN)?;
    let content = random_image(&mut rng, 16, 16);
    let style = random_image(&mut rng, 16, 16);
    let generated = random_image(&mut rng, 16, 16);
    let target = LossTarget::new(&content, &style, &bank, &LossWeights::default())?;
    suite.loss = check_loss_gradient(&target, &generated, options)?;
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(2.0, 1.0, 1e-4), 0.5);
        assert_eq!(relative_error(1e-9, 0.0, 1e-4), 1e-5);
        assert_eq!(relative_error(0.0, 0.0, 1e-4), 0.0);
    }

    #[test]
    fn gap_of_lone_sample_pixel() {
        // straight 3-sample spine along a row; pixel (0, 2) center sits on the
        // bisector of samples 0 and 1 only if equidistant
        let s = Stroke::new(
            Point2::new(0.5, 0.5),
            [Point2::new(0.0, 0.0), Point2::new(2.0, 0.0), Point2::new(4.0, 0.0)],
            1.0,
            [0.0; 3],
        )
        .unwrap();
        let field = StrokeField::new(vec![s], 1, 2).unwrap();
        let config = RenderConfig {
            samples_per_curve: 3,
            knn: 1,
            ..Default::default()
        };
        let (_, tape) = render_soft(&field, &config).unwrap();
        // samples at x = 0.5, 2.5, 4.5; pixel centers 0.5 and 1.5 (tie at 1.5)
        assert_eq!(argmin_gaps(&field, &config, &tape, 1e-12), vec![0.0]);
        assert_eq!(argmin_gaps(&field, &config, &tape, 2.0), vec![f64::INFINITY]);
    }

    #[test]
    fn small_suite_passes() {
        let report = run_suite(3, 1, &FdOptions::default()).unwrap();
        assert!(report.max_rel_error() < 1e-4, "{:?}", report.render.worst());
    }
}

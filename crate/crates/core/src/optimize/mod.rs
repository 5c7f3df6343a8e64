//! Gradient-based fitting of stroke parameters, and the pixel refinement pass.
//!
//! One stroke iteration runs: latents -> field -> soft render -> loss and
//! image gradient -> renderer VJP -> chain through transforms -> Adam.

mod adam;
mod init;
mod transform;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::{adam_step, AdamConfig, AdamState, LearningRates};
pub use init::init_strokes;
pub use transform::{
    chain_gradients, from_field, logit, sigmoid, softplus, softplus_inv, to_field, LatentParams, WIDTH_FLOOR,
};

use crate::geometry::{GeometryError, StrokeField};
use crate::image::Image;
use crate::perception::{LossReport, LossTarget, PerceptionError};
use crate::render::{render_soft, render_vjp, RenderConfig, RenderError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("non-finite gradient for stroke {stroke}, coordinate {coordinate}")]
    NonFiniteGradient { stroke: usize, coordinate: usize },
    #[error("non-finite latent parameter for stroke {stroke}, coordinate {coordinate}")]
    NonFiniteParameter { stroke: usize, coordinate: usize },
    #[error("non-finite pixel gradient at value index {0}")]
    NonFinitePixelGradient(usize),
    #[error("loss became non-finite at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Geometry(GeometryError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}

/// What the generated image is scored against.
#[derive(Debug, Clone)]
pub enum Objective {
    /// Feature-space content and Gram-space style losses.
    Perceptual(LossTarget),
    /// `1/2 * sum (generated - target)^2`, reported as the content term.
    PixelL2(Image),
}

impl Objective {
    pub fn evaluate_with_gradient(&self, generated: &Image) -> Result<(LossReport, Vec<f64>), OptimizeError> {
        match self {
            Objective::Perceptual(target) => Ok(target.evaluate_with_gradient(generated)?),
            Objective::PixelL2(target) => {
                if !target.same_shape(generated) {
                    return Err(PerceptionError::DimensionMismatch {
                        expected: (target.height(), target.width()),
                        actual: (generated.height(), generated.width()),
                    }
                    .into());
                }
                let loss = generated.half_squared_distance(target);
                let grad = generated
                    .as_slice()
                    .iter()
                    .zip(target.as_slice())
                    .map(|(g, t)| g - t)
                    .collect();
                let report = LossReport {
                    content: loss,
                    style: 0.0,
                    total: loss,
                    style_layers: Vec::new(),
                };
                Ok((report, grad))
            }
        }
    }

    pub fn evaluate(&self, generated: &Image) -> Result<LossReport, OptimizeError> {
        match self {
            Objective::Perceptual(target) => Ok(target.evaluate(generated)?),
            Objective::PixelL2(_) => Ok(self.evaluate_with_gradient(generated)?.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    pub content_loss: f64,
    pub style_loss: f64,
    pub total_loss: f64,
    pub elapsed_ms: f64,
}

/// Per-iteration losses; iteration numbers strictly increase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossLog {
    records: Vec<LossRecord>,
}

impl LossLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: LossRecord) {
        if let Some(last) = self.records.last() {
            assert!(
                record.iteration > last.iteration,
                "loss log iterations must increase ({} after {})",
                record.iteration,
                last.iteration
            );
        }
        self.records.push(record);
    }

    fn push_report(&mut self, iteration: usize, report: &LossReport, elapsed_ms: f64) {
        self.push(LossRecord {
            iteration,
            content_loss: report.content,
            style_loss: report.style,
            total_loss: report.total,
            elapsed_ms,
        });
    }

    pub fn records(&self) -> &[LossRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first_total(&self) -> Option<f64> {
        self.records.first().map(|r| r.total_loss)
    }

    pub fn last_total(&self) -> Option<f64> {
        self.records.last().map(|r| r.total_loss)
    }

    /// Mean total loss over the last `window` records ending at position `index`
    /// (fewer at the start of the log).
    pub fn smoothed_total(&self, index: usize, window: usize) -> f64 {
        let lo = (index + 1).saturating_sub(window.max(1));
        let slice = &self.records[lo..=index];
        slice.iter().map(|r| r.total_loss).sum::<f64>() / slice.len() as f64
    }

    /// Appends `other`, renumbering its iterations to continue after this log.
    pub fn extend_after(&mut self, other: &LossLog) {
        let base = self.records.last().map_or(0, |r| r.iteration + 1);
        for r in &other.records {
            self.push(LossRecord {
                iteration: base + r.iteration,
                ..*r
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSchedule {
    pub stroke_iterations: usize,
    pub pixel_iterations: usize,
    /// Emit a stroke snapshot every this many iterations; 0 disables snapshots.
    pub snapshot_every: usize,
    pub seed: u64,
}

impl Default for RunSchedule {
    fn default() -> Self {
        Self {
            stroke_iterations: 500,
            pixel_iterations: 100,
            snapshot_every: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrokeOptimConfig {
    pub strokes: usize,
    pub render: RenderConfig,
    pub learning_rates: LearningRates,
    pub adam: AdamConfig,
    pub schedule: RunSchedule,
}

impl Default for StrokeOptimConfig {
    fn default() -> Self {
        Self {
            strokes: 300,
            render: RenderConfig::default(),
            learning_rates: LearningRates::default(),
            adam: AdamConfig::default(),
            schedule: RunSchedule::default(),
        }
    }
}

/// Fits `config.strokes` strokes to `objective`, initialized from `content`.
///
/// The log holds one record per iteration, measured before that iteration's
/// update, plus a final record for the returned field.
pub fn optimize_strokes(
    content: &Image,
    objective: &Objective,
    config: &StrokeOptimConfig,
    mut on_snapshot: impl FnMut(usize, &StrokeField),
) -> Result<(StrokeField, LossLog), OptimizeError> {
    config.render.validate()?;
    let (h, w) = (content.height(), content.width());
    let mut latent = init_strokes(content, config.strokes, config.schedule.seed)?;
    let mut adam = AdamState::new(latent.as_flat().len(), config.adam);
    let mut log = LossLog::new();
    let start = Instant::now();
    let iterations = config.schedule.stroke_iterations;

    for iteration in 0..=iterations {
        let field = to_field(&latent, h, w)?;
        let (canvas, tape) = render_soft(&field, &config.render)?;
        let (report, image_grad) = objective.evaluate_with_gradient(&canvas)?;
        if !report.total.is_finite() {
            return Err(OptimizeError::NonFiniteLoss { iteration });
        }
        log.push_report(iteration, &report, start.elapsed().as_secs_f64() * 1e3);
        if iteration == iterations {
            return Ok((field, log));
        }
        let field_grads = render_vjp(&field, &config.render, &tape, &image_grad)?;
        let grads = chain_gradients(&latent, &field_grads);
        adam_step(&mut adam, &mut latent, &grads, &config.learning_rates)?;
        let every = config.schedule.snapshot_every;
        if every > 0 && (iteration + 1) % every == 0 {
            on_snapshot(iteration + 1, &to_field(&latent, h, w)?);
        }
    }
    unreachable!("loop returns on its last iteration")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PixelRefineConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub adam: AdamConfig,
}

impl Default for PixelRefineConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            learning_rate: 0.01,
            adam: AdamConfig::default(),
        }
    }
}

/// Adam on raw pixel values from `start`, clamped to `[0, 1]` after every step.
pub fn pixel_refine(
    start: &Image,
    objective: &Objective,
    config: &PixelRefineConfig,
) -> Result<(Image, LossLog), OptimizeError> {
    let mut image = start.clone();
    let mut adam = AdamState::new(image.as_slice().len(), config.adam);
    let mut log = LossLog::new();
    let clock = Instant::now();
    for iteration in 0..=config.iterations {
        let (report, grad) = objective.evaluate_with_gradient(&image)?;
        if !report.total.is_finite() {
            return Err(OptimizeError::NonFiniteLoss { iteration });
        }
        log.push_report(iteration, &report, clock.elapsed().as_secs_f64() * 1e3);
        if iteration == config.iterations {
            break;
        }
        adam.update(image.as_mut_slice(), &grad, |_| config.learning_rate)
            .map_err(OptimizeError::NonFinitePixelGradient)?;
        image.clamp_unit();
    }
    Ok((image, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{generate_bank, LossWeights, DEFAULT_LAYER_PLAN};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_iterations_returns_initialization() {
        let content = Image::from_fn(16, 16, |i, j| [i as f64 / 16.0, j as f64 / 16.0, 0.5]).unwrap();
        let config = StrokeOptimConfig {
            strokes: 9,
            schedule: RunSchedule {
                stroke_iterations: 0,
                ..Default::default()
            },
            ..Default::default()
        };
        let (field, log) =
            optimize_strokes(&content, &Objective::PixelL2(content.clone()), &config, |_, _| {}).unwrap();
        let init = to_field(&init_strokes(&content, 9, 0).unwrap(), 16, 16).unwrap();
        assert_eq!(field, init);
        assert_eq!(log.records().len(), 1);
    }

    #[test]
    fn flat_gray_content_loss_drops() {
        // initializing from the gray target itself starts at the optimum, so start from stripes
        let content = Image::filled(64, 64, [0.5; 3]).unwrap();
        let stripes = Image::from_fn(64, 64, |_, j| {
            if (j / 8) % 2 == 0 {
                [0.1, 0.8, 0.2]
            } else {
                [0.9, 0.3, 0.7]
            }
        })
        .unwrap();
        let bank = generate_bank(0, &DEFAULT_LAYER_PLAN).unwrap();
        let weights = LossWeights {
            alpha: 1.0,
            beta: 0.0,
            ..Default::default()
        };
        let objective = Objective::Perceptual(LossTarget::new(&content, &content, &bank, &weights).unwrap());
        let config = StrokeOptimConfig {
            strokes: 16,
            schedule: RunSchedule {
                stroke_iterations: 200,
                ..Default::default()
            },
            ..Default::default()
        };
        let (_, log) = optimize_strokes(&stripes, &objective, &config, |_, _| {}).unwrap();
        let (first, last) = (log.first_total().unwrap(), log.last_total().unwrap());
        assert!(last <= 0.2 * first, "loss {first} -> {last}");
    }

    #[test]
    fn snapshots_follow_cadence() {
        let content = Image::filled(16, 16, [0.2, 0.4, 0.6]).unwrap();
        let config = StrokeOptimConfig {
            strokes: 4,
            schedule: RunSchedule {
                stroke_iterations: 7,
                snapshot_every: 3,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut seen = Vec::new();
        optimize_strokes(&content, &Objective::PixelL2(content.clone()), &config, |it, f| {
            seen.push((it, f.len()))
        })
        .unwrap();
        assert_eq!(seen, vec![(3, 4), (6, 4)]);
    }

    #[test]
    fn pixel_refine_zero_iterations_is_identity() {
        let start = Image::filled(8, 8, [0.3; 3]).unwrap();
        let target = Image::filled(8, 8, [0.9; 3]).unwrap();
        let (out, _) = pixel_refine(
            &start,
            &Objective::PixelL2(target),
            &PixelRefineConfig {
                iterations: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out, start);
    }

    #[test]
    fn pixel_refine_decreases_content_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let content = Image::from_fn(32, 32, |i, j| [i as f64 / 31.0, j as f64 / 31.0, 0.4]).unwrap();
        let start = Image::from_fn(32, 32, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap();
        let bank = generate_bank(0, &DEFAULT_LAYER_PLAN).unwrap();
        let weights = LossWeights {
            alpha: 1.0,
            beta: 0.0,
            ..Default::default()
        };
        let objective = Objective::Perceptual(LossTarget::new(&content, &content, &bank, &weights).unwrap());
        let (_, log) = pixel_refine(
            &start,
            &objective,
            &PixelRefineConfig {
                iterations: 10,
                ..Default::default()
            },
        )
        .unwrap();
        let totals: Vec<f64> = log.records().iter().map(|r| r.total_loss).collect();
        assert!(totals.windows(2).all(|w| w[1] < w[0]), "{totals:?}");
    }

    #[test]
    fn pixel_refine_fixed_point_at_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Image::from_fn(16, 16, |_, _| [rng.random(), rng.random(), rng.random()]).unwrap();
        let bank = generate_bank(0, &DEFAULT_LAYER_PLAN).unwrap();
        let weights = LossWeights {
            alpha: 1.0,
            beta: 1.0,
            ..Default::default()
        };
        let objective = Objective::Perceptual(LossTarget::new(&x, &x, &bank, &weights).unwrap());
        let (out, _) = pixel_refine(
            &x,
            &objective,
            &PixelRefineConfig {
                iterations: 5,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn log_smoothing_and_renumbering() {
        let mut a = LossLog::new();
        for (k, v) in [4.0, 2.0, 3.0].iter().enumerate() {
            a.push(LossRecord {
                iteration: k,
                content_loss: *v,
                style_loss: 0.0,
                total_loss: *v,
                elapsed_ms: 0.0,
            });
        }
        assert_eq!(a.smoothed_total(0, 20), 4.0);
        assert_eq!(a.smoothed_total(2, 2), 2.5);
        let b = a.clone();
        a.extend_after(&b);
        let its: Vec<usize> = a.records().iter().map(|r| r.iteration).collect();
        assert_eq!(its, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    #[should_panic(expected = "must increase")]
    fn log_rejects_non_increasing_iterations() {
        let mut a = LossLog::new();
        let r = LossRecord {
            iteration: 3,
            content_loss: 0.0,
            style_loss: 0.0,
            total_loss: 0.0,
            elapsed_ms: 0.0,
        };
        a.push(r);
        a.push(r);
    }
}

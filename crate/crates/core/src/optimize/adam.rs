use serde::{Deserialize, Serialize};

use crate::geometry::PARAMS_PER_STROKE;
use crate::render::StrokeGrads;

use super::{LatentParams, OptimizeError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Step sizes per stroke parameter group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningRates {
    /// Pixels.
    pub location: f64,
    /// Pixels.
    pub offsets: f64,
    pub width: f64,
    pub color: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            location: 1.0,
            offsets: 0.5,
            width: 0.1,
            color: 0.05,
        }
    }
}

impl LearningRates {
    pub fn for_coordinate(&self, coordinate: usize) -> f64 {
        match coordinate {
            0 | 1 => self.location,
            2..=7 => self.offsets,
            8 => self.width,
            _ => self.color,
        }
    }
}

/// Bias-corrected Adam moments over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step: 0,
        }
    }

    /// One update of `params` with learning rate `lr(index)`. No state changes if any
    /// gradient is non-finite; the error carries the first offending index.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: impl Fn(usize) -> f64) -> Result<(), usize> {
        assert_eq!(params.len(), self.first_moment.len());
        assert_eq!(grads.len(), params.len());
        if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
            return Err(bad);
        }
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powf(self.step as f64);
        let bc2 = 1.0 - beta2.powf(self.step as f64);
        for (k, ((p, &g), (m, v))) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
            .enumerate()
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr(k) * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Adam step over stroke latents with per-group learning rates.
pub fn adam_step(
    state: &mut AdamState,
    latent: &mut LatentParams,
    grads: &StrokeGrads,
    rates: &LearningRates,
) -> Result<(), OptimizeError> {
    if grads.len() != latent.len() || state.first_moment.len() != latent.len() * PARAMS_PER_STROKE {
        return Err(OptimizeError::ShapeMismatch {
            expected: latent.len() * PARAMS_PER_STROKE,
            actual: grads.len() * PARAMS_PER_STROKE,
        });
    }
    state
        .update(latent.as_flat_mut(), grads.as_flattened(), |k| {
            rates.for_coordinate(k % PARAMS_PER_STROKE)
        })
        .map_err(|k| OptimizeError::NonFiniteGradient {
            stroke: k / PARAMS_PER_STROKE,
            coordinate: k % PARAMS_PER_STROKE,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut st = AdamState::new(1, AdamConfig::default());
        let mut x = [3.0];
        st.update(&mut x, &[1.0], |_| 0.1).unwrap();
        assert!((x[0] - (3.0 - 0.1)).abs() < 1e-8);
        let mut st = AdamState::new(1, AdamConfig::default());
        let mut x = [3.0];
        st.update(&mut x, &[-250.0], |_| 0.1).unwrap();
        assert!((x[0] - 3.1).abs() < 1e-8);
    }

    #[test]
    fn zero_gradients_are_identity() {
        let mut st = AdamState::new(3, AdamConfig::default());
        let mut x = [1.0, -2.0, 0.5];
        for _ in 0..50 {
            st.update(&mut x, &[0.0; 3], |_| 1.0).unwrap();
            assert_eq!(x, [1.0, -2.0, 0.5]);
        }
        assert_eq!(st.step, 50);
    }

    #[test]
    fn quadratic_converges() {
        // f(x) = x^2 from x = 5 with lr 0.1
        let mut st = AdamState::new(1, AdamConfig::default());
        let mut x = [5.0];
        for _ in 0..100 {
            let g = [2.0 * x[0]];
            st.update(&mut x, &g, |_| 0.1).unwrap();
        }
        // independent scalar recurrence
        let (mut m, mut v, mut y) = (0.0f64, 0.0f64, 5.0f64);
        for t in 1..=100 {
            let g = 2.0 * y;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            y -= 0.1 * (m / (1.0 - 0.9f64.powi(t))) / ((v / (1.0 - 0.999f64.powi(t))).sqrt() + 1e-8);
        }
        assert!((x[0] - y).abs() < 1e-12);
        assert!(x[0].abs() < 0.5, "x = {}", x[0]);
    }

    #[test]
    fn nan_gradient_names_stroke_and_coordinate() {
        let mut latent = LatentParams {
            rows: vec![[0.0; 12]; 3],
        };
        let mut st = AdamState::new(36, AdamConfig::default());
        let mut g = vec![[0.0; 12]; 3];
        g[2][9] = f64::NAN;
        let err = adam_step(&mut st, &mut latent, &g, &LearningRates::default()).unwrap_err();
        assert_eq!(
            err,
            OptimizeError::NonFiniteGradient {
                stroke: 2,
                coordinate: 9
            }
        );
        assert_eq!(st.step, 0);
    }

    #[test]
    fn group_rates() {
        let mut latent = LatentParams { rows: vec![[0.0; 12]] };
        let mut st = AdamState::new(12, AdamConfig::default());
        let rates = LearningRates::default();
        adam_step(&mut st, &mut latent, &vec![[1.0; 12]], &rates).unwrap();
        for (k, z) in latent.rows[0].iter().enumerate() {
            assert!((z + rates.for_coordinate(k)).abs() < 1e-7, "coordinate {k}");
        }
        assert_eq!(rates.for_coordinate(1), 1.0);
        assert_eq!(rates.for_coordinate(7), 0.5);
        assert_eq!(rates.for_coordinate(8), 0.1);
        assert_eq!(rates.for_coordinate(11), 0.05);
    }
}

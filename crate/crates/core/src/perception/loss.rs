//! Content, style and total losses over a [`FeatureBank`], with the exact
//! gradient of the total loss with respect to the generated image.

use serde::{Deserialize, Serialize};

use super::bank::FeatureBank;
use super::features::{backward, forward, FeatureMap};
use super::PerceptionError;
use crate::image::Image;

/// Symmetric `N_l x N_l` matrix of channel inner products.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub size: usize,
    pub data: Vec<f64>,
}

impl GramMatrix {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }
}

/// `G[i][j] = sum_k phi[i][k] phi[j][k]` over spatial positions, unnormalized.
pub fn gram(features: &FeatureMap) -> GramMatrix {
    let n = features.channels;
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let fi = features.channel(i);
        for j in i..n {
            let v: f64 = fi.iter().zip(features.channel(j)).map(|(a, b)| a * b).sum();
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    GramMatrix { size: n, data }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    /// Content weight.
    pub alpha: f64,
    /// Style weight.
    pub beta: f64,
    /// Per-level style weights, one per bank layer.
    pub layer_weights: Vec<f64>,
    /// Bank level compared by the content loss.
    pub content_layer: usize,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 100.0,
            layer_weights: vec![1.0 / 3.0; 3],
            content_layer: 1,
        }
    }
}

impl LossWeights {
    /// Full invariant check: nonnegative weights, some positive `alpha`/`beta`,
    /// layer weights summing to one.
    pub fn validate(&self, bank: &FeatureBank) -> Result<(), PerceptionError> {
        self.check_shape(bank)?;
        if !(self.alpha > 0.0 || self.beta > 0.0) {
            return Err(PerceptionError::InvalidWeights("alpha or beta must be positive".into()));
        }
        let sum: f64 = self.layer_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(PerceptionError::InvalidWeights(format!(
                "layer weights sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    /// The part of [`LossWeights::validate`] the loss formulas need to be well defined.
    fn check_shape(&self, bank: &FeatureBank) -> Result<(), PerceptionError> {
        let layers = bank.layers().len();
        if self.layer_weights.len() != layers {
            return Err(PerceptionError::InvalidWeights(format!(
                "{} layer weights for a {layers}-layer bank",
                self.layer_weights.len()
            )));
        }
        if self.content_layer >= layers {
            return Err(PerceptionError::InvalidWeights(format!(
                "content layer {} out of range for a {layers}-layer bank",
                self.content_layer
            )));
        }
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(finite_nonneg(self.alpha)
            && finite_nonneg(self.beta)
            && self.layer_weights.iter().all(|&w| finite_nonneg(w)))
        {
            return Err(PerceptionError::InvalidWeights(
                "weights must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// One evaluation of the total loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub content: f64,
    pub style: f64,
    pub total: f64,
    /// `w_l * E_l` for every level; sums to `style`.
    pub style_layers: Vec<f64>,
}

/// Precomputed content features and style Grams for repeated evaluations
/// against the same targets.
#[derive(Debug, Clone)]
pub struct LossTarget {
    bank: FeatureBank,
    weights: LossWeights,
    content_height: usize,
    content_width: usize,
    content_features: FeatureMap,
    /// Style Grams divided by the style image's `M_l`.
    style_grams: Vec<GramMatrix>,
}

impl LossTarget {
    pub fn new(
        content: &Image,
        style: &Image,
        bank: &FeatureBank,
        weights: &LossWeights,
    ) -> Result<Self, PerceptionError> {
        weights.check_shape(bank)?;
        let content_features = forward(content, bank)?.0.levels.swap_remove(weights.content_layer);
        let style_grams = forward(style, bank)?
            .0
            .levels
            .iter()
            .map(|level| {
                let mut g = gram(level);
                let m = level.positions() as f64;
                g.data.iter_mut().for_each(|v| *v /= m);
                g
            })
            .collect();
        Ok(Self {
            bank: bank.clone(),
            weights: weights.clone(),
            content_height: content.height(),
            content_width: content.width(),
            content_features,
            style_grams,
        })
    }

    pub fn weights(&self) -> &LossWeights {
        &self.weights
    }

    pub fn bank(&self) -> &FeatureBank {
        &self.bank
    }

    fn check_generated(&self, generated: &Image) -> Result<(), PerceptionError> {
        if generated.height() != self.content_height || generated.width() != self.content_width {
            return Err(PerceptionError::DimensionMismatch {
                expected: (self.content_height, self.content_width),
                actual: (generated.height(), generated.width()),
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, generated: &Image) -> Result<LossReport, PerceptionError> {
        self.evaluate_inner(generated, false).map(|(r, _)| r)
    }

    /// Loss report and `d total / d generated` in image layout.
    pub fn evaluate_with_gradient(&self, generated: &Image) -> Result<(LossReport, Vec<f64>), PerceptionError> {
        self.evaluate_inner(generated, true)
            .map(|(r, g)| (r, g.expect("gradient requested")))
    }

    fn evaluate_inner(
        &self,
        generated: &Image,
        want_grad: bool,
    ) -> Result<(LossReport, Option<Vec<f64>>), PerceptionError> {
        self.check_generated(generated)?;
        let (pyramid, cache) = forward(generated, &self.bank)?;
        let w = &self.weights;
        let mut level_grads: Vec<Option<FeatureMap>> = vec![None; pyramid.levels.len()];

        let generated_content = &pyramid.levels[w.content_layer];
        let content: f64 = 0.5
            * generated_content
                .data
                .iter()
                .zip(&self.content_features.data)
                .map(|(g, c)| (g - c) * (g - c))
                .sum::<f64>();
        if want_grad && w.alpha != 0.0 {
            let mut d = generated_content.clone();
            for (x, c) in d.data.iter_mut().zip(&self.content_features.data) {
                *x = w.alpha * (*x - c);
            }
            level_grads[w.content_layer] = Some(d);
        }

        let mut style_layers = Vec::with_capacity(pyramid.levels.len());
        for (l, (level, target)) in pyramid.levels.iter().zip(&self.style_grams).enumerate() {
            let n = level.channels as f64;
            let m = level.positions() as f64;
            let g = gram(level);
            // E_l = 1/(4 N^2) * sum (G/M - S/M_s)^2, i.e. the 1/(4 N^2 M^2) form when sizes agree
            let diff: Vec<f64> = g.data.iter().zip(&target.data).map(|(a, b)| a / m - b).collect();
            let e = diff.iter().map(|d| d * d).sum::<f64>() / (4.0 * n * n);
            style_layers.push(w.layer_weights[l] * e);

            let scale = w.beta * w.layer_weights[l];
            if want_grad && scale != 0.0 {
                // dE/dG_ij = diff_ij / (2 N^2 M); dE/dphi = 2 (dE/dG) phi since dE/dG is symmetric
                let coef = scale / (n * n * m);
                let c = level.channels;
                let positions = level.positions();
                let mut d = FeatureMap::zeros(c, level.height, level.width);
                for i in 0..c {
                    let row = &mut d.data[i * positions..(i + 1) * positions];
                    for j in 0..c {
                        let k = coef * diff[i * c + j];
                        if k == 0.0 {
                            continue;
                        }
                        for (r, f) in row.iter_mut().zip(level.channel(j)) {
                            *r += k * f;
                        }
                    }
                }
                level_grads[l] = Some(match level_grads[l].take() {
                    Some(mut existing) => {
                        for (a, b) in existing.data.iter_mut().zip(d.data) {
                            *a += b;
                        }
                        existing
                    }
                    None => d,
                });
            }
        }

        let style: f64 = style_layers.iter().sum();
        let report = LossReport {
            content,
            style,
            total: w.alpha * content + w.beta * style,
            style_layers,
        };
        let grad = want_grad.then(|| backward(&self.bank, &cache, level_grads));
        Ok((report, grad))
    }
}

/// `1/2 * sum (phi_l(generated) - phi_l(content))^2` at `layer`.
pub fn content_loss(
    content: &Image,
    generated: &Image,
    bank: &FeatureBank,
    layer: usize,
) -> Result<f64, PerceptionError> {
    if !content.same_shape(generated) {
        return Err(PerceptionError::DimensionMismatch {
            expected: (content.height(), content.width()),
            actual: (generated.height(), generated.width()),
        });
    }
    let a = forward(content, bank)?.0;
    let b = forward(generated, bank)?.0;
    let (fa, fb) = (
        a.levels
            .get(layer)
            .ok_or_else(|| PerceptionError::InvalidWeights(format!("content layer {layer} out of range")))?,
        &b.levels[layer],
    );
    Ok(0.5
        * fa.data
            .iter()
            .zip(&fb.data)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>())
}

/// Weighted sum over levels of `1/(4 N_l^2 M_l^2) * sum (G_l(generated) - G_l(style))^2`.
pub fn style_loss(
    style: &Image,
    generated: &Image,
    bank: &FeatureBank,
    weights: &LossWeights,
) -> Result<f64, PerceptionError> {
    let w = LossWeights {
        alpha: 0.0,
        beta: 1.0,
        ..weights.clone()
    };
    Ok(LossTarget::new(generated, style, bank, &w)?.evaluate(generated)?.style)
}

/// `alpha * content_loss + beta * style_loss` with the per-level breakdown.
pub fn total_loss(
    content: &Image,
    style: &Image,
    generated: &Image,
    bank: &FeatureBank,
    weights: &LossWeights,
) -> Result<LossReport, PerceptionError> {
    LossTarget::new(content, style, bank, weights)?.evaluate(generated)
}

/// Exact `d total_loss / d generated`, laid out like the image buffer.
pub fn loss_image_gradient(
    content: &Image,
    style: &Image,
    generated: &Image,
    bank: &FeatureBank,
    weights: &LossWeights,
) -> Result<Vec<f64>, PerceptionError> {
    Ok(LossTarget::new(content, style, bank, weights)?
        .evaluate_with_gradient(generated)?
        .1)
}

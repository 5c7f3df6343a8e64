use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::PerceptionError;

pub const INPUT_CHANNELS: usize = 3;
pub const DEFAULT_LAYER_PLAN: [usize; 3] = [16, 32, 64];

/// 3x3 convolution followed by ReLU and 2x2 average pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub out_channels: usize,
    pub in_channels: usize,
    /// `out x in x 3 x 3`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    #[inline]
    pub fn weight(&self, out: usize, input: usize, di: usize, dj: usize) -> f64 {
        self.weights[((out * self.in_channels + input) * 3 + di) * 3 + dj]
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * 9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BankProvenance {
    Seeded(u64),
    Loaded,
}

/// Ordered convolutional layers producing the feature pyramid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    layers: Vec<ConvLayer>,
    provenance: BankProvenance,
}

impl FeatureBank {
    pub fn new(layers: Vec<ConvLayer>, provenance: BankProvenance) -> Result<Self, PerceptionError> {
        if layers.is_empty() {
            return Err(PerceptionError::InvalidBank("bank has no layers".into()));
        }
        let mut expected_in = INPUT_CHANNELS;
        for (k, layer) in layers.iter().enumerate() {
            if layer.in_channels != expected_in {
                return Err(PerceptionError::InvalidBank(format!(
                    "layer {k} expects {} input channels, previous layer produces {expected_in}",
                    layer.in_channels
                )));
            }
            if layer.out_channels == 0 {
                return Err(PerceptionError::InvalidBank(format!("layer {k} has no outputs")));
            }
            if layer.weights.len() != layer.out_channels * layer.in_channels * 9
                || layer.bias.len() != layer.out_channels
            {
                return Err(PerceptionError::InvalidBank(format!(
                    "layer {k} parameter count does not match its shape"
                )));
            }
            if !layer.weights.iter().chain(&layer.bias).all(|v| v.is_finite()) {
                return Err(PerceptionError::InvalidBank(format!(
                    "layer {k} has non-finite weights"
                )));
            }
            expected_in = layer.out_channels;
        }
        Ok(Self { layers, provenance })
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn provenance(&self) -> BankProvenance {
        self.provenance
    }

    /// Smallest image side the bank accepts: every layer halves the resolution.
    pub fn min_side(&self) -> usize {
        1 << self.layers.len()
    }
}

/// He-style random bank: weights ~ N(0, 2 / fan_in), zero biases.
///
/// Weights are rounded to `f32` so a bank survives a round trip through the
/// bank file format unchanged.
pub fn generate_bank(seed: u64, layer_plan: &[usize]) -> Result<FeatureBank, PerceptionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_channels = INPUT_CHANNELS;
    let mut layers = Vec::with_capacity(layer_plan.len());
    for &out_channels in layer_plan {
        let std = (2.0 / (in_channels * 9) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("std is positive");
        let weights = (0..out_channels * in_channels * 9)
            .map(|_| normal.sample(&mut rng) as f32 as f64)
            .collect();
        layers.push(ConvLayer {
            out_channels,
            in_channels,
            weights,
            bias: vec![0.0; out_channels],
        });
        in_channels = out_channels;
    }
    FeatureBank::new(layers, BankProvenance::Seeded(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = generate_bank(3, &DEFAULT_LAYER_PLAN).unwrap();
        let b = generate_bank(3, &DEFAULT_LAYER_PLAN).unwrap();
        assert_eq!(a, b);
        let bits = |bank: &FeatureBank| -> Vec<u64> {
            bank.layers()
                .iter()
                .flat_map(|l| l.weights.iter().map(|w| w.to_bits()))
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
        let c = generate_bank(4, &DEFAULT_LAYER_PLAN).unwrap();
        assert_ne!(bits(&a), bits(&c));
        assert_eq!(a.provenance(), BankProvenance::Seeded(3));
    }

    #[test]
    fn weight_scale_matches_fan_in() {
        let bank = generate_bank(0, &DEFAULT_LAYER_PLAN).unwrap();
        for layer in bank.layers() {
            let n = layer.weights.len() as f64;
            let mean = layer.weights.iter().sum::<f64>() / n;
            let var = layer.weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let target = (2.0 / layer.fan_in() as f64).sqrt();
            let rel = (var.sqrt() - target).abs() / target;
            assert!(
                rel < 0.2,
                "layer {}x{}: std {} vs {target}",
                layer.out_channels,
                layer.in_channels,
                var.sqrt()
            );
        }
    }

    #[test]
    fn shape_checks() {
        let mut bank = generate_bank(0, &[4, 8]).unwrap().layers().to_vec();
        bank[1].in_channels = 5;
        assert!(FeatureBank::new(bank, BankProvenance::Loaded).is_err());
        assert!(FeatureBank::new(vec![], BankProvenance::Loaded).is_err());
        let mut nan = generate_bank(0, &[2]).unwrap().layers().to_vec();
        nan[0].weights[0] = f64::NAN;
        assert!(FeatureBank::new(nan, BankProvenance::Loaded).is_err());
    }
}

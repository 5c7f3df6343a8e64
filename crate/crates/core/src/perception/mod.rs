//! Feature-space losses: a small convolutional pyramid stands in for a
//! pretrained classifier, and content/style losses are measured on its levels.

mod bank;
mod features;
mod loss;

use thiserror::Error;

pub use bank::{generate_bank, BankProvenance, ConvLayer, FeatureBank, DEFAULT_LAYER_PLAN, INPUT_CHANNELS};
pub use features::{extract_features, FeatureMap, FeaturePyramid};
pub use loss::{
    content_loss, gram, loss_image_gradient, style_loss, total_loss, GramMatrix, LossReport, LossTarget, LossWeights,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("invalid feature bank: {0}")]
    InvalidBank(String),
    #[error("invalid loss weights: {0}")]
    InvalidWeights(String),
    #[error("image is {height}x{width}, the feature bank needs at least {min}x{min}")]
    ImageTooSmall { height: usize, width: usize, min: usize },
    #[error("generated image is {actual:?}, content image is {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
}

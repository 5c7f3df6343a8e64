//! Everything needed to rerun a `paint` or `reconstruct` job.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::optimize::{AdamConfig, StrokeOptimConfig};
use crate::perception::{LossWeights, DEFAULT_LAYER_PLAN};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    /// Perceptual losses against content and style, then pixel refinement.
    Paint,
    /// Pixel L2 against the content image, strokes only.
    Reconstruct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum BankSource {
    Seeded { seed: u64, layer_plan: Vec<usize> },
    File { path: PathBuf },
}

impl Default for BankSource {
    fn default() -> Self {
        BankSource::Seeded {
            seed: 0,
            layer_plan: DEFAULT_LAYER_PLAN.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub version: u32,
    pub mode: RunMode,
    pub content: PathBuf,
    pub style: Option<PathBuf>,
    pub bank: BankSource,
    pub loss: LossWeights,
    pub optim: StrokeOptimConfig,
    pub pixel_learning_rate: f64,
    pub pixel_adam: AdamConfig,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    pub threads: Option<usize>,
    pub output_dir: PathBuf,
}

impl RunManifest {
    pub fn new(mode: RunMode, content: PathBuf, style: Option<PathBuf>, output_dir: PathBuf) -> Self {
        Self {
            version: MANIFEST_VERSION,
            mode,
            content,
            style,
            bank: BankSource::default(),
            loss: LossWeights::default(),
            optim: StrokeOptimConfig::default(),
            pixel_learning_rate: 0.01,
            pixel_adam: AdamConfig::default(),
            threads: None,
            output_dir,
        }
    }
}

pub fn save_manifest(manifest: &RunManifest, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(manifest).map_err(|e| IoError::Invalid(e.to_string()))?;
    fs::write(path, text).map_err(|e| IoError::write(path, e))
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<RunManifest, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| IoError::open(path, e))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| IoError::MalformedText {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if manifest.version != MANIFEST_VERSION {
        return Err(IoError::VersionMismatch {
            expected: MANIFEST_VERSION,
            found: manifest.version,
        });
    }
    Ok(manifest)
}

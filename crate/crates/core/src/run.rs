//! `paint` and `reconstruct` jobs driven by a [`RunManifest`].

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geometry::StrokeField;
use crate::image::Image;
use crate::io::{
    load_bank, load_png, save_manifest, save_png, save_strokes, write_loss_csv, BankSource, IoError, RunManifest,
    RunMode,
};
use crate::optimize::{optimize_strokes, pixel_refine, LossLog, Objective, OptimizeError, PixelRefineConfig};
use crate::perception::{generate_bank, FeatureBank, LossTarget, PerceptionError};
use crate::render::{render_soft, RenderError};

pub const STROKES_PNG: &str = "strokes.png";
pub const REFINED_PNG: &str = "refined.png";
pub const STROKES_JSON: &str = "strokes.json";
pub const LOSS_CSV: &str = "loss.csv";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("cannot create thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone)]
pub struct RunInputs {
    pub content: Image,
    pub style: Option<Image>,
    pub bank: FeatureBank,
}

#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub field: StrokeField,
    /// Soft render of `field`.
    pub strokes_image: Image,
    /// Pixel-refined image; `paint` only.
    pub refined: Option<Image>,
    /// Stroke iterations followed by pixel iterations.
    pub log: LossLog,
}

pub fn resolve_bank(source: &BankSource) -> Result<FeatureBank, RunError> {
    Ok(match source {
        BankSource::Seeded { seed, layer_plan } => generate_bank(*seed, layer_plan)?,
        BankSource::File { path } => load_bank(path)?,
    })
}

pub fn load_inputs(manifest: &RunManifest) -> Result<RunInputs, RunError> {
    let content = load_png(&manifest.content)?;
    let style = match (manifest.mode, &manifest.style) {
        (RunMode::Paint, Some(path)) => Some(load_png(path)?),
        (RunMode::Paint, None) => return Err(RunError::Config("paint needs a style image".into())),
        (RunMode::Reconstruct, _) => None,
    };
    Ok(RunInputs {
        content,
        style,
        bank: resolve_bank(&manifest.bank)?,
    })
}

fn with_threads<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T, RunError> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| RunError::ThreadPool(e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

/// Runs the job described by `manifest` on preloaded inputs. Snapshots are
/// passed to `on_snapshot` with their iteration number.
pub fn execute(
    manifest: &RunManifest,
    inputs: &RunInputs,
    on_snapshot: impl FnMut(usize, &StrokeField) + Send,
) -> Result<RunOutputs, RunError> {
    if manifest.threads == Some(0) {
        return Err(RunError::Config("threads must be positive".into()));
    }
    with_threads(manifest.threads, || execute_inner(manifest, inputs, on_snapshot))?
}

fn execute_inner(
    manifest: &RunManifest,
    inputs: &RunInputs,
    on_snapshot: impl FnMut(usize, &StrokeField),
) -> Result<RunOutputs, RunError> {
    let content = &inputs.content;
    let objective = match manifest.mode {
        RunMode::Paint => {
            let style = inputs
                .style
                .as_ref()
                .ok_or_else(|| RunError::Config("paint needs a style image".into()))?;
            Objective::Perceptual(LossTarget::new(content, style, &inputs.bank, &manifest.loss)?)
        }
        RunMode::Reconstruct => Objective::PixelL2(content.clone()),
    };
    if let Objective::Perceptual(target) = &objective {
        target.weights().validate(target.bank())?;
    }
    let (field, mut log) = optimize_strokes(content, &objective, &manifest.optim, on_snapshot)?;
    let (strokes_image, _) = render_soft(&field, &manifest.optim.render)?;
    let refined = match manifest.mode {
        RunMode::Paint => {
            let config = PixelRefineConfig {
                iterations: manifest.optim.schedule.pixel_iterations,
                learning_rate: manifest.pixel_learning_rate,
                adam: manifest.pixel_adam,
            };
            let (refined, pixel_log) = pixel_refine(&strokes_image, &objective, &config)?;
            log.extend_after(&pixel_log);
            Some(refined)
        }
        RunMode::Reconstruct => None,
    };
    Ok(RunOutputs {
        field,
        strokes_image,
        refined,
        log,
    })
}

/// Writes the run's files into `manifest.output_dir` and returns their paths.
pub fn write_outputs(manifest: &RunManifest, outputs: &RunOutputs) -> Result<Vec<PathBuf>, RunError> {
    let dir = &manifest.output_dir;
    create_dir(dir)?;
    let mut written = Vec::new();
    let mut path = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };
    save_png(&outputs.strokes_image, path(STROKES_PNG))?;
    if let Some(refined) = &outputs.refined {
        save_png(refined, path(REFINED_PNG))?;
    }
    save_strokes(&outputs.field, manifest.optim.render.background, path(STROKES_JSON))?;
    write_loss_csv(&outputs.log, path(LOSS_CSV))?;
    save_manifest(manifest, path(MANIFEST_JSON))?;
    Ok(written)
}

pub fn snapshot_path(output_dir: &Path, iteration: usize) -> PathBuf {
    output_dir
        .join(SNAPSHOT_DIR)
        .join(format!("strokes_{iteration:06}.json"))
}

pub fn create_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|source| {
        RunError::Io(IoError::Write {
            path: dir.to_path_buf(),
            source,
        })
    })
}

/// Loads inputs, runs, writes snapshots and outputs.
pub fn run_manifest(manifest: &RunManifest) -> Result<(RunOutputs, Vec<PathBuf>), RunError> {
    let inputs = load_inputs(manifest)?;
    let background = manifest.optim.render.background;
    let mut snapshot_error = None;
    if manifest.optim.schedule.snapshot_every > 0 {
        create_dir(&manifest.output_dir.join(SNAPSHOT_DIR))?;
    }
    let outputs = execute(manifest, &inputs, |iteration, field| {
        if snapshot_error.is_none() {
            if let Err(e) = save_strokes(field, background, snapshot_path(&manifest.output_dir, iteration)) {
                snapshot_error = Some(e);
            }
        }
    })?;
    if let Some(e) = snapshot_error {
        return Err(e.into());
    }
    let written = write_outputs(manifest, &outputs)?;
    Ok((outputs, written))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::load_strokes;

    fn tiny_manifest(dir: &Path, mode: RunMode) -> RunManifest {
        let content = Image::from_fn(16, 16, |i, j| [i as f64 / 15.0, j as f64 / 15.0, 0.4]).unwrap();
        let style = Image::from_fn(16, 16, |i, j| {
            if (i + j) % 4 < 2 {
                [0.9, 0.2, 0.1]
            } else {
                [0.1, 0.1, 0.8]
            }
        })
        .unwrap();
        save_png(&content, dir.join("c.png")).unwrap();
        save_png(&style, dir.join("s.png")).unwrap();
        let mut m = RunManifest::new(mode, dir.join("c.png"), Some(dir.join("s.png")), dir.join("out"));
        m.optim.strokes = 9;
        m.optim.schedule.stroke_iterations = 4;
        m.optim.schedule.pixel_iterations = 3;
        m.optim.schedule.snapshot_every = 2;
        m
    }

    #[test]
    fn paint_writes_everything() {
        let dir = tempfile::tempdir().unwrap();
        let m = tiny_manifest(dir.path(), RunMode::Paint);
        let (outputs, written) = run_manifest(&m).unwrap();
        assert_eq!(written.len(), 5);
        assert!(written.iter().all(|p| p.exists()));
        assert_eq!(outputs.log.records().len(), 5 + 4);
        assert!(snapshot_path(&m.output_dir, 2).exists());
        assert!(snapshot_path(&m.output_dir, 4).exists());
        let (field, _) = load_strokes(m.output_dir.join(STROKES_JSON)).unwrap();
        assert_eq!(field, outputs.field);
    }

    #[test]
    fn reconstruct_skips_refinement() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = tiny_manifest(dir.path(), RunMode::Reconstruct);
        m.style = None;
        m.optim.schedule.snapshot_every = 0;
        let (outputs, written) = run_manifest(&m).unwrap();
        assert!(outputs.refined.is_none());
        assert_eq!(written.len(), 4);
        assert_eq!(outputs.log.records().len(), 5);
    }

    #[test]
    fn thread_count_does_not_change_losses() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = tiny_manifest(dir.path(), RunMode::Paint);
        let inputs = load_inputs(&m).unwrap();
        m.threads = Some(1);
        let a = execute(&m, &inputs, |_, _| {}).unwrap();
        m.threads = Some(3);
        let b = execute(&m, &inputs, |_, _| {}).unwrap();
        let totals = |o: &RunOutputs| o.log.records().iter().map(|r| r.total_loss).collect::<Vec<_>>();
        assert_eq!(totals(&a), totals(&b));
        assert_eq!(a.field, b.field);
    }
}

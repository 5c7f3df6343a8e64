//! Command-line front end. Exit codes: 0 success, 1 runtime failure, 2 bad
//! arguments.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use crate::gradcheck::{run_suite, FdOptions};
use crate::io::{export_svg, load_manifest, load_strokes, save_bank, save_png, BankSource, RunManifest, RunMode};
use crate::perception::{generate_bank, LossWeights, DEFAULT_LAYER_PLAN};
use crate::render::{render_hard, render_soft, RenderConfig};
use crate::run::{run_manifest, RunError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "strokepaint",
    version,
    about = "Brush-stroke painting by differentiable rendering"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stylize --content with --style: stroke optimization, then pixel refinement.
    Paint(PaintArgs),
    /// Fit strokes to --content under a pixel L2 loss.
    Reconstruct(ReconstructArgs),
    /// Render a strokes JSON file to PNG and/or SVG.
    Render(RenderArgs),
    /// Finite-difference check of the renderer and loss gradients.
    GradCheck(GradCheckArgs),
    /// Write a seeded feature bank file.
    GenBank(GenBankArgs),
}

#[derive(Debug, Args)]
pub struct StrokeArgs {
    #[arg(long, default_value_t = 300)]
    pub strokes: usize,
    /// Stroke optimization iterations.
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Spine samples per stroke.
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    /// Candidate strokes per tile.
    #[arg(long, default_value_t = 20)]
    pub knn: usize,
    #[arg(long, default_value_t = 16)]
    pub tile_size: usize,
    #[arg(long, default_value_t = 5.0)]
    pub mask_sharpness: f64,
    #[arg(long, default_value_t = 2.0)]
    pub assign_sharpness: f64,
    /// Write a strokes JSON snapshot every this many iterations (0 = never).
    #[arg(long, default_value_t = 0)]
    pub snapshot_every: usize,
}

#[derive(Debug, Args)]
pub struct PaintArgs {
    /// Rerun a saved manifest; only --out and --threads may accompany it.
    #[arg(long, conflicts_with_all = [
        "content", "style", "bank", "bank_seed", "strokes", "iters", "seed", "samples", "knn",
        "tile_size", "mask_sharpness", "assign_sharpness", "snapshot_every", "pixel_iters",
        "alpha", "beta", "layer_weights", "content_layer",
    ])]
    pub manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    pub content: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    pub style: Option<PathBuf>,
    /// Output directory (defaults to the manifest's when rerunning).
    #[arg(long, required_unless_present = "manifest")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub stroke: StrokeArgs,
    #[arg(long, default_value_t = 100)]
    pub pixel_iters: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100.0)]
    pub beta: f64,
    /// Style weights per bank level, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub layer_weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    pub content_layer: usize,
    /// Feature bank file; a seeded bank is generated when absent.
    #[arg(long)]
    pub bank: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub bank_seed: u64,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub content: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub stroke: StrokeArgs,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("target").required(true).multiple(true).args(["out", "svg"]))]
pub struct RenderArgs {
    #[arg(long)]
    pub strokes: PathBuf,
    /// PNG output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// SVG output.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Nearest-stroke hard render instead of the soft render.
    #[arg(long)]
    pub hard: bool,
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, default_value_t = 20)]
    pub knn: usize,
    #[arg(long, default_value_t = 16)]
    pub tile_size: usize,
    #[arg(long, default_value_t = 5.0)]
    pub mask_sharpness: f64,
    #[arg(long, default_value_t = 2.0)]
    pub assign_sharpness: f64,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Random stroke fields to check.
    #[arg(long, default_value_t = 10)]
    pub fields: usize,
}

#[derive(Debug, Args)]
pub struct GenBankArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output channels per level, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LAYER_PLAN)]
    pub layers: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(msg) => Failure::Usage(msg),
            other => Failure::Runtime(other.into()),
        }
    }
}

/// Parses `argv` (program name first), runs, and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, Failure> {
    if cli.threads == Some(0) {
        return Err(Failure::Usage("--threads must be positive".into()));
    }
    match cli.command {
        Command::Paint(args) => paint(args, cli.threads),
        Command::Reconstruct(args) => reconstruct(args, cli.threads),
        Command::Render(args) => in_pool(cli.threads, || render(args)),
        Command::GradCheck(args) => in_pool(cli.threads, || grad_check(args)),
        Command::GenBank(args) => gen_bank(args),
    }
}

fn in_pool(threads: Option<usize>, job: impl FnOnce() -> Result<i32, Failure> + Send) -> Result<i32, Failure> {
    match threads {
        None => job(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("cannot create thread pool")?
            .install(job),
    }
}

fn render_config(
    samples: usize,
    knn: usize,
    tile_size: usize,
    mask: f64,
    assign: f64,
) -> Result<RenderConfig, Failure> {
    let config = RenderConfig {
        samples_per_curve: samples,
        knn,
        mask_sharpness: mask,
        assign_sharpness: assign,
        tile_size,
        ..RenderConfig::default()
    };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(config)
}

fn apply_stroke_args(manifest: &mut RunManifest, args: &StrokeArgs) -> Result<(), Failure> {
    if args.strokes == 0 {
        return Err(Failure::Usage("--strokes must be positive".into()));
    }
    manifest.optim.strokes = args.strokes;
    manifest.optim.render = render_config(
        args.samples,
        args.knn,
        args.tile_size,
        args.mask_sharpness,
        args.assign_sharpness,
    )?;
    manifest.optim.schedule.stroke_iterations = args.iters;
    manifest.optim.schedule.seed = args.seed;
    manifest.optim.schedule.snapshot_every = args.snapshot_every;
    Ok(())
}

fn paint(args: PaintArgs, threads: Option<usize>) -> Result<i32, Failure> {
    let manifest = match &args.manifest {
        Some(path) => {
            let mut m = load_manifest(path).map_err(|e| Failure::Usage(e.to_string()))?;
            if m.mode != RunMode::Paint {
                return Err(Failure::Usage(format!("{} is not a paint manifest", path.display())));
            }
            if let Some(out) = args.out {
                m.output_dir = out;
            }
            if threads.is_some() {
                m.threads = threads;
            }
            m
        }
        None => {
            let mut m = RunManifest::new(
                RunMode::Paint,
                args.content.expect("required by clap"),
                args.style,
                args.out.expect("required by clap"),
            );
            apply_stroke_args(&mut m, &args.stroke)?;
            m.optim.schedule.pixel_iterations = args.pixel_iters;
            m.loss = LossWeights {
                alpha: args.alpha,
                beta: args.beta,
                layer_weights: args
                    .layer_weights
                    .unwrap_or_else(|| LossWeights::default().layer_weights),
                content_layer: args.content_layer,
            };
            m.bank = match args.bank {
                Some(path) => BankSource::File { path },
                None => BankSource::Seeded {
                    seed: args.bank_seed,
                    layer_plan: DEFAULT_LAYER_PLAN.to_vec(),
                },
            };
            m.threads = threads;
            m
        }
    };
    let bank = crate::run::resolve_bank(&manifest.bank)?;
    manifest
        .loss
        .validate(&bank)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    run_and_report(&manifest)
}

fn reconstruct(args: ReconstructArgs, threads: Option<usize>) -> Result<i32, Failure> {
    let mut manifest = RunManifest::new(RunMode::Reconstruct, args.content, None, args.out);
    apply_stroke_args(&mut manifest, &args.stroke)?;
    manifest.optim.schedule.pixel_iterations = 0;
    manifest.loss.beta = 0.0;
    manifest.threads = threads;
    run_and_report(&manifest)
}

fn run_and_report(manifest: &RunManifest) -> Result<i32, Failure> {
    let clock = Instant::now();
    let (outputs, written) = run_manifest(manifest)?;
    let log = outputs.log.records();
    if let (Some(first), Some(last)) = (log.first(), log.last()) {
        eprintln!(
            "total loss {:.6e} -> {:.6e} over {} records in {:.1} s",
            first.total_loss,
            last.total_loss,
            log.len(),
            clock.elapsed().as_secs_f64()
        );
    }
    for path in written {
        println!("{}", path.display());
    }
    Ok(EXIT_OK)
}

fn render(args: RenderArgs) -> Result<i32, Failure> {
    let mut config = render_config(
        args.samples,
        args.knn,
        args.tile_size,
        args.mask_sharpness,
        args.assign_sharpness,
    )?;
    let (field, background) = load_strokes(&args.strokes).map_err(anyhow::Error::from)?;
    config.background = background;
    if let Some(out) = &args.out {
        let image = if args.hard {
            render_hard(&field, &config).map_err(anyhow::Error::from)?
        } else {
            render_soft(&field, &config).map_err(anyhow::Error::from)?.0
        };
        save_png(&image, out).map_err(anyhow::Error::from)?;
    }
    if let Some(svg) = &args.svg {
        export_svg(&field, &config, svg).map_err(anyhow::Error::from)?;
    }
    Ok(EXIT_OK)
}

fn grad_check(args: GradCheckArgs) -> Result<i32, Failure> {
    let options = FdOptions::default();
    let report = run_suite(args.seed, args.fields, &options).map_err(anyhow::Error::from)?;
    let max = report.max_rel_error();
    println!(
        "renderer: {} coordinates checked, {} excluded near argmin ties, max relative error {:.3e}",
        report.render.checks.len(),
        report.render.excluded.len(),
        report.render.max_rel_error()
    );
    println!(
        "loss: {} values checked, max relative error {:.3e}",
        report.loss.checks.len(),
        report.loss.max_rel_error()
    );
    println!("max relative error {max:.3e}");
    if max < 1e-4 {
        Ok(EXIT_OK)
    } else {
        if let Some(w) = report.render.worst() {
            eprintln!(
                "worst renderer coordinate: stroke {} coordinate {} analytic {:e} numeric {:e}",
                w.stroke, w.coordinate, w.analytic, w.numeric
            );
        }
        Ok(EXIT_FAILURE)
    }
}

fn gen_bank(args: GenBankArgs) -> Result<i32, Failure> {
    let bank = generate_bank(args.seed, &args.layers).map_err(|e| Failure::Usage(e.to_string()))?;
    save_bank(&bank, &args.out).map_err(anyhow::Error::from)?;
    Ok(EXIT_OK)
}

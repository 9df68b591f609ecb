//! `tubepath` command-line tool.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use tubepath::classifier::OracleClassifier;
use tubepath::io;
use tubepath::metrics::{dice, mean_centerline_error_with};
use tubepath::minpath::{apply_classifier_until, backtrace_full, rectified_patch_at, Solution};
use tubepath::sampler::pseudo_mask_from_centerline;
use tubepath::synth::generate_scenes;
use tubepath::trainer::{iterative_train, TrainingImage};
use tubepath::{BinaryMask, Centerline, GridImage, PixelCoord, ReferenceModel};

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "tubepath", version, about = "Minimal-path segmentation and centerline tracing of tubular structures")]
struct Cli {
    /// TOML file with configuration keys; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes (image, mask, centerlines, endpoints).
    Synth {
        /// Directory receiving scene_000, scene_001, ...
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Train a classifier with iterative tailored sampling.
    Train {
        /// Scene directory, or a directory of scene directories.
        train: PathBuf,
        /// Validation scene directory, or a directory of them.
        val: PathBuf,
        /// Run directory for snapshots, metrics.jsonl and model.bin.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Segment an image; writes mask.png and predecessors.bin.
    Infer {
        image: PathBuf,
        #[arg(long, value_name = "X,Y")]
        start: PixelCoord,
        /// Label pixels from this mask instead of running the model.
        #[arg(long, value_name = "FILE")]
        oracle_mask: Option<PathBuf>,
        /// Also write a contact sheet with this many rectified patches.
        #[arg(long, value_name = "N")]
        dump_patches: Option<usize>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Extract the centerline between two points.
    Trace {
        /// Input image; not needed with --archive.
        image: Option<PathBuf>,
        #[arg(long, value_name = "X,Y")]
        start: Option<PixelCoord>,
        #[arg(long, value_name = "X,Y")]
        end: PixelCoord,
        /// Re-trace from a predecessor archive written by `infer`.
        #[arg(long, value_name = "FILE", conflicts_with_all = ["image", "oracle_mask", "early_stop"])]
        archive: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        oracle_mask: Option<PathBuf>,
        /// Stop the solver as soon as the end point is reached.
        #[arg(long)]
        early_stop: bool,
        #[arg(short, long, default_value = "centerline.json")]
        output: PathBuf,
    },
    /// Compare a prediction with ground truth; prints a JSON report.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_enum, default_value_t = Metric::Dice)]
        metric: Metric,
    },
    /// Render an image with a tinted mask and drawn centerlines.
    Overlay {
        image: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Centerline file (single line or list of lines); repeatable.
        #[arg(long)]
        centerline: Vec<PathBuf>,
        #[arg(short, long, default_value = "overlay.png")]
        output: PathBuf,
    },
    /// Print the effective configuration as TOML.
    ShowConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    /// Dice overlap of two mask images.
    Dice,
    /// Mean distance from predicted centerline points to the nearest ground-truth point.
    Centerline,
}

enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<tubepath::Error> for Failure {
    fn from(e: tubepath::Error) -> Self {
        if e.is_data_error() {
            Failure::Data(e.to_string())
        } else {
            Failure::Internal(e.to_string())
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message().lines().next().unwrap_or("unknown failure"));
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let cfg = RunConfig::resolve(cli.config.as_deref(), &cli.overrides).map_err(Failure::Usage)?;
    cfg.validate().map_err(Failure::Usage)?;
    if !tubepath::exec::init_threads(cfg.threads) {
        return Err(Failure::Internal("could not start the worker pool".into()));
    }
    match cli.command {
        Command::Synth { output } => synth(&cfg, &output),
        Command::Train { train, val, output } => train_cmd(&cfg, &train, &val, &output),
        Command::Infer {
            image,
            start,
            oracle_mask,
            dump_patches,
            output,
        } => infer(&cfg, &image, start, oracle_mask.as_deref(), dump_patches, &output),
        Command::Trace {
            image,
            start,
            end,
            archive,
            oracle_mask,
            early_stop,
            output,
        } => {
            let line = match archive {
                Some(archive) => {
                    let field = io::load_predecessors(&archive)?;
                    if start.is_some_and(|s| s != field.start()) {
                        return Err(Failure::Usage(format!(
                            "--start differs from the archive start {}",
                            field.start()
                        )));
                    }
                    backtrace_full(&field, end)?
                }
                None => {
                    let image = image.ok_or_else(|| {
                        Failure::Usage("trace needs an image or --archive".into())
                    })?;
                    let start = start.ok_or_else(|| {
                        Failure::Usage("trace needs --start unless --archive is given".into())
                    })?;
                    let img = io::load_image(&image)?;
                    let stop = early_stop.then_some(end);
                    let sol = solve(&cfg, &img, start, oracle_mask.as_deref(), stop)?;
                    backtrace_full(&sol.field, end)?
                }
            };
            io::save_centerline(&line, &output)?;
            Ok(())
        }
        Command::Eval { pred, gt, metric } => eval(&cfg, &pred, &gt, metric),
        Command::Overlay {
            image,
            mask,
            centerline,
            output,
        } => {
            let img = io::load_image(&image)?;
            let mask = mask.map(|m| load_mask_for(&m, &img)).transpose()?;
            let mut lines = Vec::new();
            for path in &centerline {
                lines.extend(load_lines(path, Some(img.dims()))?);
            }
            io::save_rgb(&io::render_overlay(&img, mask.as_ref(), &lines), &output)?;
            Ok(())
        }
        Command::ShowConfig => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
    }
}

fn synth(cfg: &RunConfig, output: &Path) -> CmdResult {
    let scenes = generate_scenes(&cfg.scene(), cfg.scenes, cfg.execution())?;
    for (k, scene) in scenes.iter().enumerate() {
        scene.save(output.join(format!("scene_{k:03}")))?;
    }
    Ok(())
}

fn find_image(dir: &Path) -> Option<PathBuf> {
    ["image.png", "image.pgm"]
        .iter()
        .map(|name| dir.join(name))
        .find(|p| p.is_file())
}

/// `dir` itself if it holds an image, otherwise its subdirectories that do,
/// in name order.
fn scene_dirs(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    if find_image(dir).is_some() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let entries = fs::read_dir(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && find_image(p).is_some())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Failure::Data(format!("{}: no scene with image.png found", dir.display())));
    }
    Ok(dirs)
}

/// Loads a scene directory. Without mask.png, the mask is derived from
/// centerlines.json and an ignore band is placed around it.
fn load_training_image(cfg: &RunConfig, dir: &Path) -> Result<TrainingImage, Failure> {
    let image = io::load_image(find_image(dir).expect("scene_dirs checked the image"))?;
    let dims = image.dims();
    let lines_path = dir.join("centerlines.json");
    let lines = if lines_path.is_file() {
        Some(io::load_centerlines(&lines_path, Some(dims))?)
    } else {
        None
    };
    let mask_path = dir.join("mask.png");
    let (gt, ignore) = if mask_path.is_file() {
        (load_mask_for(&mask_path, &image)?, None)
    } else {
        let lines = lines.as_ref().ok_or_else(|| {
            Failure::Data(format!("{}: needs mask.png or centerlines.json", dir.display()))
        })?;
        let (fg, ignore) =
            pseudo_mask_from_centerline(lines, dims, cfg.dilation_radius, cfg.exclusion_radius)?;
        (fg, Some(ignore))
    };
    let endpoints_path = dir.join("endpoints.json");
    let start = if endpoints_path.is_file() {
        io::load_endpoints(&endpoints_path)?.first().map(|e| e.0)
    } else {
        lines.as_ref().and_then(|l| l.first()).map(|l| l.first())
    };
    let start = start.ok_or_else(|| {
        Failure::Data(format!("{}: needs endpoints.json or centerlines.json for a start point", dir.display()))
    })?;
    Ok(TrainingImage {
        image,
        gt,
        ignore,
        start,
    })
}

fn load_set(cfg: &RunConfig, dir: &Path) -> Result<Vec<TrainingImage>, Failure> {
    scene_dirs(dir)?
        .iter()
        .map(|d| load_training_image(cfg, d))
        .collect()
}

fn train_cmd(cfg: &RunConfig, train: &Path, val: &Path, output: &Path) -> CmdResult {
    let train = load_set(cfg, train)?;
    let val = load_set(cfg, val)?;
    let train_cfg = cfg.train(output.to_path_buf());
    let (_, run) = iterative_train(&train, &val, &train_cfg)?;
    let best = run.best_record();
    println!(
        "{}",
        json!({
            "iterations": run.records.len(),
            "best_iteration": best.iteration,
            "best_dice": best.dice,
            "model": output.join("model.bin"),
        })
    );
    Ok(())
}

fn load_mask_for(path: &Path, image: &GridImage) -> Result<BinaryMask, Failure> {
    let mask = io::load_mask(path)?;
    if mask.dims() != image.dims() {
        return Err(tubepath::Error::DimensionMismatch {
            expected: image.dims(),
            actual: mask.dims(),
        }
        .into());
    }
    Ok(mask)
}

fn solve(
    cfg: &RunConfig,
    image: &GridImage,
    start: PixelCoord,
    oracle_mask: Option<&Path>,
    stop_at: Option<PixelCoord>,
) -> Result<Solution, Failure> {
    let params = cfg.inference();
    let sol = match oracle_mask {
        Some(path) => {
            let mask = load_mask_for(path, image)?;
            apply_classifier_until(image, start, &OracleClassifier { mask: &mask }, &params, stop_at)?
        }
        None => {
            let model = ReferenceModel::load(&cfg.model)?;
            if (model.width(), model.length()) != (params.patch_width, params.trace_length) {
                return Err(Failure::Data(format!(
                    "model expects {}x{} patches but patch-width/trace-length are {}x{}",
                    model.width(),
                    model.length(),
                    params.patch_width,
                    params.trace_length
                )));
            }
            apply_classifier_until(image, start, &model, &params, stop_at)?
        }
    };
    Ok(sol)
}

fn infer(
    cfg: &RunConfig,
    image: &Path,
    start: PixelCoord,
    oracle_mask: Option<&Path>,
    dump_patches: Option<usize>,
    output: &Path,
) -> CmdResult {
    let img = io::load_image(image)?;
    let sol = solve(cfg, &img, start, oracle_mask, None)?;
    fs::create_dir_all(output).map_err(|e| Failure::Data(format!("{}: {e}", output.display())))?;
    io::save_mask(&sol.mask, output.join("mask.png"))?;
    io::save_predecessors(&sol.field, output.join("predecessors.bin"))?;
    if let Some(n) = dump_patches.filter(|&n| n > 0) {
        // Evenly spaced pixels in row-major order.
        let total = img.width() * img.height();
        let params = cfg.inference();
        let patches = (0..n.min(total))
            .map(|k| {
                let i = k * total / n.min(total);
                rectified_patch_at(&img, &sol.field, sol.field.coord(i), &params)
            })
            .collect::<tubepath::Result<Vec<_>>>()?;
        let cols = (patches.len() as f64).sqrt().ceil() as usize;
        if let Some(sheet) = io::patch_contact_sheet(&patches, cols) {
            io::save_gray(&sheet, output.join("patches.png"))?;
        }
    }
    Ok(())
}

/// Accepts either a single line `[[x,y],...]` or a list of lines.
fn load_lines(path: &Path, dims: Option<(usize, usize)>) -> Result<Vec<Centerline>, Failure> {
    match io::load_centerlines(path, dims) {
        Ok(lines) => Ok(lines),
        Err(list_err) => io::load_centerline(path, dims)
            .map(|l| vec![l])
            .map_err(|_| list_err.into()),
    }
}

fn eval(cfg: &RunConfig, pred: &Path, gt: &Path, metric: Metric) -> CmdResult {
    let report = match metric {
        Metric::Dice => {
            let value = dice(&io::load_mask(pred)?, &io::load_mask(gt)?)?;
            json!({ "metric": "dice", "value": value })
        }
        Metric::Centerline => {
            let paths = load_lines(pred, None)?;
            let gt_points: Vec<PixelCoord> = load_lines(gt, None)?
                .iter()
                .flat_map(|l| l.points().iter().copied())
                .collect();
            let err = mean_centerline_error_with(&paths, &gt_points, cfg.execution())?;
            json!({ "metric": "centerline", "value": err.mean, "n_points": err.points })
        }
    };
    println!("{report}");
    Ok(())
}

//! `mtht`: enhancement, phantom synthesis and ROC evaluation from the shell.

mod config;
mod dataset;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use mtht::error::Error;
use mtht::eval::{auc_summary_of, mean_roc, roc, roc_to_csv, roc_to_svg, RocResult};
use mtht::experiment::{reproduce_3d, MeasureReport, Reproduce3dConfig};
use mtht::image::{normalize, Image, Shape};
use mtht::io::{self, Format};
use mtht::measures::{enhance, EnhancementResult, MeasureKind, MeasureParams};
use mtht::synth::{generate, PhantomSpec};

use config::Overrides;

#[derive(Parser)]
#[command(name = "mtht", version, about = "Curvilinear structure enhancement with multiscale top-hat tensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enhance a 2D image (PNG, PGM, single-page TIFF or raw).
    Enhance2d(EnhanceArgs),
    /// Enhance a 3D volume (multi-page TIFF or raw).
    Enhance3d(EnhanceArgs),
    /// Generate a synthetic phantom and its ground truth.
    Synth(SynthArgs),
    /// Score a response image, or enhance and score a whole dataset directory.
    Eval(EvalArgs),
    /// Run the nine-volume tube-tree experiment with both measures.
    #[command(name = "reproduce-3d")]
    Reproduce3d(ReproduceArgs),
}

#[derive(Args, Clone, Debug, Default)]
struct MeasureFlags {
    #[arg(long)]
    measure: Option<MeasureKind>,
    /// Comma-separated line lengths, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    /// Number of line orientations.
    #[arg(long)]
    orientations: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// Fixed structureness weight; adaptive per scale when omitted.
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Invert intensities first, for dark structures on a bright background.
    #[arg(long)]
    invert: bool,
}

#[derive(Args, Debug)]
struct EnhanceArgs {
    #[arg(long)]
    input: PathBuf,
    /// Response image; 8-bit formats receive the response scaled to [0, 255].
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    measure: MeasureFlags,
    /// JSON file whose keys override the flags.
    #[arg(long)]
    json_config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Degraded phantom image.
    #[arg(long)]
    output: PathBuf,
    /// Ground-truth mask; defaults to `<stem>.truth.<ext>` next to the output.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Comma-separated extents, two for 2D or three for 3D.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    branches: Option<usize>,
    /// Tube radius bounds as `min,max`.
    #[arg(long, value_delimiter = ',')]
    radius: Option<Vec<f64>>,
    #[arg(long)]
    intensity: Option<f64>,
    /// Gaussian noise variance on the [0, 255] scale.
    #[arg(long)]
    noise: Option<f64>,
    /// Gaussian smoothing std; 0 disables.
    #[arg(long)]
    smooth: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    json_config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Response image, or a directory with `images/`, `truth/` and optional `masks/`.
    #[arg(long)]
    input: PathBuf,
    /// Ground truth for a single response image.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Field-of-view mask for a single response image.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    thresholds: Option<usize>,
    #[command(flatten)]
    measure: MeasureFlags,
    #[arg(long)]
    json_config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    /// Output directory.
    #[arg(long)]
    output: PathBuf,
    /// Edge length of each cubic volume.
    #[arg(long)]
    size: Option<usize>,
    /// Number of volumes.
    #[arg(long)]
    images: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    thresholds: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    smooth: Option<f64>,
    #[command(flatten)]
    measure: MeasureFlags,
    #[arg(long)]
    json_config: Option<PathBuf>,
}

/// A failure reported as one JSON line on stderr.
#[derive(Debug)]
struct Failure {
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl Failure {
    fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Failure {
            kind,
            message: message.into(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or_default();
            return report(Failure::new("usage", first.trim_start_matches("error: ")));
        }
    };
    match configure_threads().and_then(|()| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    eprintln!("{}", json!({ "error": f.kind, "message": f.message }));
    ExitCode::FAILURE
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("MTHT_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Failure::new("invalid_params", format!("MTHT_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::new("internal", e.to_string()))
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Enhance2d(args) => cmd_enhance(args, 2, "enhance2d"),
        Command::Enhance3d(args) => cmd_enhance(args, 3, "enhance3d"),
        Command::Synth(args) => cmd_synth(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Reproduce3d(args) => cmd_reproduce(args),
    }
}

/// Flags merged with the overrides file, resolved into pipeline parameters.
fn measure_params(flags: &MeasureFlags, file: &Overrides, ndim: usize) -> CliResult<(MeasureParams, bool)> {
    let measure = file.measure.or(flags.measure).unwrap_or(MeasureKind::Vesselness);
    let mut params = match ndim {
        3 => MeasureParams::default_3d(measure),
        _ => MeasureParams::default_2d(measure),
    };
    if let Some(scales) = file.scales.clone().or_else(|| flags.scales.clone()) {
        params.scales = mtht::morphology::ScaleSet::new(scales)?;
    }
    if let Some(n) = file.orientations.or(flags.orientations) {
        params.n_orientations = n;
    }
    if let Some(beta) = file.beta.or(flags.beta) {
        params.beta = beta;
    }
    if let Some(alpha) = file.alpha.or(flags.alpha) {
        params.alpha = alpha;
    }
    params.c = file.c.or(flags.c);
    params.validate()?;
    Ok((params, file.invert.unwrap_or(flags.invert)))
}

/// Reflects intensities within their own range.
fn invert(img: &Image) -> CliResult<Image> {
    let (lo, hi) = img.min_max();
    Ok(img.map(|v| lo + hi - v)?)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|source| {
        Failure::from(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("values serialize");
    text.push('\n');
    write_file(path, text)
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|source| {
        Failure::from(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

/// `<dir>/<stem>.<suffix>` for an output file.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("output");
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Saves a `[0, 1]` map, stretched to `[0, 255]` for 8-bit formats.
fn save_unit(img: &Image, path: &Path) -> CliResult<()> {
    if Format::from_path(path)?.is_8bit() {
        io::save(&img.map(|v| v * 255.0)?, path)?;
    } else {
        io::save(img, path)?;
    }
    Ok(())
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn cmd_enhance(args: EnhanceArgs, ndim: usize, command: &str) -> CliResult<()> {
    let file = Overrides::load(args.json_config.as_deref())?;
    let (params, inverted) = measure_params(&args.measure, &file, ndim)?;
    let mut img = io::load(&args.input, ndim)?;
    if inverted {
        img = invert(&img)?;
    }
    let EnhancementResult {
        response,
        params,
        effective_c,
        ..
    } = enhance(&img, &params)?;
    save_unit(&response, &args.output)?;
    write_json(
        &sibling(&args.output, "params.json"),
        &json!({
            "command": command,
            "input": path_str(&args.input),
            "output": path_str(&args.output),
            "config": Overrides::from_params(&params, inverted),
            "effective_c": effective_c,
            "version": env!("CARGO_PKG_VERSION"),
        }),
    )
}

fn cmd_synth(args: SynthArgs) -> CliResult<()> {
    let file = Overrides::load(args.json_config.as_deref())?;
    let seed = file.seed.or(args.seed).unwrap_or(0);
    let dims = file.dims.clone().or(args.dims).unwrap_or_else(|| vec![256, 256]);
    let shape = Shape::from_dims(&dims)?;
    let mut spec = match shape.ndim() {
        3 => PhantomSpec::default_3d(9, seed),
        _ => PhantomSpec::default_2d(seed),
    };
    spec.dims = shape;
    if let Some(n) = file.branches.or(args.branches) {
        spec.n_branches = n;
    }
    if let Some(r) = file.radius.clone().or(args.radius) {
        spec.radius_range = match r[..] {
            [lo, hi] => [lo, hi],
            [r] => [r, r],
            _ => return Err(Failure::new("invalid_params", "radius takes `min,max`")),
        };
    }
    if let Some(v) = file.intensity.or(args.intensity) {
        spec.intensity = v;
    }
    if let Some(v) = file.noise.or(args.noise) {
        spec.noise_variance = v;
    }
    if let Some(v) = file.smooth.or(args.smooth) {
        spec.smooth_std = v;
    }
    let phantom = generate(&spec)?;
    let truth_path = args.truth.unwrap_or_else(|| {
        let ext = args.output.extension().and_then(|e| e.to_str()).unwrap_or("png");
        sibling(&args.output, &format!("truth.{ext}"))
    });
    io::save(&phantom.image, &args.output)?;
    save_unit(&phantom.truth.to_image(1.0), &truth_path)?;
    write_json(
        &sibling(&args.output, "params.json"),
        &json!({
            "command": "synth",
            "output": path_str(&args.output),
            "truth": path_str(&truth_path),
            "spec": spec,
            "version": env!("CARGO_PKG_VERSION"),
        }),
    )
}

fn n_thresholds(flag: Option<usize>, file: &Overrides) -> usize {
    file.thresholds.or(flag).unwrap_or(mtht::eval::DEFAULT_THRESHOLDS)
}

fn cmd_eval(args: EvalArgs) -> CliResult<()> {
    let file = Overrides::load(args.json_config.as_deref())?;
    let n = n_thresholds(args.thresholds, &file);
    create_dir(&args.output)?;
    if args.input.is_dir() {
        return eval_dataset(&args, &file, n);
    }
    let truth_path = args
        .truth
        .as_deref()
        .ok_or_else(|| Failure::new("usage", "--truth is required when --input is a file"))?;
    let response = normalize(&io::load_any(&args.input)?);
    let ndim = response.ndim();
    let truth = io::load_mask(truth_path, ndim)?;
    let mask = args.mask.as_deref().map(|m| io::load_mask(m, ndim)).transpose()?;
    let result = roc(&response, &truth, mask.as_ref(), n)?;
    let name = args
        .input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("response")
        .to_string();
    write_eval_outputs(&args.output, &[(name, result)])?;
    write_json(
        &args.output.join("params.json"),
        &json!({
            "command": "eval",
            "input": path_str(&args.input),
            "truth": path_str(truth_path),
            "mask": args.mask.as_deref().map(path_str),
            "thresholds": n,
            "version": env!("CARGO_PKG_VERSION"),
        }),
    )
}

fn eval_dataset(args: &EvalArgs, file: &Overrides, n: usize) -> CliResult<()> {
    let entries = dataset::scan(&args.input)?;
    let ndim = io::load_any(&entries[0].image)?.ndim();
    let (params, inverted) = measure_params(&args.measure, file, ndim)?;
    let scored: Vec<(String, RocResult)> = entries
        .par_iter()
        .map(|entry| -> CliResult<(String, RocResult)> {
            let mut img = io::load(&entry.image, ndim)?;
            if inverted {
                img = invert(&img)?;
            }
            let truth = io::load_mask(&entry.truth, ndim)?;
            let mask = entry.mask.as_deref().map(|m| io::load_mask(m, ndim)).transpose()?;
            let response = enhance(&img, &params)?.response;
            Ok((entry.name.clone(), roc(&response, &truth, mask.as_ref(), n)?))
        })
        .collect::<CliResult<_>>()?;
    write_eval_outputs(&args.output, &scored)?;
    write_json(
        &args.output.join("params.json"),
        &json!({
            "command": "eval",
            "input": path_str(&args.input),
            "images": entries.iter().map(|e| e.name.as_str()).collect::<Vec<_>>(),
            "masked": entries.iter().all(|e| e.mask.is_some()),
            "thresholds": n,
            "config": Overrides::from_params(&params, inverted),
            "version": env!("CARGO_PKG_VERSION"),
        }),
    )
}

/// Writes `roc.csv` (mean curve), `per_image.csv`, `summary.json` and `roc.svg`.
fn write_eval_outputs(dir: &Path, scored: &[(String, RocResult)]) -> CliResult<()> {
    let results: Vec<RocResult> = scored.iter().map(|(_, r)| r.clone()).collect();
    let mean = mean_roc(&results)?;
    let mut per_image = String::from("image,auc\n");
    for (name, r) in scored {
        per_image.push_str(&format!("{name},{}\n", r.auc));
    }
    write_file(&dir.join("roc.csv"), roc_to_csv(&mean))?;
    write_file(&dir.join("per_image.csv"), per_image)?;
    write_json(&dir.join("summary.json"), &auc_summary_of(&results)?)?;
    write_file(&dir.join("roc.svg"), roc_to_svg(&[("mean", &mean)]))
}

fn cmd_reproduce(args: ReproduceArgs) -> CliResult<()> {
    let file = Overrides::load(args.json_config.as_deref())?;
    let mut config = Reproduce3dConfig::default();
    if let Some(v) = file.size.or(args.size) {
        config.size = v;
    }
    if let Some(v) = file.images.or(args.images) {
        config.n_images = v;
    }
    if let Some(v) = file.seed.or(args.seed) {
        config.seed = v;
    }
    if let Some(v) = file.noise.or(args.noise) {
        config.noise_variance = v;
    }
    if let Some(v) = file.smooth.or(args.smooth) {
        config.smooth_std = v;
    }
    config.n_thresholds = n_thresholds(args.thresholds, &file);
    let (params, inverted) = measure_params(&args.measure, &file, 3)?;
    if inverted {
        return Err(Failure::new("invalid_params", "reproduce-3d phantoms are bright on dark; --invert does not apply"));
    }
    config.params = params;
    create_dir(&args.output)?;
    let reports = reproduce_3d(&config)?;

    let mut per_image = String::from("measure,image,n_branches,auc\n");
    for report in &reports {
        for (k, r) in report.per_image.iter().enumerate() {
            per_image.push_str(&format!("{},{},{},{}\n", report.measure.name(), k + 1, k + 1, r.auc));
        }
    }
    write_file(&args.output.join("per_image_auc.csv"), per_image)?;
    for MeasureReport {
        measure,
        mean_curve,
        summary,
        ..
    } in &reports
    {
        write_file(&args.output.join(format!("roc_mean_{}.csv", measure.name())), roc_to_csv(mean_curve))?;
        write_json(&args.output.join(format!("summary_{}.json", measure.name())), summary)?;
        println!(
            "{}: auc_mean={:.6} auc_std={:.6}",
            measure.name(),
            summary.auc_mean,
            summary.auc_std
        );
    }
    let curves: Vec<(&str, &RocResult)> = reports.iter().map(|r| (r.measure.name(), &r.mean_curve)).collect();
    write_file(&args.output.join("roc_mean.svg"), roc_to_svg(&curves))?;
    write_json(
        &args.output.join("params.json"),
        &json!({
            "command": "reproduce-3d",
            "config": config,
            "version": env!("CARGO_PKG_VERSION"),
        }),
    )
}

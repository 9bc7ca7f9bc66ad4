use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use annofix_core::metrics::{perturb_annotations, Spread, DEFAULT_MIN_SPEED};
use annofix_core::pipeline::{CorrectionConfig, TrackDiagnostics};
use annofix_core::synth::generate;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::parallel::{available_threads, correct_scene_parallel};
use crate::report::build_report;

/// Refines 3D box annotations of moving objects against the raw LiDAR
/// points they were drawn from.
#[derive(Debug, Parser)]
#[command(name = "annofix", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene with known ground truth.
    Synth(SynthArgs),
    /// Correct every track of a scene.
    Correct(CorrectArgs),
    /// Compare corrected boxes with the originals and write reports.
    Metrics(MetricsArgs),
    /// Inject Gaussian position errors into the boxes of moving objects.
    Perturb(PerturbArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Overrides `synth.seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    #[arg(long, value_name = "DIR")]
    pub scene: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long, value_name = "DIR")]
    pub scene: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub corrected: PathBuf,
    /// Directory holding `truth.jsonl`.
    #[arg(long, value_name = "DIR")]
    pub truth: Option<PathBuf>,
    /// Boxes slower than this (m/s) are left out of the error statistics.
    #[arg(long, default_value_t = DEFAULT_MIN_SPEED)]
    pub min_speed: f64,
    #[arg(long, value_name = "DIR")]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long, value_name = "DIR")]
    pub scene: PathBuf,
    /// Three standard deviations of the longitudinal offset, in meters.
    #[arg(long, allow_negative_numbers = true)]
    pub sdede_x: f64,
    /// Three standard deviations of the lateral offset, in meters.
    #[arg(long, allow_negative_numbers = true)]
    pub sdede_y: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Correct(a) => correct(&a),
        Command::Metrics(a) => metrics(&a),
        Command::Perturb(a) => perturb(&a),
    }
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn refuse_in_place(input: &Path, out: &Path) -> Result<()> {
    if same_dir(input, out) {
        return Err(Error::Usage(format!(
            "output directory {} is the input directory",
            out.display()
        )));
    }
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&args.config)?.synth(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let (scene, truth) = generate(&cfg)?;
    io::write_scene(&scene, &args.out)?;
    io::write_truth(&truth, &args.out)?;
    println!(
        "wrote {} boxes over {} samples to {}",
        scene.annotations.len(),
        scene.num_samples(),
        args.out.display()
    );
    Ok(())
}

fn describe(d: &TrackDiagnostics) -> String {
    match (d.skipped, d.initial_cost, d.final_cost) {
        (Some(reason), _, _) => format!("skipped ({})", reason.as_str()),
        (None, Some(a), Some(b)) => format!("cost {a:.3} -> {b:.3}, {} evaluations", d.evaluations),
        _ => String::from("done"),
    }
}

pub fn correct(args: &CorrectArgs) -> Result<()> {
    refuse_in_place(&args.scene, &args.out)?;
    let threads = match args.threads {
        Some(0) => return Err(Error::Usage("--threads must be at least 1".into())),
        Some(n) => n,
        None => available_threads(),
    };
    let run_config = args.config.as_deref().map(RunConfig::load).transpose()?;
    let scene = io::read_scene(&args.scene)?;
    let cfg = match &run_config {
        Some(c) => c.correction_for(&scene),
        None => CorrectionConfig::for_scene(&scene),
    };
    let start = Instant::now();
    let progress = |d: &TrackDiagnostics, done: usize, total: usize| {
        println!(
            "[{done}/{total}] {} ({} boxes): {}",
            d.track_id,
            d.boxes,
            describe(d)
        );
    };
    let result = correct_scene_parallel(&scene, &cfg, threads, Some(&progress))?;
    io::write_corrected(&result, &args.out)?;
    let skipped = result
        .diagnostics
        .iter()
        .filter(|d| d.skipped.is_some())
        .count();
    println!(
        "corrected {} tracks ({skipped} skipped) on {threads} thread{} in {:.2} s",
        result.diagnostics.len() - skipped,
        if threads == 1 { "" } else { "s" },
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

pub fn metrics(args: &MetricsArgs) -> Result<()> {
    if !(args.min_speed.is_finite() && args.min_speed >= 0.0) {
        return Err(Error::Usage(
            "--min-speed must be a non-negative number".into(),
        ));
    }
    let scene = io::read_scene(&args.scene)?;
    let corrected = io::read_corrected(&args.corrected)?;
    let truth = args.truth.as_deref().map(io::read_truth).transpose()?;
    let report = build_report(&scene, &corrected, truth.as_ref(), args.min_speed)?;
    report.write(&args.report)?;
    print!("{}", report.summary());
    println!("report written to {}", args.report.display());
    Ok(())
}

pub fn perturb(args: &PerturbArgs) -> Result<()> {
    let valid = |v: f64| v.is_finite() && v >= 0.0;
    if !valid(args.sdede_x) || !valid(args.sdede_y) {
        return Err(Error::Usage(
            "--sdede-x and --sdede-y must be non-negative".into(),
        ));
    }
    refuse_in_place(&args.scene, &args.out)?;
    let scene = io::read_scene(&args.scene)?;
    std::fs::create_dir_all(args.out.join(io::POINTS_DIR)).map_err(|e| Error::io(&args.out, e))?;
    for name in [io::SCENE_FILE, io::EGO_FILE] {
        io::copy_file(&args.scene.join(name), &args.out.join(name))?;
    }
    for i in 0..scene.num_samples() {
        io::copy_file(
            &io::points_path(&args.scene, i),
            &io::points_path(&args.out, i),
        )?;
    }
    let truth = args.scene.join(io::TRUTH_FILE);
    if truth.exists() {
        io::copy_file(&truth, &args.out.join(io::TRUTH_FILE))?;
    }
    let spread = Spread {
        x: args.sdede_x,
        y: args.sdede_y,
    };
    if spread.x == 0.0 && spread.y == 0.0 {
        io::copy_file(
            &args.scene.join(io::ANNOTATIONS_FILE),
            &args.out.join(io::ANNOTATIONS_FILE),
        )?;
    } else {
        let perturbed =
            perturb_annotations(&scene.annotations, spread, args.seed, DEFAULT_MIN_SPEED);
        io::write_annotations(&perturbed, &args.out)?;
    }
    println!("wrote perturbed scene to {}", args.out.display());
    Ok(())
}

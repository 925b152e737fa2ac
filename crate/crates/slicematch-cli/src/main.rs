//! `slicematch` command line: measure-transfer runs with trajectory and
//! snapshot artifacts, SW₂ estimation, and diagnostic check suites.
//!
//! Every command is deterministic given its full flag set; seeds default to
//! a fixed constant rather than entropy.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use slicematch::imageio::{self, ConversionMode, GrayImage, RenderStyle};
use slicematch::measure::{format_point_cloud, read_point_cloud, write_point_cloud};
use slicematch::oracle;
use slicematch::scheme::{self, Diagnostics, Schedule};
use slicematch::slicing::{self, DirectionSampler};
use slicematch::DiscreteMeasure;

/// Default seed for every command; pass `--seed` to change it.
const DEFAULT_SEED: u64 = 42;
/// Offsets deriving the auxiliary RNG streams from the main seed. Source and
/// target share the conversion stream so identical image inputs convert to
/// identical measures.
const SW2_SEED_OFFSET: u64 = 0x51_1CE0;
const SAMPLE_SEED_OFFSET: u64 = 1;

#[derive(Parser)]
#[command(
    name = "slicematch",
    about = "Iterative slice-matching transfer between discrete measures",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the stochastic j-slice matching scheme and write trajectory CSV,
    /// snapshots, the final measure, and the frozen configuration
    Morph(MorphArgs),
    /// Estimate the sliced Wasserstein distance between two inputs
    Sw2(Sw2Args),
    /// Run a diagnostic battery and exit nonzero on any violation
    Check(CheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    InverseK,
    LogOverK,
    Constant,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    WeightedGrid,
    Sampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum RenderArg {
    Histogram,
    Splat,
}

#[derive(Args)]
struct MorphArgs {
    /// rerun a previously written config.json verbatim
    #[arg(long, value_name = "FILE", exclusive = true)]
    config: Option<PathBuf>,
    /// source input: point-cloud text file, .png, or .pgm
    #[arg(long, required_unless_present = "config")]
    source: Option<PathBuf>,
    /// target input: point-cloud text file, .png, or .pgm
    #[arg(long, required_unless_present = "config")]
    target: Option<PathBuf>,
    /// number of matched directions j (defaults to the dimension n)
    #[arg(long)]
    slices: Option<usize>,
    #[arg(long, value_enum, default_value = "log-over-k")]
    schedule: ScheduleArg,
    /// step size for the constant schedule
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// iteration count K
    #[arg(long, default_value_t = 30)]
    iters: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// directions per SW₂ diagnostic estimate (0 disables the estimates)
    #[arg(long, default_value_t = 2000)]
    sw2_dirs: usize,
    /// snapshot stride in iterations (0 disables snapshots)
    #[arg(long, default_value_t = 1)]
    snap_every: usize,
    /// output directory
    #[arg(long, required_unless_present = "config")]
    out: Option<PathBuf>,
    /// image-to-measure conversion for image inputs
    #[arg(long, value_enum, default_value = "sampled")]
    mode: ModeArg,
    /// atom count for sampled conversion
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    /// snapshot rendering style
    #[arg(long, value_enum, default_value = "histogram")]
    render: RenderArg,
    /// splat kernel bandwidth in pixels
    #[arg(long, default_value_t = 1.0)]
    bandwidth: f64,
}

#[derive(Args)]
struct Sw2Args {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// number of sampled directions
    #[arg(long, default_value_t = 2000)]
    sw2_dirs: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// printed decimal digits
    #[arg(long, default_value_t = 6)]
    digits: usize,
    /// image-to-measure conversion for image inputs
    #[arg(long, value_enum, default_value = "weighted-grid")]
    mode: ModeArg,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    /// consecutive-iterates identity, with exact-solver confirmation
    Consecutive,
    /// full-step repeated-frame stationarity
    Stationarity,
    /// SW₂ ≤ W₂ against the exact solver
    Bounds,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, value_enum)]
    suite: SuiteArg,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

/// The resolved, reproducible description of a morph run; written verbatim
/// to `<out>/config.json` and accepted back via `--config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunConfig {
    source: PathBuf,
    target: PathBuf,
    slices: Option<usize>,
    schedule: String,
    gamma: f64,
    iters: usize,
    seed: u64,
    sw2_dirs: usize,
    snap_every: usize,
    out: PathBuf,
    mode: String,
    samples: usize,
    render: String,
    bandwidth: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Morph(args) => cmd_morph(args),
        Command::Sw2(args) => cmd_sw2(args),
        Command::Check(args) => cmd_check(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn is_image_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some(ext) if ext.eq_ignore_ascii_case("png") || ext.eq_ignore_ascii_case("pgm")
    )
}

fn load_measure(
    path: &Path,
    mode: &str,
    samples: usize,
    sample_seed: u64,
) -> Result<(DiscreteMeasure, Option<(usize, usize)>)> {
    if is_image_path(path) {
        let img = GrayImage::read(path)
            .with_context(|| format!("reading image {}", path.display()))?;
        let conversion = match mode {
            "weighted-grid" => ConversionMode::WeightedGrid,
            "sampled" => ConversionMode::Sampled {
                count: samples,
                seed: sample_seed,
            },
            other => bail!("unknown conversion mode `{other}`"),
        };
        let m = imageio::image_to_measure(&img, &conversion)?;
        Ok((m, Some((img.width(), img.height()))))
    } else {
        let m = read_point_cloud(path)
            .with_context(|| format!("reading point cloud {}", path.display()))?;
        Ok((m, None))
    }
}

fn schedule_from_config(name: &str, gamma: f64) -> Result<Schedule> {
    Ok(match name {
        "inverse-k" => Schedule::inverse_k(),
        "log-over-k" => Schedule::log_over_k(),
        "constant" => Schedule::constant(gamma)?,
        other => bail!("unknown schedule `{other}`"),
    })
}

fn cmd_morph(args: MorphArgs) -> Result<ExitCode> {
    let config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str::<RunConfig>(&text).context("parsing config")?
        }
        None => RunConfig {
            source: args.source.clone().expect("required by clap"),
            target: args.target.clone().expect("required by clap"),
            slices: args.slices,
            schedule: match args.schedule {
                ScheduleArg::InverseK => "inverse-k",
                ScheduleArg::LogOverK => "log-over-k",
                ScheduleArg::Constant => "constant",
            }
            .to_string(),
            gamma: args.gamma,
            iters: args.iters,
            seed: args.seed,
            sw2_dirs: args.sw2_dirs,
            snap_every: args.snap_every,
            out: args.out.clone().expect("required by clap"),
            mode: match args.mode {
                ModeArg::WeightedGrid => "weighted-grid",
                ModeArg::Sampled => "sampled",
            }
            .to_string(),
            samples: args.samples,
            render: match args.render {
                RenderArg::Histogram => "histogram",
                RenderArg::Splat => "splat",
            }
            .to_string(),
            bandwidth: args.bandwidth,
        },
    };

    let (source, source_dims) = load_measure(
        &config.source,
        &config.mode,
        config.samples,
        config.seed.wrapping_add(SAMPLE_SEED_OFFSET),
    )?;
    let (target, _) = load_measure(
        &config.target,
        &config.mode,
        config.samples,
        config.seed.wrapping_add(SAMPLE_SEED_OFFSET),
    )?;
    let n = source.dim();
    let j = config.slices.unwrap_or(n);
    let schedule = schedule_from_config(&config.schedule, config.gamma)?;

    fs::create_dir_all(&config.out)
        .with_context(|| format!("creating output directory {}", config.out.display()))?;

    let mut sampler = DirectionSampler::haar(config.seed);
    let diagnostics = Diagnostics {
        sw2_directions: config.sw2_dirs,
        sw2_seed: config.seed.wrapping_add(SW2_SEED_OFFSET),
        retain_measures: true,
    };
    let trajectory = scheme::run(
        &source,
        &target,
        j,
        &schedule,
        &mut sampler,
        config.iters,
        &diagnostics,
    )?;

    trajectory.write_csv(config.out.join("trajectory.csv"))?;
    write_point_cloud(config.out.join("final_measure.txt"), &trajectory.final_measure)?;
    fs::write(
        config.out.join("config.json"),
        serde_json::to_string_pretty(&config)?,
    )?;

    if config.snap_every > 0 && n == 2 {
        let (w, h) = source_dims.unwrap_or((64, 64));
        let style = match config.render.as_str() {
            "histogram" => RenderStyle::Histogram,
            "splat" => RenderStyle::GaussianSplat {
                bandwidth: config.bandwidth,
            },
            other => bail!("unknown render style `{other}`"),
        };
        let mut ks: Vec<usize> = (0..=config.iters).step_by(config.snap_every).collect();
        if *ks.last().unwrap() != config.iters {
            ks.push(config.iters);
        }
        for k in ks {
            let m = trajectory.measure_at(k)?;
            let rendered = imageio::measure_to_image(m, w, h, &style)?;
            rendered
                .image
                .write(config.out.join(format!("step_{k}.png")))?;
        }
    }

    let initial = trajectory.initial_sw2.map(|e| e.value);
    let final_est = trajectory.steps.last().and_then(|s| s.sw2).map(|e| e.value);
    match (initial, final_est) {
        (Some(i), Some(f)) => println!(
            "morph: {} iterations, SW2 {i:.6} -> {f:.6}, artifacts in {}",
            config.iters,
            config.out.display()
        ),
        _ => println!(
            "morph: {} iterations, artifacts in {}",
            config.iters,
            config.out.display()
        ),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sw2(args: Sw2Args) -> Result<ExitCode> {
    let mode = match args.mode {
        ModeArg::WeightedGrid => "weighted-grid",
        ModeArg::Sampled => "sampled",
    };
    let (a, _) = load_measure(
        &args.source,
        mode,
        args.samples,
        args.seed.wrapping_add(SAMPLE_SEED_OFFSET),
    )?;
    let (b, _) = load_measure(
        &args.target,
        mode,
        args.samples,
        args.seed.wrapping_add(SAMPLE_SEED_OFFSET),
    )?;
    let mut sampler = DirectionSampler::uniform_sphere(args.seed);
    let est = slicing::sw2(&a, &b, &mut sampler, args.sw2_dirs)?;
    println!(
        "{:.prec$} {:.prec$}",
        est.value,
        est.stderr,
        prec = args.digits
    );
    Ok(ExitCode::SUCCESS)
}

fn random_uniform(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DiscreteMeasure {
    let pts: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
        .collect();
    DiscreteMeasure::from_points(&pts, None).unwrap()
}

/// Writes the offending instance in the point-cloud format so the failure
/// can be replayed.
fn dump_failure(suite: &str, src: &DiscreteMeasure, tgt: &DiscreteMeasure, params: &str) -> Result<PathBuf> {
    let dir = PathBuf::from(format!("check-failure-{suite}"));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("source.txt"), format_point_cloud(src))?;
    fs::write(dir.join("target.txt"), format_point_cloud(tgt))?;
    fs::write(dir.join("params.txt"), params)?;
    Ok(dir)
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode> {
    match args.suite {
        SuiteArg::Consecutive => check_consecutive(args.seed),
        SuiteArg::Stationarity => check_stationarity(args.seed),
        SuiteArg::Bounds => check_bounds(args.seed),
    }
}

fn check_consecutive(seed: u64) -> Result<ExitCode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gammas = [0.1, 0.5, 1.0];
    let mut max_identity = 0.0f64;
    let mut max_oracle = 0.0f64;
    for trial in 0..130 {
        let small = trial >= 100;
        let n = if rng.gen::<bool>() { 2 } else { 3 };
        let j = rng.gen_range(1..=n);
        let gamma = gammas[trial % 3];
        let m = if small { rng.gen_range(4..=8) } else { 32 };
        let current = random_uniform(&mut rng, m, n);
        let target = random_uniform(&mut rng, m, n);
        let frame = DirectionSampler::haar(seed.wrapping_add(trial as u64))
            .sample_haar(n)?;
        let (next, loss) = scheme::step(&current, &target, &frame, j, gamma)?;
        let displacement: f64 = current
            .points()
            .zip(next.points())
            .zip(current.weights())
            .map(|((x, y), w)| {
                w * x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            })
            .sum();
        let gamma_sq_loss = gamma * gamma * loss;
        let denom = displacement.abs().max(gamma_sq_loss.abs()).max(1e-300);
        let residual = (displacement - gamma_sq_loss).abs() / denom;
        max_identity = max_identity.max(residual);
        if residual > 1e-10 {
            let dir = dump_failure(
                "consecutive",
                &current,
                &target,
                &format!("n={n} j={j} gamma={gamma} residual={residual:e}\n"),
            )?;
            println!("consecutive: FAIL identity residual {residual:e} (instance in {})", dir.display());
            return Ok(ExitCode::FAILURE);
        }
        if small {
            let (w2, _) = oracle::w2_exact(&current, &next)?;
            let w2_sq = w2 * w2;
            let denom = w2_sq.max(displacement).max(1e-300);
            let residual = (w2_sq - displacement).abs() / denom;
            max_oracle = max_oracle.max(residual);
            if residual > 1e-10 {
                let dir = dump_failure(
                    "consecutive",
                    &current,
                    &target,
                    &format!("n={n} j={j} gamma={gamma} oracle residual={residual:e}\n"),
                )?;
                println!("consecutive: FAIL oracle residual {residual:e} (instance in {})", dir.display());
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    println!(
        "consecutive: PASS max identity residual {max_identity:.3e}, max oracle residual {max_oracle:.3e} (tolerance 1e-10)"
    );
    Ok(ExitCode::SUCCESS)
}

fn check_stationarity(seed: u64) -> Result<ExitCode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_gap = 0.0f64;
    for trial in 0..50u64 {
        let n = 1 + (trial as usize) % 3;
        let m = rng.gen_range(4..=16);
        let src = random_uniform(&mut rng, m, n);
        let tgt = random_uniform(&mut rng, m, n);
        let frame = DirectionSampler::haar(seed.wrapping_add(trial)).sample_haar(n)?;
        let traj = scheme::run(
            &src,
            &tgt,
            n,
            &Schedule::constant(1.0)?,
            &mut DirectionSampler::fixed_frames(vec![frame]),
            2,
            &Diagnostics {
                sw2_directions: 0,
                sw2_seed: 0,
                retain_measures: true,
            },
        )?;
        let s1 = traj.measure_at(1)?;
        let s2 = traj.measure_at(2)?;
        for (p, q) in s1.points().zip(s2.points()) {
            for (a, b) in p.iter().zip(q) {
                let gap = (a - b).abs();
                max_gap = max_gap.max(gap);
                if gap > 1e-12 {
                    let dir = dump_failure(
                        "stationarity",
                        &src,
                        &tgt,
                        &format!("n={n} m={m} gap={gap:e}\n"),
                    )?;
                    println!(
                        "stationarity: FAIL coordinate gap {gap:e} (instance in {})",
                        dir.display()
                    );
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
    }
    println!("stationarity: PASS max coordinate gap {max_gap:.3e} (tolerance 1e-12)");
    Ok(ExitCode::SUCCESS)
}

fn check_bounds(seed: u64) -> Result<ExitCode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_margin = f64::NEG_INFINITY;
    for trial in 0..50u64 {
        let n = if rng.gen::<bool>() { 2 } else { 3 };
        let m = rng.gen_range(2..=8);
        let src = random_uniform(&mut rng, m, n);
        let tgt = random_uniform(&mut rng, m, n);
        let mut sampler = DirectionSampler::uniform_sphere(seed.wrapping_add(trial));
        let est = slicing::sw2(&src, &tgt, &mut sampler, 2000)?;
        let (w2, _) = oracle::w2_exact(&src, &tgt)?;
        let margin = est.value - w2 - 3.0 * est.stderr;
        worst_margin = worst_margin.max(margin);
        if margin > 0.0 {
            let dir = dump_failure(
                "bounds",
                &src,
                &tgt,
                &format!("n={n} m={m} sw2={} stderr={} w2={w2}\n", est.value, est.stderr),
            )?;
            println!(
                "bounds: FAIL SW2 exceeds W2 by {margin:e} beyond 3 stderr (instance in {})",
                dir.display()
            );
            return Ok(ExitCode::FAILURE);
        }
    }
    println!("bounds: PASS worst margin {worst_margin:.3e} (must be <= 0)");
    Ok(ExitCode::SUCCESS)
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dpd_cli::experiments::{
    degrade_gaussian, degrade_salt_pepper, parse_kernel, rate_table, run_gauss, run_salt_pepper, synth_bench,
    GapSeries, GaussConfig, ImageRun, SaltPepperConfig, Solver, SynthConfig,
};
use dpd_cli::output::{read_history_file, read_image, with_suffix, write_history_file, write_image_pair, RunSidecar};
use dpd_cli::{CliError, CliResult};
use dpd_core::imaging::{make_phantom, ImageGrid};
use dpd_core::linops::Kernel2D;

#[derive(Parser)]
#[command(
    name = "dpd",
    version,
    about = "Accelerated primal-dual solvers: deblurring and rate experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// TV deblurring under Gaussian noise with LDPD (or EDPD).
    DeblurGauss(GaussArgs),
    /// TV-ℓ₁ deblurring under salt-and-pepper noise with EDPD.
    DeblurSp(SpArgs),
    /// Gap-versus-bound histories on seeded instances with a known saddle.
    SynthBench(SynthArgs),
    /// Log-log slopes of gap histories.
    Rates(RatesArgs),
}

#[derive(Args)]
struct ImageIo {
    /// Clean image (PGM, or DPDF by extension). A phantom is used when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Already degraded image; skips blurring and noise.
    #[arg(long)]
    degraded_input: Option<PathBuf>,
    /// Side length of the generated phantom.
    #[arg(long, default_value_t = 256)]
    phantom: usize,
    /// Noise seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Fixed dual step for single-step and weakly convex EDPD (default 1/‖A‖).
    #[arg(long)]
    tau: Option<f64>,
    /// Output prefix: writes PREFIX.pgm, PREFIX.dpdf, PREFIX.json.
    #[arg(long)]
    output: PathBuf,
    /// History CSV (default PREFIX.csv).
    #[arg(long)]
    history: Option<PathBuf>,
    /// Record wall-clock milliseconds in the history.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct GaussArgs {
    #[command(flatten)]
    io: ImageIo,
    #[arg(long, default_value_t = 3000.0)]
    mu: f64,
    #[arg(long, default_value_t = 0.01)]
    mu_g: f64,
    #[arg(long, default_value_t = 200)]
    iters: usize,
    /// motion:LEN,ANGLE | average:SIZE | identity
    #[arg(long, default_value = "motion:30,135")]
    kernel: String,
    #[arg(long, default_value_t = 3e-3)]
    sigma: f64,
    #[arg(long, default_value = "ldpd")]
    solver: String,
    #[arg(long, default_value = "strongly-convex-dual")]
    regime: String,
}

#[derive(Args)]
struct SpArgs {
    #[command(flatten)]
    io: ImageIo,
    #[arg(long, default_value_t = 4.0)]
    alpha: f64,
    /// Initial μ_g; 0 runs the weakly convex regime.
    #[arg(long, default_value_t = 0.03)]
    mu_g0: f64,
    /// Halve μ_g every this many iterations; 0 keeps it fixed.
    #[arg(long, default_value_t = 10)]
    halve_every: usize,
    #[arg(long, default_value_t = 150)]
    iters: usize,
    #[arg(long, default_value = "average:5")]
    kernel: String,
    #[arg(long, default_value_t = 0.2)]
    fraction: f64,
    /// auto | strongly-convex-dual | strongly-convex-primal | weakly-convex
    #[arg(long, default_value = "auto")]
    regime: String,
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long, default_value_t = 20)]
    primal_dim: usize,
    #[arg(long, default_value_t = 15)]
    dual_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    mu_g: f64,
    /// Ridge added to f for the strongly convex primal regimes.
    #[arg(long, default_value_t = 0.5)]
    ridge: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    iters: usize,
}

impl InstanceArgs {
    fn config(&self) -> SynthConfig {
        SynthConfig {
            primal_dim: self.primal_dim,
            dual_dim: self.dual_dim,
            mu_g: self.mu_g,
            ridge: self.ridge,
            seed: self.seed,
            iters: self.iters,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Directory receiving one TAG.csv per run.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RatesArgs {
    /// Directory of synth-bench histories; generated in memory when absent.
    #[arg(long)]
    input_dir: Option<PathBuf>,
    #[command(flatten)]
    instance: InstanceArgs,
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("DPD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("DPD_THREADS must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

/// Clean image (if known) and the degraded observation.
fn load_images(
    io: &ImageIo,
    degrade: impl FnOnce(&ImageGrid) -> CliResult<ImageGrid>,
) -> CliResult<(Option<ImageGrid>, ImageGrid, bool)> {
    let truth = match (&io.input, &io.degraded_input) {
        (Some(p), _) => Some(read_image(p)?),
        (None, None) => Some(make_phantom(io.phantom, io.phantom)?),
        (None, Some(_)) => None,
    };
    match (&io.degraded_input, truth) {
        (Some(p), truth) => Ok((truth, read_image(p)?, false)),
        (None, Some(t)) => {
            let observed = degrade(&t)?;
            Ok((Some(t), observed, true))
        }
        (None, None) => unreachable!("a clean image is always available without --degraded-input"),
    }
}

fn write_image_run(
    io: &ImageIo,
    run: &ImageRun,
    observed: &ImageGrid,
    degraded_here: bool,
    sidecar: RunSidecar,
) -> CliResult<()> {
    if let Some(parent) = io.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    if degraded_here {
        write_image_pair(&with_suffix(&io.output, "-degraded"), observed)?;
    }
    write_image_pair(&io.output, &run.recovered)?;
    let history = io.history.clone().unwrap_or_else(|| with_suffix(&io.output, ".csv"));
    write_history_file(&history, &run.history)?;
    sidecar.write(&with_suffix(&io.output, ".json"))?;
    log::info!("wrote {} and history {}", io.output.display(), history.display());
    match run.final_snr_db {
        Some(s) => println!("{}: {} iterations, SNR {s:.2} dB", run.regime, run.history.len()),
        None => println!("{}: {} iterations", run.regime, run.history.len()),
    }
    Ok(())
}

fn check_iters(iters: usize) -> CliResult<()> {
    if iters == 0 {
        return Err(CliError::Config("--iters must be >= 1".into()));
    }
    Ok(())
}

fn cmd_deblur_gauss(args: &GaussArgs) -> CliResult<()> {
    check_iters(args.iters)?;
    let kernel: Kernel2D = parse_kernel(&args.kernel)?;
    let solver: Solver = args.solver.parse()?;
    let (truth, observed, degraded_here) =
        load_images(&args.io, |t| degrade_gaussian(t, &kernel, args.sigma, args.io.seed))?;
    let run = run_gauss(&GaussConfig {
        truth,
        observed: observed.clone(),
        kernel,
        mu: args.mu,
        mu_g: args.mu_g,
        iters: args.iters,
        solver,
        regime: args.regime.clone(),
        tau: args.io.tau,
        timing: args.io.timing,
    })?;
    let sidecar = RunSidecar::from_run(
        "deblur-gauss",
        &run,
        args.io.seed,
        &args.kernel,
        degraded_here,
        vec![("mu", args.mu), ("mu_g", args.mu_g), ("sigma", args.sigma)],
        "none".into(),
    );
    write_image_run(&args.io, &run, &observed, degraded_here, sidecar)
}

fn cmd_deblur_sp(args: &SpArgs) -> CliResult<()> {
    check_iters(args.iters)?;
    let kernel = parse_kernel(&args.kernel)?;
    let (truth, observed, degraded_here) = load_images(&args.io, |t| {
        degrade_salt_pepper(t, &kernel, args.fraction, args.io.seed)
    })?;
    let run = run_salt_pepper(&SaltPepperConfig {
        truth,
        observed: observed.clone(),
        kernel,
        alpha: args.alpha,
        mu_g0: args.mu_g0,
        halve_every: args.halve_every,
        iters: args.iters,
        regime: args.regime.clone(),
        tau: args.io.tau,
        timing: args.io.timing,
    })?;
    let continuation = if args.halve_every > 0 && args.mu_g0 > 0.0 {
        format!("heuristic-continuation:halve-every-{}", args.halve_every)
    } else {
        "none".into()
    };
    let sidecar = RunSidecar::from_run(
        "deblur-sp",
        &run,
        args.io.seed,
        &args.kernel,
        degraded_here,
        vec![
            ("alpha", args.alpha),
            ("mu_g0", args.mu_g0),
            ("fraction", args.fraction),
        ],
        continuation,
    );
    write_image_run(&args.io, &run, &observed, degraded_here, sidecar)
}

fn cmd_synth_bench(args: &SynthArgs) -> CliResult<()> {
    let runs = synth_bench(&args.instance.config())?;
    log::info!("writing {} histories to {}", runs.len(), args.out_dir.display());
    std::fs::create_dir_all(&args.out_dir)?;
    println!(
        "{:<34} {:>12} {:>12} {:>10}",
        "regime", "final gap", "final bound", "max ratio"
    );
    let mut first_violation = None;
    for run in &runs {
        write_history_file(&args.out_dir.join(format!("{}.csv", run.tag)), &run.history)?;
        let last = run.history.last().expect("iters >= 1");
        let ratio = run
            .history
            .iter()
            .filter_map(|r| Some(r.gap? / r.bound?))
            .fold(f64::NEG_INFINITY, f64::max);
        println!(
            "{:<34} {:>12.4e} {:>12.4e} {:>10.4}",
            run.tag,
            last.gap.unwrap_or(f64::NAN),
            last.bound.unwrap_or(f64::NAN),
            ratio
        );
        if let (None, Some((k, gap, bound))) = (&first_violation, run.violation) {
            first_violation = Some(CliError::BoundViolation {
                regime: run.tag.clone(),
                k,
                gap,
                bound,
            });
        }
    }
    first_violation.map_or(Ok(()), Err)
}

fn series_from_dir(dir: &Path) -> CliResult<GapSeries> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let tag = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let points = read_history_file(&p)?
            .into_iter()
            .filter_map(|r| r.gap.map(|g| (r.t, g)))
            .collect();
        out.push((tag, points));
    }
    Ok(out)
}

fn cmd_rates(args: &RatesArgs) -> CliResult<()> {
    let series = match &args.input_dir {
        Some(dir) => series_from_dir(dir)?,
        None => synth_bench(&args.instance.config())?
            .into_iter()
            .map(|r| {
                let s = r.gap_series();
                (r.tag, s)
            })
            .collect(),
    };
    let rows = rate_table(&series)?;
    println!(
        "{:<34} {:>8} {:>7} {:>16} {:>6}",
        "regime", "slope", "points", "required", "ok"
    );
    for row in &rows {
        let required = match row.required {
            Some((lo, hi)) if lo.is_infinite() => format!("<= {hi}"),
            Some((lo, hi)) => format!("[{lo}, {hi}]"),
            None => "-".into(),
        };
        let ok = if row.passed { "yes" } else { "NO" };
        println!(
            "{:<34} {:>8.3} {:>7} {:>16} {:>6}",
            row.tag, row.slope, row.points_used, required, ok
        );
    }
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed).map(|r| r.tag.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::RateCheck(format!(
            "slopes out of range for {}",
            failed.join(", ")
        )))
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::DeblurGauss(a) => cmd_deblur_gauss(a),
        Command::DeblurSp(a) => cmd_deblur_sp(a),
        Command::SynthBench(a) => cmd_synth_bench(a),
        Command::Rates(a) => cmd_rates(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dpd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

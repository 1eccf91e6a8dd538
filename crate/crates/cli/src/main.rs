//! `diffuse`: generate, smooth, validate, and benchmark spherical maps.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use diffuse_core::grid::{area_weighted_abs_sum, area_weighted_sum};
use diffuse_core::integrator::{advance, compute_stage_count};
use diffuse_core::synth::{gen_harmonic, gen_noise};
use diffuse_core::{ExecutionMode, SphericalGrid, StencilOperator};

use diffuse::backend::{build_plan, env_threads, resolve_thread_count};
use diffuse::bench::{emit_csv, emit_table, run_benchmark, BenchmarkConfig, RealClock};
use diffuse::error::AppError;
use diffuse::mapio;
use diffuse::validate::{run_checks, Level};

#[derive(Parser)]
#[command(
    name = "diffuse",
    version,
    about = "Heat-equation smoothing on the sphere: conservative finite differences with RKL2 super-time-stepping"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic map file
    Gen(GenArgs),
    /// Smooth a map by integrating the surface heat equation
    Smooth(SmoothArgs),
    /// Run the numerical self-checks
    Validate(ValidateArgs),
    /// Time the solver across modes, grids, and thread counts
    Bench(BenchArgs),
    /// Print grid and operator facts about a map file
    Info(InfoArgs),
}

/// Execution modes: `serial` is the sequential reference; `parallel-loops`
/// threads the grid sweeps but keeps every reduction ordered, so output is
/// bitwise identical to serial at any thread count; `parallel-all` also
/// runs reductions as a fixed block tree, so reduced scalars may differ
/// from serial by reassociation (bounded, and reproducible across thread
/// counts) while field data stays bitwise identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Serial,
    ParallelLoops,
    ParallelAll,
}

impl From<ModeArg> for ExecutionMode {
    fn from(m: ModeArg) -> ExecutionMode {
        match m {
            ModeArg::Serial => ExecutionMode::Serial,
            ModeArg::ParallelLoops => ExecutionMode::ParallelLoops,
            ModeArg::ParallelAll => ExecutionMode::ParallelAll,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenKind {
    /// Real surface harmonic P_l^|m|(cos theta) cos(m phi + phase)
    Harmonic,
    /// Seeded uniform noise in [-amplitude, amplitude]
    Noise,
}

#[derive(Args)]
struct GenArgs {
    /// Map kind
    #[arg(long = "type", value_enum)]
    kind: GenKind,
    /// Harmonic degree (harmonic only)
    #[arg(long)]
    l: Option<u32>,
    /// Harmonic order, |m| <= l (harmonic only; default 0)
    #[arg(long)]
    m: Option<i32>,
    /// Phase offset in radians (harmonic only; default 0)
    #[arg(long)]
    phase: Option<f64>,
    /// Generator seed (noise only; default 42)
    #[arg(long)]
    seed: Option<u64>,
    /// Noise amplitude (noise only; default 1)
    #[arg(long)]
    amplitude: Option<f64>,
    /// Theta nodes, pole to pole (>= 3)
    #[arg(long)]
    nt: usize,
    /// Phi nodes around the equator (>= 3)
    #[arg(long)]
    np: usize,
    /// Pole-clustering strength in [0, 1); 0 = uniform
    #[arg(long, default_value_t = 0.0)]
    stretch: f64,
    /// Output map path (.sdm or .csv)
    out: PathBuf,
}

#[derive(Args)]
struct SmoothArgs {
    /// Input map path (.sdm or .csv)
    input: PathBuf,
    /// Output map path (.sdm or .csv)
    out: PathBuf,
    /// Total simulated time
    #[arg(long, default_value_t = 0.0)]
    time: f64,
    /// Super-steps to divide the time into
    #[arg(long, default_value_t = 0)]
    steps: u64,
    /// Constant diffusivity
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Serial)]
    mode: ModeArg,
    /// Worker threads (default: DIFFUSE_NUM_THREADS, then logical cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    /// fast: reduced grids; full: adds the 181x360 decay, convergence, and
    /// 257x512 conservation runs
    #[arg(long, value_enum, default_value_t = LevelArg::Fast)]
    level: LevelArg,
    /// Worker threads for the parallel-mode checks
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

#[derive(Args)]
struct BenchArgs {
    /// Grids as NTxNP, comma-separated
    #[arg(long, value_delimiter = ',', default_value = "181x360", value_parser = parse_grid)]
    grid: Vec<(usize, usize)>,
    /// Execution modes, comma-separated
    #[arg(long, value_enum, value_delimiter = ',', default_value = "serial")]
    modes: Vec<ModeArg>,
    /// Thread counts for the parallel modes, comma-separated
    #[arg(long, value_delimiter = ',', default_value = "1")]
    threads: Vec<usize>,
    /// Timed repetitions per point
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Untimed warmup runs per point
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    /// Super-steps per timed run
    #[arg(long, default_value_t = 10)]
    steps: u64,
    /// Constant diffusivity of the workload
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// Seed of the noise initial condition
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write per-rep and summary rows to this CSV file
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Print the summary as a markdown table (default when --csv is absent)
    #[arg(long)]
    table: bool,
}

#[derive(Args)]
struct InfoArgs {
    /// Map path (.sdm or .csv)
    input: PathBuf,
}

fn parse_grid(raw: &str) -> Result<(usize, usize), String> {
    let (a, b) = raw
        .split_once('x')
        .ok_or_else(|| format!("expected NTxNP, got {raw:?}"))?;
    let nt = a.parse::<usize>().map_err(|_| format!("bad nt in {raw:?}"))?;
    let np = b.parse::<usize>().map_err(|_| format!("bad np in {raw:?}"))?;
    Ok((nt, np))
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Smooth(args) => cmd_smooth(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Info(args) => cmd_info(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn usage(msg: impl Into<String>) -> AppError {
    AppError::Usage(msg.into())
}

fn cmd_gen(args: GenArgs) -> Result<(), AppError> {
    if args.nt < 3 || args.np < 3 {
        return Err(usage(format!("--nt and --np must be >= 3, got {}x{}", args.nt, args.np)));
    }
    if !(args.stretch.is_finite() && (0.0..1.0).contains(&args.stretch)) {
        return Err(usage(format!("--stretch must lie in [0, 1), got {}", args.stretch)));
    }
    let grid = SphericalGrid::stretched(args.nt, args.np, args.stretch)?;

    let field = match args.kind {
        GenKind::Harmonic => {
            if args.seed.is_some() || args.amplitude.is_some() {
                return Err(usage("--seed/--amplitude only apply to --type noise"));
            }
            let l = args.l.ok_or_else(|| usage("--type harmonic requires --l"))?;
            let m = args.m.unwrap_or(0);
            gen_harmonic(&grid, l, m, args.phase.unwrap_or(0.0))
                .map_err(|e| usage(e.to_string()))?
        }
        GenKind::Noise => {
            if args.l.is_some() || args.m.is_some() || args.phase.is_some() {
                return Err(usage("--l/--m/--phase only apply to --type harmonic"));
            }
            let amplitude = args.amplitude.unwrap_or(1.0);
            if !amplitude.is_finite() {
                return Err(usage(format!("--amplitude must be finite, got {amplitude}")));
            }
            gen_noise(&grid, args.seed.unwrap_or(42), amplitude)
        }
    };
    mapio::write_map(&args.out, &field)?;
    Ok(())
}

fn cmd_smooth(args: SmoothArgs) -> Result<(), AppError> {
    let u0 = mapio::read_map(&args.input)?;
    let grid = u0.grid().clone();
    let op = StencilOperator::build_constant(&grid, args.nu)?;

    let threads = resolve_thread_count(args.threads, env_threads().as_deref())?;
    let mode = ExecutionMode::from(args.mode);
    let plan = build_plan(mode, threads)?;

    let (u, stats) = advance(&op, &u0, args.time, args.steps, &plan)?;
    mapio::write_map(&args.out, &u)?;

    let s = if args.steps > 0 {
        let dt = args.time / args.steps as f64;
        if dt > 0.0 && op.gershgorin_bound() > 0.0 {
            compute_stage_count(dt, op.explicit_dt())?
        } else {
            2
        }
    } else {
        0
    };
    println!("mode: {mode}");
    println!("threads: {}", plan.threads());
    println!("grid: {}x{}", grid.nt(), grid.np());
    println!("steps_taken: {}", stats.steps_taken);
    println!("stages_per_step: {s}");
    println!("total_operator_applications: {}", stats.total_operator_applications);
    println!("simulated_time: {}", stats.elapsed_sim_time);
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), AppError> {
    let threads = resolve_thread_count(args.threads, env_threads().as_deref())?;
    let level = match args.level {
        LevelArg::Fast => Level::Fast,
        LevelArg::Full => Level::Full,
    };
    let results = run_checks(level, threads)?;
    let mut failed = 0;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {}", r.name, r.detail);
        if !r.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(AppError::Run(format!("{failed} of {} checks failed", results.len())));
    }
    println!("all {} checks passed", results.len());
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), AppError> {
    let config = BenchmarkConfig {
        grids: args.grid,
        modes: args.modes.into_iter().map(ExecutionMode::from).collect(),
        threads: args.threads,
        repetitions: args.reps,
        warmup: args.warmup,
        steps: args.steps,
        nu: args.nu,
        seed: args.seed,
    };
    let mut clock = RealClock::new();
    let report = run_benchmark(&config, &mut clock)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &args.csv {
        std::fs::write(path, emit_csv(&report))
            .map_err(|e| AppError::Run(format!("{}: {e}", path.display())))?;
    }
    if args.table || args.csv.is_none() {
        print!("{}", emit_table(&report));
    }
    if report.any_failed() {
        let n = report.points.iter().filter(|p| p.error.is_some()).count();
        return Err(AppError::Run(format!("{n} benchmark point(s) failed")));
    }
    Ok(())
}

fn cmd_info(args: InfoArgs) -> Result<(), AppError> {
    let field = mapio::read_map(&args.input)?;
    let grid = field.grid();
    let op = StencilOperator::build_constant(grid, 1.0)?;

    let total = area_weighted_sum(grid, &field, diffuse_core::ReductionMode::Ordered)?;
    let abs_total = area_weighted_abs_sum(grid, &field)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in field.values() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    println!("grid: {}x{}", grid.nt(), grid.np());
    println!("theta: [{}, {}]", grid.theta()[0], grid.theta()[grid.nt() - 1]);
    println!("phi: [{}, {})", grid.phi()[0], grid.phi()[grid.np() - 1]);
    println!("values: min {lo}, max {hi}");
    println!("area_weighted_sum: {total}");
    println!("area_weighted_abs_sum: {abs_total}");
    println!("gershgorin_bound(nu=1): {}", op.gershgorin_bound());
    println!("explicit_dt(nu=1): {:e}", op.explicit_dt());
    Ok(())
}

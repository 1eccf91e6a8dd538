//! Timing harness: repeated runs per configuration point, wall and process
//! CPU clocks, mean / sample standard deviation, speedup against the serial
//! baseline at the same grid, CSV and markdown emission.
//!
//! A timed repetition covers the full workload: noise generation, operator
//! assembly, and the advance() call. One untimed warmup run (default)
//! absorbs first-touch allocation noise. The harness itself is
//! single-threaded; parallelism happens only inside the workload through
//! the ExecPlan under test.

use diffuse_core::integrator::advance;
use diffuse_core::synth::gen_noise;
use diffuse_core::{ExecutionMode, SphericalGrid, StencilOperator};

use crate::backend::build_plan;
use crate::error::AppError;

/// Clock snapshots injected into the harness so statistics can be tested
/// against scripted timings. Returns (monotonic real seconds, process CPU
/// seconds).
pub trait BenchClock {
    fn read(&mut self) -> (f64, f64);
}

/// The production clock: a monotonic origin for real time plus the OS
/// per-process CPU counter (reported as 0 where unavailable).
pub struct RealClock {
    origin: std::time::Instant,
}

impl RealClock {
    pub fn new() -> Self {
        RealClock { origin: std::time::Instant::now() }
    }
}

impl Default for RealClock {
    fn default() -> Self {
        Self::new()
    }
}

impl BenchClock for RealClock {
    fn read(&mut self) -> (f64, f64) {
        (self.origin.elapsed().as_secs_f64(), process_cpu_seconds())
    }
}

#[cfg(unix)]
fn process_cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
    if rc == 0 {
        ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
    } else {
        0.0
    }
}

#[cfg(not(unix))]
fn process_cpu_seconds() -> f64 {
    0.0
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub grids: Vec<(usize, usize)>,
    pub modes: Vec<ExecutionMode>,
    pub threads: Vec<usize>,
    pub repetitions: usize,
    pub warmup: usize,
    pub steps: u64,
    pub nu: f64,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            grids: vec![(181, 360)],
            modes: vec![ExecutionMode::Serial],
            threads: vec![1],
            repetitions: 10,
            warmup: 1,
            steps: 10,
            nu: 1.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BenchSample {
    pub rep: usize,
    pub real_s: f64,
    pub cpu_s: f64,
}

/// One (mode, grid, threads) point: its recorded samples, or the reason it
/// could not run. A failed point never aborts the others.
#[derive(Debug, Clone)]
pub struct BenchPoint {
    pub mode: ExecutionMode,
    pub nt: usize,
    pub np: usize,
    pub threads: usize,
    pub samples: Vec<BenchSample>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BenchSummary {
    pub mode: ExecutionMode,
    pub nt: usize,
    pub np: usize,
    pub threads: usize,
    pub mean_real_s: f64,
    pub std_real_s: f64,
    pub mean_cpu_s: f64,
    /// mean_real(serial baseline at this grid) / mean_real(this point);
    /// None when no serial baseline was benchmarked at the grid.
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkReport {
    pub points: Vec<BenchPoint>,
    pub warnings: Vec<String>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let mut n = 0usize;
    let mut acc = 0.0;
    for x in xs {
        acc += x;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        acc / n as f64
    }
}

fn sample_std(xs: &[f64], m: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

impl BenchmarkReport {
    /// Per-point statistics, from the recorded samples only. Failed points
    /// are excluded.
    pub fn summaries(&self) -> Vec<BenchSummary> {
        let ok: Vec<&BenchPoint> = self.points.iter().filter(|p| p.error.is_none()).collect();
        ok.iter()
            .map(|p| {
                let reals: Vec<f64> = p.samples.iter().map(|s| s.real_s).collect();
                let mean_real_s = mean(reals.iter().copied());
                let std_real_s = sample_std(&reals, mean_real_s);
                let mean_cpu_s = mean(p.samples.iter().map(|s| s.cpu_s));
                let speedup = ok
                    .iter()
                    .find(|b| {
                        b.mode == ExecutionMode::Serial && b.nt == p.nt && b.np == p.np
                    })
                    .map(|b| mean(b.samples.iter().map(|s| s.real_s)) / mean_real_s);
                BenchSummary {
                    mode: p.mode,
                    nt: p.nt,
                    np: p.np,
                    threads: p.threads,
                    mean_real_s,
                    std_real_s,
                    mean_cpu_s,
                    speedup,
                }
            })
            .collect()
    }

    pub fn any_failed(&self) -> bool {
        self.points.iter().any(|p| p.error.is_some())
    }
}

/// Expands the config into points and runs them. Serial gets one point per
/// grid (its thread list is meaningless); parallel modes get one point per
/// (grid, thread count). Thread counts beyond the logical core count warn
/// but still run, oversubscribed.
pub fn run_benchmark(
    config: &BenchmarkConfig,
    clock: &mut dyn BenchClock,
) -> Result<BenchmarkReport, AppError> {
    if config.repetitions < 1 {
        return Err(AppError::Usage("benchmark repetitions must be >= 1".into()));
    }
    if config.modes.is_empty() {
        return Err(AppError::Usage("benchmark needs at least one mode".into()));
    }
    if config.grids.is_empty() {
        return Err(AppError::Usage("benchmark needs at least one grid".into()));
    }
    if config.threads.is_empty() && config.modes.iter().any(|m| m.threaded_sweeps()) {
        return Err(AppError::Usage("benchmark needs at least one thread count".into()));
    }

    let logical = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut warnings = Vec::new();
    for &t in &config.threads {
        if t > logical {
            warnings.push(format!(
                "requested {t} threads exceeds {logical} logical cores; running oversubscribed"
            ));
        }
    }

    let mut points = Vec::new();
    for &mode in &config.modes {
        for &(nt, np) in &config.grids {
            let thread_counts: &[usize] = if mode.threaded_sweeps() { &config.threads } else { &[1] };
            for &threads in thread_counts {
                let mut point =
                    BenchPoint { mode, nt, np, threads, samples: Vec::new(), error: None };
                match run_point(config, mode, nt, np, threads, clock) {
                    Ok(samples) => point.samples = samples,
                    Err(e) => point.error = Some(e),
                }
                points.push(point);
            }
        }
    }
    Ok(BenchmarkReport { points, warnings })
}

fn run_point(
    config: &BenchmarkConfig,
    mode: ExecutionMode,
    nt: usize,
    np: usize,
    threads: usize,
    clock: &mut dyn BenchClock,
) -> Result<Vec<BenchSample>, String> {
    preflight(nt, np)?;
    let plan = build_plan(mode, threads).map_err(|e| e.to_string())?;
    let mut samples = Vec::with_capacity(config.repetitions);
    for run in 0..config.warmup + config.repetitions {
        let (r0, c0) = clock.read();
        workload(config, nt, np, &plan)?;
        let (r1, c1) = clock.read();
        if run >= config.warmup {
            samples.push(BenchSample { rep: run - config.warmup, real_s: r1 - r0, cpu_s: c1 - c0 });
        }
    }
    Ok(samples)
}

/// Refuses a point whose field buffers clearly cannot be allocated, instead
/// of aborting the whole benchmark inside the workload. The live set of an
/// advance() is about 14 grid-sized f64 arrays (fields, coefficients,
/// areas).
fn preflight(nt: usize, np: usize) -> Result<(), String> {
    let nodes = nt
        .checked_mul(np)
        .ok_or_else(|| format!("grid {nt}x{np} overflows the address space"))?;
    let mut probe: Vec<f64> = Vec::new();
    probe
        .try_reserve_exact(nodes.checked_mul(14).ok_or("grid size overflow")?)
        .map_err(|_| format!("cannot allocate working set for {nt}x{np}"))?;
    Ok(())
}

/// The timed unit: generate the noise map, assemble the operator, advance
/// `steps` super-steps at dt = 100 * dt_expl (about 20 stages per step, a
/// super-stepping regime worth timing).
fn workload(
    config: &BenchmarkConfig,
    nt: usize,
    np: usize,
    plan: &diffuse_core::ExecPlan,
) -> Result<(), String> {
    let grid = SphericalGrid::uniform(nt, np).map_err(|e| e.to_string())?;
    let u0 = gen_noise(&grid, config.seed, 1.0);
    let op = StencilOperator::build_constant(&grid, config.nu).map_err(|e| e.to_string())?;
    let dt = 100.0 * op.explicit_dt();
    let total = dt * config.steps as f64;
    let (out, _stats) = advance(&op, &u0, total, config.steps, plan).map_err(|e| e.to_string())?;
    std::hint::black_box(out.values().first().copied());
    Ok(())
}

/// Per-rep rows under `mode,nt,np,threads,rep,real_s,cpu_s`, then summary
/// rows under `mode,nt,np,threads,mean_real_s,std_real_s,mean_cpu_s,speedup`.
/// Floats are shortest-roundtrip, so statistics recomputed from the rep
/// rows reproduce the summary.
pub fn emit_csv(report: &BenchmarkReport) -> String {
    let mut out = String::from("mode,nt,np,threads,rep,real_s,cpu_s\n");
    for p in report.points.iter().filter(|p| p.error.is_none()) {
        for s in &p.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                p.mode, p.nt, p.np, p.threads, s.rep, s.real_s, s.cpu_s
            ));
        }
    }
    out.push_str("mode,nt,np,threads,mean_real_s,std_real_s,mean_cpu_s,speedup\n");
    for s in report.summaries() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            s.mode,
            s.nt,
            s.np,
            s.threads,
            s.mean_real_s,
            s.std_real_s,
            s.mean_cpu_s,
            s.speedup.map(|v| v.to_string()).unwrap_or_default()
        ));
    }
    out
}

/// Markdown table mirroring the CSV summary rows, plus failed points.
pub fn emit_table(report: &BenchmarkReport) -> String {
    let mut out = String::from(
        "| mode | grid | threads | mean real (s) | std real (s) | mean cpu (s) | speedup |\n\
         |---|---|---|---|---|---|---|\n",
    );
    for s in report.summaries() {
        out.push_str(&format!(
            "| {} | {}x{} | {} | {:.6} | {:.6} | {:.6} | {} |\n",
            s.mode,
            s.nt,
            s.np,
            s.threads,
            s.mean_real_s,
            s.std_real_s,
            s.mean_cpu_s,
            s.speedup.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into())
        ));
    }
    for p in report.points.iter().filter(|p| p.error.is_some()) {
        out.push_str(&format!(
            "\nfailed: {} {}x{} threads={}: {}\n",
            p.mode,
            p.nt,
            p.np,
            p.threads,
            p.error.as_deref().unwrap_or("")
        ));
    }
    out
}

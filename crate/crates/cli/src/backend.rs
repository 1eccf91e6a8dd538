//! Thread-pool backend and thread-count resolution.

use std::sync::Arc;

use diffuse_core::exec::Backend;
use diffuse_core::{ExecPlan, ExecutionMode};
use rayon::prelude::*;

use crate::error::AppError;

/// Name of the environment variable consulted when no --threads flag is
/// given.
pub const THREADS_ENV: &str = "DIFFUSE_NUM_THREADS";

/// Rayon-backed chunk runner with a dedicated pool, so the worker count is
/// exactly what was requested rather than the global default.
pub struct ThreadPoolBackend {
    pool: rayon::ThreadPool,
    threads: usize,
}

impl ThreadPoolBackend {
    pub fn new(threads: usize) -> Result<Self, AppError> {
        if threads == 0 {
            return Err(AppError::Usage("thread count must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| AppError::Run(format!("failed to build thread pool: {e}")))?;
        Ok(ThreadPoolBackend { pool, threads })
    }
}

impl Backend for ThreadPoolBackend {
    fn threads(&self) -> usize {
        self.threads
    }

    fn for_each_chunk(
        &self,
        data: &mut [f64],
        chunk: usize,
        body: &(dyn Fn(usize, &mut [f64]) + Sync),
    ) {
        self.pool.install(|| {
            data.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(k, piece)| body(k * chunk, piece));
        });
    }
}

/// Worker count with precedence CLI flag > DIFFUSE_NUM_THREADS > logical
/// cores. Rejected values name their source; the environment variable is
/// not even parsed when the flag is present.
pub fn resolve_thread_count(
    cli_threads: Option<usize>,
    env_value: Option<&str>,
) -> Result<usize, AppError> {
    if let Some(t) = cli_threads {
        if t == 0 {
            return Err(AppError::Usage("--threads must be at least 1".into()));
        }
        return Ok(t);
    }
    if let Some(raw) = env_value {
        return match raw.trim().parse::<usize>() {
            Ok(t) if t >= 1 => Ok(t),
            _ => Err(AppError::Usage(format!(
                "{THREADS_ENV} must be a decimal integer >= 1, got {raw:?}"
            ))),
        };
    }
    Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Reads [`THREADS_ENV`] from the process environment for
/// [`resolve_thread_count`].
pub fn env_threads() -> Option<String> {
    std::env::var(THREADS_ENV).ok()
}

/// An ExecPlan realizing `mode` on `threads` workers. Serial mode never
/// builds a pool.
pub fn build_plan(mode: ExecutionMode, threads: usize) -> Result<ExecPlan, AppError> {
    match mode {
        ExecutionMode::Serial => Ok(ExecPlan::serial()),
        _ => Ok(ExecPlan::new(mode, Arc::new(ThreadPoolBackend::new(threads)?))),
    }
}

//! Execution strategy for sweeps and reductions.
//!
//! Three modes with fixed determinism contracts:
//!
//! * `Serial`: sequential sweeps, ordered reductions. The reference.
//! * `ParallelLoops`: threaded sweeps, ordered reductions. Bitwise identical
//!   to `Serial` for every output, at any thread count, because each output
//!   element is written by exactly one task using the same arithmetic.
//! * `ParallelAll`: threaded sweeps and block-tree reductions. Field data
//!   stays bitwise identical; reduced scalars may differ from ordered
//!   results by reassociation only, and are themselves bitwise reproducible
//!   across thread counts because the block structure is fixed.
//!
//! There is deliberately no mode that parallelizes a reduction without
//! reduction semantics; the associated race is unrepresentable here.
//!
//! Sweeps hand out blocks of whole rows (default block: ceil(rows / (4 t))
//! rows, so each of t workers sees about four blocks for load balance).
//! The block-tree reduction sums fixed runs of [`REDUCE_BLOCK`] consecutive
//! terms left to right, then folds the block sums pairwise; nothing in the
//! value depends on how many threads computed the blocks.
//!
//! Threading itself lives behind the object-safe [`Backend`] trait; this
//! crate only ships [`SerialBackend`]. A thread-pool backend plugs in from
//! the host application.

use alloc::sync::Arc;
use alloc::vec::Vec;

/// Terms per reduction block. Fixed so that block sums, and therefore the
/// whole tree, never depend on thread count.
pub const REDUCE_BLOCK: usize = 4096;

/// Which loops run threaded and how scalars are reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecutionMode {
    Serial,
    ParallelLoops,
    ParallelAll,
}

impl ExecutionMode {
    pub const ALL: [ExecutionMode; 3] = [
        ExecutionMode::Serial,
        ExecutionMode::ParallelLoops,
        ExecutionMode::ParallelAll,
    ];

    /// Stable lowercase name, also accepted by [`ExecutionMode::parse_name`].
    pub fn name(self) -> &'static str {
        match self {
            ExecutionMode::Serial => "serial",
            ExecutionMode::ParallelLoops => "parallel-loops",
            ExecutionMode::ParallelAll => "parallel-all",
        }
    }

    pub fn parse_name(s: &str) -> Option<Self> {
        match s {
            "serial" => Some(ExecutionMode::Serial),
            "parallel-loops" => Some(ExecutionMode::ParallelLoops),
            "parallel-all" => Some(ExecutionMode::ParallelAll),
            _ => None,
        }
    }

    /// Reduction flavor this mode uses for derived scalars.
    pub fn reduction_mode(self) -> ReductionMode {
        match self {
            ExecutionMode::ParallelAll => ReductionMode::Parallel,
            _ => ReductionMode::Ordered,
        }
    }

    /// Whether sweeps go through the backend.
    pub fn threaded_sweeps(self) -> bool {
        !matches!(self, ExecutionMode::Serial)
    }
}

impl core::fmt::Display for ExecutionMode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// How a scalar is accumulated from per-cell terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionMode {
    /// Strict left-to-right summation.
    Ordered,
    /// Fixed-block pairwise tree; see module docs.
    Parallel,
}

/// Something that can run disjoint chunks of work, possibly on threads.
///
/// `for_each_chunk` splits `data` into consecutive `chunk`-sized pieces
/// (last one may be shorter) and calls `body(offset, piece)` once per piece,
/// where `offset` is the piece's start index within `data`. Pieces are
/// disjoint, so any execution order, including concurrent, is observably
/// identical as long as `body` only writes its piece.
pub trait Backend: Send + Sync {
    /// Worker count this backend runs on (1 for serial).
    fn threads(&self) -> usize;

    fn for_each_chunk(
        &self,
        data: &mut [f64],
        chunk: usize,
        body: &(dyn Fn(usize, &mut [f64]) + Sync),
    );
}

/// Trivial backend: runs every chunk on the calling thread, in order.
#[derive(Debug, Default, Clone, Copy)]
pub struct SerialBackend;

impl Backend for SerialBackend {
    fn threads(&self) -> usize {
        1
    }

    fn for_each_chunk(
        &self,
        data: &mut [f64],
        chunk: usize,
        body: &(dyn Fn(usize, &mut [f64]) + Sync),
    ) {
        for (k, piece) in data.chunks_mut(chunk).enumerate() {
            body(k * chunk, piece);
        }
    }
}

/// A mode paired with the backend that realizes it, plus the row-block
/// granularity for sweeps.
#[derive(Clone)]
pub struct ExecPlan {
    mode: ExecutionMode,
    backend: Arc<dyn Backend>,
    /// Rows per task; None picks ceil(rows / (4 threads)) at each sweep.
    chunk_rows: Option<usize>,
}

impl core::fmt::Debug for ExecPlan {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ExecPlan")
            .field("mode", &self.mode)
            .field("threads", &self.threads())
            .field("chunk_rows", &self.chunk_rows)
            .finish()
    }
}

impl ExecPlan {
    /// Serial mode on the in-process backend.
    pub fn serial() -> Self {
        ExecPlan {
            mode: ExecutionMode::Serial,
            backend: Arc::new(SerialBackend),
            chunk_rows: None,
        }
    }

    pub fn new(mode: ExecutionMode, backend: Arc<dyn Backend>) -> Self {
        ExecPlan { mode, backend, chunk_rows: None }
    }

    /// Fix the rows-per-task granularity instead of the automatic choice.
    pub fn with_chunk_rows(mut self, rows: usize) -> crate::Result<Self> {
        if rows == 0 {
            return Err(crate::error::invalid("chunk_rows must be >= 1"));
        }
        self.chunk_rows = Some(rows);
        Ok(self)
    }

    pub fn mode(&self) -> ExecutionMode {
        self.mode
    }

    /// Threads sweeps will actually use: 1 in serial mode, else the backend's.
    pub fn threads(&self) -> usize {
        if self.mode.threaded_sweeps() {
            self.backend.threads()
        } else {
            1
        }
    }

    fn rows_per_task(&self, total_rows: usize) -> usize {
        match self.chunk_rows {
            Some(c) => c,
            None => total_rows.div_ceil(4 * self.threads()).max(1),
        }
    }

    /// Dispatch chunks through the backend, or run them in order for a
    /// serial plan. A threaded backend inside a serial plan is bypassed, not
    /// merely single-threaded, so serial stays the reference execution.
    fn run_chunks(
        &self,
        data: &mut [f64],
        chunk: usize,
        body: &(dyn Fn(usize, &mut [f64]) + Sync),
    ) {
        debug_assert!(chunk > 0);
        if self.mode.threaded_sweeps() {
            self.backend.for_each_chunk(data, chunk, body);
        } else {
            SerialBackend.for_each_chunk(data, chunk, body);
        }
    }
}

/// Run `kernel(row_index, row_slice)` for every row of `out`, which holds
/// rows of `row_len` values starting at logical row `first_row`. Rows are
/// grouped into blocks of the plan's granularity; each block is one task.
/// The kernel must be pure over shared immutable inputs and write only its
/// row slice: under that contract the result is independent of scheduling.
/// An empty `out` is a no-op.
pub fn parallel_sweep(
    plan: &ExecPlan,
    first_row: usize,
    out: &mut [f64],
    row_len: usize,
    kernel: &(dyn Fn(usize, &mut [f64]) + Sync),
) {
    assert!(row_len > 0, "row_len must be >= 1");
    assert!(out.len() % row_len == 0, "output is not whole rows");
    let rows = out.len() / row_len;
    if rows == 0 {
        return;
    }
    let block = plan.rows_per_task(rows) * row_len;
    plan.run_chunks(out, block, &|off, piece| {
        debug_assert!(off % row_len == 0 && piece.len() % row_len == 0);
        let base = first_row + off / row_len;
        for (r, row) in piece.chunks_mut(row_len).enumerate() {
            kernel(base + r, row);
        }
    });
}

/// Reduce `f(0) + f(1) + ... + f(n-1)` using the plan's default reduction.
pub fn reduce(plan: &ExecPlan, n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    reduce_with_mode(plan, plan.mode.reduction_mode(), n, f)
}

/// Reduce with an explicit mode. The value depends only on `mode`, `n`, and
/// `f`, never on the plan's thread count; the plan only decides whether
/// block sums are computed concurrently.
pub fn reduce_with_mode(
    plan: &ExecPlan,
    mode: ReductionMode,
    n: usize,
    f: impl Fn(usize) -> f64 + Sync,
) -> f64 {
    match mode {
        ReductionMode::Ordered => ordered_sum(n, &f),
        ReductionMode::Parallel => block_tree_sum(plan, n, &f),
    }
}

fn ordered_sum(n: usize, f: &dyn Fn(usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for k in 0..n {
        acc += f(k);
    }
    acc
}

fn block_tree_sum(plan: &ExecPlan, n: usize, f: &(dyn Fn(usize) -> f64 + Sync)) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let blocks = n.div_ceil(REDUCE_BLOCK);
    let mut sums: Vec<f64> = alloc::vec![0.0; blocks];
    plan.run_chunks(&mut sums, 1, &|b, slot| {
        let lo = b * REDUCE_BLOCK;
        let hi = usize::min(lo + REDUCE_BLOCK, n);
        let mut acc = 0.0;
        for k in lo..hi {
            acc += f(k);
        }
        slot[0] = acc;
    });
    // Pairwise fold: adjacent partners at every level, odd element carried.
    let mut m = blocks;
    while m > 1 {
        let half = m / 2;
        for k in 0..half {
            sums[k] = sums[2 * k] + sums[2 * k + 1];
        }
        if m % 2 == 1 {
            sums[half] = sums[m - 1];
            m = half + 1;
        } else {
            m = half;
        }
    }
    sums[0]
}

//! Execution-mode plumbing: data-parallel sweeps with a sequential
//! fallback.
//!
//! With the `parallel` feature (default) the [`Parallelism::Threads`]
//! mode fans work out over rayon; without it, or in
//! [`Parallelism::Sequential`] mode, the same closures run on the
//! calling thread. Numeric results are identical in every mode because
//! all reductions happen over **fixed chunk boundaries combined in chunk
//! order** — thread scheduling can never reorder a floating-point sum.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a sweep or batched reduction should execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    /// Run on the calling thread.
    Sequential,
    /// Use the rayon thread pool. Falls back to sequential execution
    /// when the crate is built without the `parallel` feature.
    #[default]
    Threads,
}

impl Parallelism {
    /// Interpret a worker count: `1` means sequential, anything else
    /// (including `0` = "all cores") selects threaded execution.
    pub fn from_workers(workers: usize) -> Self {
        if workers == 1 {
            Parallelism::Sequential
        } else {
            Parallelism::Threads
        }
    }

    /// How many tasks a resumable sweep completes between persistence
    /// points: every record sequentially, batches under threading so
    /// workers stay busy.
    pub fn resume_chunk(self) -> usize {
        match self {
            Parallelism::Sequential => 1,
            Parallelism::Threads => 32,
        }
    }
}

/// Map `f` over `items`, preserving input order in the output.
pub fn map_ordered<T, U, F>(mode: Parallelism, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == Parallelism::Threads {
        return items
            .par_iter()
            .enumerate()
            .map(|(i, t)| f(i, t))
            .collect();
    }
    let _ = mode;
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Evaluate `f` over the index ranges `[0, chunk)`, `[chunk, 2*chunk)`,
/// ... and return the per-chunk results **in chunk order**.
///
/// The chunk size is a parameter of the computation, not of the
/// execution mode, so callers that fold the returned partials get
/// bitwise-identical results sequentially and threaded.
pub fn chunk_partials<U, F>(
    mode: Parallelism,
    len: usize,
    chunk: usize,
    f: F,
) -> Vec<U>
where
    U: Send,
    F: Fn(std::ops::Range<usize>) -> U + Sync + Send,
{
    assert!(chunk > 0, "chunk size must be positive");
    let ranges: Vec<_> = (0..len.div_ceil(chunk))
        .map(|c| c * chunk..((c + 1) * chunk).min(len))
        .collect();
    #[cfg(feature = "parallel")]
    if mode == Parallelism::Threads {
        return ranges.into_par_iter().map(f).collect();
    }
    let _ = mode;
    ranges.into_iter().map(f).collect()
}

/// Accumulate `len x width` contributions into one `width`-vector:
/// `out[j] = sum_i contribution(i)[j]`, chunked deterministically.
/// `fill` writes the contribution of index range `r` into its slice.
pub fn chunked_sum<F>(mode: Parallelism, len: usize, chunk: usize, width: usize, fill: F) -> Vec<f64>
where
    F: Fn(std::ops::Range<usize>, &mut [f64]) + Sync,
{
    let partials = chunk_partials(mode, len, chunk, |r| {
        let mut acc = vec![0.0; width];
        fill(r, &mut acc);
        acc
    });
    let mut out = vec![0.0; width];
    for p in partials {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out
}

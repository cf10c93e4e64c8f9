//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper partitions its index range into fixed-size chunks that do not
//! depend on the thread count, and reductions combine the per-chunk partial
//! sums in chunk order. The parallel and sequential paths therefore produce
//! bitwise-identical results.
//!
//! With the `parallel` feature disabled rayon is not linked at all. With it
//! enabled, [`set_parallel`] switches between the two paths at runtime, which
//! is what the benchmarks use to compare them.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Elements per work item.
pub const CHUNK: usize = 2048;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

pub fn set_parallel(enabled: bool) {
    FORCE_SEQUENTIAL.store(!enabled, Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// Calls `f(offset, chunk)` for consecutive `CHUNK`-sized pieces of `out`.
pub fn for_each_chunk<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    for_each_block(out, CHUNK, f)
}

/// Like [`for_each_chunk`] with a caller-chosen block length.
pub fn for_each_block<T, F>(out: &mut [T], block: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let block = block.max(1);
    #[cfg(feature = "parallel")]
    if parallel_enabled() && out.len() > block {
        out.par_chunks_mut(block)
            .enumerate()
            .for_each(|(k, c)| f(k * block, c));
        return;
    }
    out.chunks_mut(block)
        .enumerate()
        .for_each(|(k, c)| f(k * block, c));
}

/// Sets `out[i] = f(i)`.
pub fn fill<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    for_each_chunk(out, |offset, chunk| {
        for (k, v) in chunk.iter_mut().enumerate() {
            *v = f(offset + k);
        }
    })
}

/// Deterministic `Σ_{i<len} f(i)`.
pub fn sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let partial = |k: usize| {
        let lo = k * CHUNK;
        let hi = (lo + CHUNK).min(len);
        (lo..hi).map(&f).sum::<f64>()
    };
    #[cfg(feature = "parallel")]
    if parallel_enabled() && chunks > 1 {
        let parts: Vec<f64> = (0..chunks).into_par_iter().map(partial).collect();
        return parts.into_iter().sum();
    }
    (0..chunks).map(partial).sum()
}

/// Deterministic `max_{i<len} f(i)`, `0.0` for an empty range.
pub fn max<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let partial = |k: usize| {
        let lo = k * CHUNK;
        let hi = (lo + CHUNK).min(len);
        (lo..hi).map(&f).fold(0.0_f64, f64::max)
    };
    #[cfg(feature = "parallel")]
    if parallel_enabled() && chunks > 1 {
        return (0..chunks)
            .into_par_iter()
            .map(partial)
            .reduce(|| 0.0, f64::max);
    }
    (0..chunks).map(partial).fold(0.0, f64::max)
}

/// Maps independent work items, preserving order.
pub fn map<I, R, F>(items: Vec<I>, f: F) -> Vec<R>
where
    I: Send,
    R: Send,
    F: Fn(I) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() && items.len() > 1 {
        return items.into_par_iter().map(f).collect();
    }
    items.into_iter().map(f).collect()
}

/// Runs two closures, concurrently when parallelism is on.
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        return rayon::join(a, b);
    }
    (a(), b())
}

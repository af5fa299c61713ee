//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over the current
//! rayon pool. Without it, or inside [`sequential`], the same closures run in
//! a plain loop. Results are always returned in index order, so reductions
//! performed by callers are independent of the worker count.

use std::cell::Cell;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Run `f` with every helper in this module forced onto the calling thread.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    let prev = FORCE_SEQUENTIAL.with(|c| c.replace(true));
    let out = f();
    FORCE_SEQUENTIAL.with(|c| c.set(prev));
    out
}

fn forced_sequential() -> bool {
    FORCE_SEQUENTIAL.with(|c| c.get())
}

/// `(0..n).map(f).collect()`, possibly in parallel, always in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !forced_sequential() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = forced_sequential;
    (0..n).map(f).collect()
}

/// Map over a slice, possibly in parallel, preserving order.
pub fn map_slice<A, T, F>(items: &[A], f: F) -> Vec<T>
where
    A: Sync,
    T: Send,
    F: Fn(&A) -> T + Sync + Send,
{
    map_indexed(items.len(), |i| f(&items[i]))
}

/// Fixed block size for chunked Monte Carlo. Independent of worker count.
pub const BLOCK: usize = 4096;

/// Split `0..total` into fixed blocks, evaluate each block, return the
/// per-block results in order.
pub fn map_blocks<T, F>(total: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let blocks = total.div_ceil(BLOCK);
    map_indexed(blocks, |b| {
        let lo = b * BLOCK;
        f(lo..(lo + BLOCK).min(total))
    })
}

/// Run `f` inside a dedicated pool with `threads` workers (0 = rayon default).
#[cfg(feature = "parallel")]
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    if threads == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<R: Send>(_threads: usize, f: impl FnOnce() -> R + Send) -> R {
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let v = map_indexed(1000, |i| i * 2);
        assert_eq!(v, (0..1000).map(|i| i * 2).collect::<Vec<_>>());
        let s = sequential(|| map_indexed(10, |i| i));
        assert_eq!(s, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn blocks_cover_range() {
        let total = 3 * BLOCK + 17;
        let sums = map_blocks(total, |r| r.len());
        assert_eq!(sums.iter().sum::<usize>(), total);
        assert_eq!(sums.len(), 4);
    }
}

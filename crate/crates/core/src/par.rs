//! Order-preserving data-parallel helpers.
//!
//! With the `parallel` feature these dispatch to rayon; without it they run
//! sequentially. Output order always follows input order, so callers get the
//! same result for any worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(i)` for `i in 0..n` and collects the results in index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps `f` over a slice, preserving order.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Folds fixed-size chunks independently, then reduces the partial results
/// left to right. `reduce` must be associative for the result to be
/// independent of chunking; the chunk boundaries themselves are fixed.
pub fn chunked_reduce<T, A, F, R>(items: &[T], chunk: usize, fold: F, reduce: R) -> Option<A>
where
    T: Sync,
    A: Send,
    F: Fn(&[T]) -> A + Sync + Send,
    R: Fn(A, A) -> A,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    let partials: Vec<A> = items.par_chunks(chunk).map(fold).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<A> = items.chunks(chunk).map(fold).collect();
    partials.into_iter().reduce(reduce)
}

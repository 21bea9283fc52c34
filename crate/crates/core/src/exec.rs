//! Row-parallel execution helpers.
//!
//! With the `parallel` feature the helpers fan rows out over the rayon pool;
//! without it they run the same closures sequentially. Reductions always sum
//! per-row partials in row order, so both builds produce bit-identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Calls `f(y, row)` for every row of a row-major buffer.
pub(crate) fn for_each_row<F>(data: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| f(y, row));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| f(y, row));
}

/// Evaluates `f(y)` for every row and returns the partials in row order.
pub(crate) fn map_rows<T, F>(height: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return (0..height).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return (0..height).map(f).collect();
}

/// Deterministic sum of per-row partials.
pub(crate) fn sum_rows<F>(height: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_rows(height, f).into_iter().sum()
}

/// Maps `f` over independent jobs, in parallel when the feature is enabled.
pub fn map_jobs<I, T, F>(jobs: Vec<I>, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return jobs.into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return jobs.into_iter().map(f).collect();
}

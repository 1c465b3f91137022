//! Data-parallel map helpers with a sequential fallback.
//!
//! The hot loops (per-sample Monte Carlo, per-cell grid evaluation, pairwise
//! covariance assembly) are all embarrassingly parallel maps over an index
//! range. `par_map_indexed` runs them on the rayon pool when the `parallel`
//! feature is enabled and falls back to a plain loop otherwise. Results are
//! always collected in index order, so reductions downstream are
//! deterministic regardless of scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, collecting results in index order.
pub fn par_map_indexed<T, F>(n: usize, f: F) -> Vec<T>
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

/// Sequential reference version of [`par_map_indexed`], kept available in all
/// configurations so benchmarks can compare the two paths directly.
pub fn seq_map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Cap the rayon worker count for the whole process. No-op without the
/// `parallel` feature or if a pool was already built.
pub fn set_thread_cap(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_in_order() {
        let f = |i: usize| (i * i) as u64;
        assert_eq!(par_map_indexed(100, f), seq_map_indexed(100, f));
    }
}

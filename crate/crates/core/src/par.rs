//! Data-parallel helpers.
//!
//! Every independent unit of work in the crate (ensemble members, Monte-Carlo
//! repetitions, tree construction, batch scoring) goes through [`map_indexed`].
//! With the `parallel` feature the work is spread over the rayon pool; without it
//! the same closure runs in a plain loop. Results are always returned in index
//! order, so the output never depends on scheduling.

/// How a batch of independent jobs is executed.
/// Defaults to `Parallel` when the feature is enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

/// Runs `f(0..n)` with the default execution mode.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_in(Execution::default(), n, f)
}

pub fn map_indexed_in<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
    }
}

/// Sizes the global worker pool. Only the first call has any effect.
///
/// Returns `false` when the pool was already initialised or the crate was built
/// without the `parallel` feature.
pub fn configure_workers(workers: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_come_back_in_index_order() {
        let out = map_indexed(1000, |i| i * 3);
        assert!(out.iter().enumerate().all(|(i, &v)| v == i * 3));
        let seq = map_indexed_in(Execution::Sequential, 1000, |i| i * 3);
        assert_eq!(out, seq);
    }
}

//! Execution policy for the data-parallel inner loops.
//!
//! Heavy loops (Monte Carlo batches, replicate sweeps, quadrature blocks) are
//! written as order-preserving maps over an index range, so the parallel and
//! sequential paths produce identical results. With the `parallel` feature
//! (default) the `Parallel` policy runs on the rayon pool; without it the
//! policy silently degrades to the sequential path.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecPolicy {
    Sequential,
    Parallel,
}

impl ExecPolicy {
    /// Whether this policy will actually fan out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecPolicy::Parallel
    }
}

impl Default for ExecPolicy {
    fn default() -> Self {
        ExecPolicy::Parallel
    }
}

/// Order-preserving indexed map: returns `[f(0), f(1), ..., f(count-1)]`.
///
/// The output is identical for both policies; only wall-clock time differs.
pub fn map_indexed<T, F>(policy: ExecPolicy, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if policy.is_parallel() {
            use rayon::prelude::*;
            return (0..count).into_par_iter().map(f).collect();
        }
    }
    let _ = policy;
    (0..count).map(f).collect()
}

/// Configure the global rayon pool size. No-op without the `parallel`
/// feature. Returns whether the request took effect (the global pool can only
/// be built once per process).
pub fn configure_threads(n: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        return rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .is_ok();
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        false
    }
}

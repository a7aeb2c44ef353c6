//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the batch loops run on rayon;
//! without it, or with [`ExecMode::Sequential`], they run in order on the
//! calling thread. Results are always returned in input order, so callers
//! see identical output either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

pub fn map<T, U, F>(mode: ExecMode, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// Maps with a fallible function, returning the first error in input order.
/// Sequential runs stop at that error; parallel runs finish in-flight items.
pub fn try_map<T, U, E, F>(mode: ExecMode, items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => map(mode, items, f).into_iter().collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// Runs `f` inside a bounded pool of `workers` threads when parallel.
pub fn with_workers<R: Send>(mode: ExecMode, workers: usize, f: impl FnOnce() -> R + Send) -> R {
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => {
            let _ = workers;
            f()
        }
    }
}

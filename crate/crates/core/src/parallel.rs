//! Order-preserving map over independent jobs.
//!
//! With the `parallel` feature the jobs run on a rayon pool bounded by `jobs`; without it
//! (e.g. in the browser build) they run sequentially. Either way the output is indexed
//! by input position, so results do not depend on completion order.

/// Default worker count: `SGM_JOBS` if set and positive, else the available cores.
pub fn default_jobs() -> usize {
    std::env::var("SGM_JOBS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(count: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if jobs <= 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
        Err(err) => {
            log::warn!("falling back to sequential execution: {err}");
            (0..count).map(f).collect()
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(count: usize, _jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}

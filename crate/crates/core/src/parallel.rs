//! Worker-pool sizing for embarrassingly parallel scans.

use rayon::ThreadPool;

/// Environment variable capping worker threads; `0` or unset means automatic.
pub const THREADS_ENV: &str = "COMMONS_LAB_THREADS";

pub fn thread_cap() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

/// Runs `work` on a pool sized by [`THREADS_ENV`].
pub fn run<R: Send>(work: impl FnOnce() -> R + Send) -> R {
    let pool: Option<ThreadPool> = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_cap())
        .build()
        .ok();
    match pool {
        Some(pool) => pool.install(work),
        None => work(),
    }
}

//! Worker-count control.
//!
//! Work is always split into fixed-size chunks and reduced in chunk order, so
//! the number of workers only changes wall-clock time, never results.

use std::sync::OnceLock;

static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();

/// Environment variable consulted when no explicit thread count is given.
pub const THREADS_ENV: &str = "HOTSPOT_THREADS";

/// Configure the global worker pool. Only the first call has any effect.
pub fn init_threads(threads: Option<usize>) {
    let n = threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let _ = POOL.set(build(n));
}

fn build(n: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool")
}

/// Run `f` inside the configured pool.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    POOL.get_or_init(|| {
        let n = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
            .filter(|&n: &usize| n > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
        build(n)
    })
    .install(f)
}

/// Run `f` inside a temporary pool of exactly `n` workers.
pub fn with_threads<R: Send>(n: usize, f: impl FnOnce() -> R + Send) -> R {
    build(n.max(1)).install(f)
}

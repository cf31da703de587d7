//! Thread-pool plumbing.
//!
//! Internal parallelism is capped by the `SGPR_THREADS` environment variable
//! (0 or 1 = sequential, unset = rayon default). All parallel loops in this
//! crate write into indexed slots, so results are independent of scheduling.

use rayon::ThreadPool;
use std::sync::OnceLock;

static POOL: OnceLock<Option<ThreadPool>> = OnceLock::new();

fn pool() -> &'static Option<ThreadPool> {
    POOL.get_or_init(|| {
        let threads = std::env::var("SGPR_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok());
        match threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .ok(),
            None => None,
        }
    })
}

/// Run `f` under the configured thread pool.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match pool() {
        Some(p) => p.install(f),
        None => f(),
    }
}

/// Run `f` on a dedicated single-thread pool regardless of configuration.
///
/// Timing probes use this so that wall-clock comparisons between algorithms
/// are not skewed by how well each one happens to parallelize.
pub fn install_sequential<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let p = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("single-thread pool");
    p.install(f)
}

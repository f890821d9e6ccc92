//! Internal parallelism, capped by `SUBTOK_THREADS`.

use std::sync::OnceLock;

use rayon::{ThreadPool, ThreadPoolBuilder};

pub const THREADS_ENV: &str = "SUBTOK_THREADS";

static POOL: OnceLock<Option<ThreadPool>> = OnceLock::new();

fn capped_pool() -> Option<&'static ThreadPool> {
    POOL.get_or_init(|| {
        let n: usize = std::env::var(THREADS_ENV).ok()?.trim().parse().ok()?;
        ThreadPoolBuilder::new().num_threads(n.max(1)).build().ok()
    })
    .as_ref()
}

/// Run `f` inside the capped pool when `SUBTOK_THREADS` is set, otherwise on
/// rayon's global pool.
pub fn install<R, F>(f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match capped_pool() {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

//! Independent trajectories on a rayon pool. Each member owns its noise
//! stream, results come back in member order and every reduction happens
//! afterwards on one thread, so the worker count never changes a number.

use rayon::prelude::*;

pub fn run<T, F>(members: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..members).into_par_iter().map(f).collect()
}

/// Runs `f` on a dedicated pool of `threads` workers (all cores when `None`).
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n.max(1));
    }
    match b.build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("could not build thread pool ({e}); using the global one");
            f()
        }
    }
}

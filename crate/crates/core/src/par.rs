//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) these dispatch to rayon; without it
//! they run the same closures sequentially. Results are identical either way
//! because every helper writes to a fixed output position.
//!
//! Called from outside any rayon pool, the helpers run on a shared pool
//! whose size is capped by the `HIEROGLYPH_THREADS` environment variable
//! (read once). Called from inside a pool, they use that pool, so callers can
//! still pick a thread count with `ThreadPool::install`.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const THREADS_ENV: &str = "HIEROGLYPH_THREADS";

/// Parses a thread cap; `None` for unset, empty, zero or garbage.
pub fn parse_thread_cap(value: Option<&str>) -> Option<usize> {
    value?.trim().parse::<usize>().ok().filter(|&n| n > 0)
}

/// Thread cap requested through the environment.
pub fn thread_cap() -> Option<usize> {
    let raw = std::env::var(THREADS_ENV).ok();
    let cap = parse_thread_cap(raw.as_deref());
    if cap.is_none() && raw.as_deref().is_some_and(|s| !s.trim().is_empty()) {
        log::warn!("ignoring {THREADS_ENV}={:?}", raw.unwrap_or_default());
    }
    cap
}

#[cfg(feature = "parallel")]
fn pool() -> &'static rayon::ThreadPool {
    static POOL: std::sync::OnceLock<rayon::ThreadPool> = std::sync::OnceLock::new();
    POOL.get_or_init(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(thread_cap().unwrap_or(0))
            .thread_name(|i| format!("gliaskel-{i}"))
            .build()
            .expect("thread pool")
    })
}

#[cfg(feature = "parallel")]
fn run<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    if rayon::current_thread_index().is_some() {
        f()
    } else {
        pool().install(f)
    }
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        run(|| (0..n).into_par_iter().map(f).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps `f` over a slice, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        run(|| items.par_iter().map(f).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Calls `f(chunk_index, chunk)` on consecutive chunks of `len` elements.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let len = len.max(1);
    #[cfg(feature = "parallel")]
    {
        run(|| data.par_chunks_mut(len).enumerate().for_each(|(i, c)| f(i, c)));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(len).enumerate().for_each(|(i, c)| f(i, c));
    }
}

/// Number of worker threads the helpers will use from the calling thread.
pub fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        run(rayon::current_num_threads)
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

//! Data-parallel helpers. With the `parallel` feature these fan out over rayon;
//! without it they run sequentially with identical results and ordering.

#[cfg(feature = "parallel")]
mod actual {
    use rayon::prelude::*;

    pub fn map_range<R, F>(start: u64, end: u64, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(u64) -> R + Sync + Send,
    {
        (start..end).into_par_iter().map(f).collect()
    }

    pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        items.par_iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
mod actual {
    pub fn map_range<R, F>(start: u64, end: u64, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(u64) -> R + Sync + Send,
    {
        (start..end).map(f).collect()
    }

    pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        items.iter().map(f).collect()
    }
}

pub use actual::{map_range, map_slice};

/// Sequential versions, always available (used by benches for comparison).
pub mod seq {
    pub fn map_range<R, F: Fn(u64) -> R>(start: u64, end: u64, f: F) -> Vec<R> {
        (start..end).map(f).collect()
    }
}

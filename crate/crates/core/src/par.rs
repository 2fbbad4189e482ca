//! Data-parallel helpers that fall back to sequential iteration when the
//! `parallel` feature is off. Results are ordered by index either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..count).map(f).collect()`, in parallel when enabled.
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Sequential `map_indexed`, always available for comparison.
pub fn map_indexed_serial<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}

/// Maps each item and merges results with an associative `merge`.
pub fn fold_items<I, A, F, M>(items: &[I], identity: impl Fn() -> A + Sync + Send, f: F, merge: M) -> A
where
    I: Sync,
    A: Send,
    F: Fn(A, &I) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items
            .par_iter()
            .fold(&identity, &f)
            .reduce(&identity, &merge)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = &merge;
        items.iter().fold(identity(), f)
    }
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

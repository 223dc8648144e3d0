//! Dispatch layer between rayon and plain iteration. With the `parallel`
//! feature disabled the same entry points run sequentially. Results are
//! index-ordered either way and reductions happen outside this module in
//! deterministic order, so thread count never changes output bytes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::Result;

/// Map `f` over `0..n`, returning results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Fallible variant. All indices are evaluated; the error reported is the
/// one at the smallest index so failures are deterministic too.
pub fn try_map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let results = map_indexed(n, f);
    let mut out = Vec::with_capacity(n);
    for r in results {
        out.push(r?);
    }
    Ok(out)
}

/// Sequential twin of [`map_indexed`], kept callable with the feature on
/// so benchmarks can compare both paths in one build.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Update each element in place, observing its index.
pub fn for_each_indexed<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    items.par_iter_mut().enumerate().for_each(|(i, v)| f(i, v));
    #[cfg(not(feature = "parallel"))]
    items.iter_mut().enumerate().for_each(|(i, v)| f(i, v));
}

/// Cap the rayon worker pool. `n == 0` leaves the default. Without the
/// `parallel` feature this is a no-op; either way it only affects wall
/// time, never results. Calls after the pool exists are ignored.
pub fn configure_workers(n: usize) {
    #[cfg(feature = "parallel")]
    {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
    }
}

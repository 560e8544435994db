//! Data-parallel evaluation over point batches.
//!
//! Per-point computations in this crate are pure, so batches parallelize
//! freely. With the `parallel` feature (default) [`map_points`] fans out via
//! rayon; without it the same call runs sequentially. [`map_points_seq`] is
//! always sequential, which the benchmark suite uses as the baseline.

#[cfg(feature = "parallel")]
pub fn map_points<P, T, F>(points: &[P], f: F) -> Vec<T>
where
    P: Sync,
    T: Send,
    F: Fn(&P) -> T + Sync + Send,
{
    use rayon::prelude::*;
    points.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_points<P, T, F>(points: &[P], f: F) -> Vec<T>
where
    P: Sync,
    T: Send,
    F: Fn(&P) -> T + Sync + Send,
{
    points.iter().map(f).collect()
}

/// Sequential baseline, available regardless of features.
pub fn map_points_seq<P, T, F>(points: &[P], f: F) -> Vec<T>
where
    F: Fn(&P) -> T,
{
    points.iter().map(f).collect()
}

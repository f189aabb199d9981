//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) these run on the rayon global pool.
//! Without it every helper degrades to the equivalent sequential loop, so the
//! numerical results are bitwise identical between the two builds: work is
//! split by row or by batch item, and any reduction over the pieces is done
//! sequentially in index order by the caller.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Grids smaller than this are swept sequentially; the per-task overhead
/// dominates below it.
pub const MIN_PARALLEL_CELLS: usize = 1 << 14;

/// True when the crate was built with rayon support.
pub const fn enabled() -> bool {
    cfg!(feature = "parallel")
}

/// Calls `f(j, row)` for every row of a row-major `nx`-wide buffer.
pub fn for_each_row_mut<T, F>(data: &mut [T], nx: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if nx == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if data.len() >= MIN_PARALLEL_CELLS {
        data.par_chunks_mut(nx)
            .enumerate()
            .for_each(|(j, row)| f(j, row));
        return;
    }
    data.chunks_mut(nx).enumerate().for_each(|(j, row)| f(j, row));
}

/// Evaluates `f(j)` for each of `ny` rows of an `nx`-wide grid and returns
/// the per-row results in row order.
pub fn map_rows<R, F>(nx: usize, ny: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if nx * ny >= MIN_PARALLEL_CELLS {
        return (0..ny).into_par_iter().map(f).collect();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = nx;
    (0..ny).map(f).collect()
}

/// Sums per-row partial results in row order (deterministic regardless of
/// the thread count).
pub fn sum_rows<F>(nx: usize, ny: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_rows(nx, ny, f).into_iter().sum()
}

/// Row-wise maximum, in row order.
pub fn max_rows<F>(nx: usize, ny: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_rows(nx, ny, f).into_iter().fold(0.0, f64::max)
}

/// Independent batch work (thresholds, random instances, problem pairs).
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_visited_in_place() {
        let nx = 200;
        let ny = 100;
        let mut data = vec![0usize; nx * ny];
        for_each_row_mut(&mut data, nx, |j, row| {
            for (i, v) in row.iter_mut().enumerate() {
                *v = j * nx + i;
            }
        });
        assert!(data.iter().enumerate().all(|(k, &v)| k == v));
    }

    #[test]
    fn batch_map_keeps_order() {
        let out = map_indexed(50, |k| k * k);
        assert_eq!(out, (0..50).map(|k| k * k).collect::<Vec<_>>());
    }
}

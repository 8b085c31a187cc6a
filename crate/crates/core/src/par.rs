//! Replica-level parallelism.
//!
//! With the `parallel` feature (on by default) replicas are spread over the
//! rayon pool; without it they run in order on the calling thread. Either way
//! the results come back in replica-index order, so aggregates do not depend
//! on scheduling.

/// `f(0), f(1), ..., f(n-1)` in index order.
#[cfg(feature = "parallel")]
pub fn map_replicas<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_replicas<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_replicas_sequential(n, f)
}

/// Always sequential; the reference path for benchmarks and debugging.
pub fn map_replicas_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Collects `Result`s in index order, returning the first error by index.
pub fn try_map_replicas<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_replicas(n, f).into_iter().collect()
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let v = map_replicas(1000, |i| i * i);
        assert_eq!(v, map_replicas_sequential(1000, |i| i * i));
    }

    #[test]
    fn first_error_by_index_wins() {
        let r: Result<Vec<usize>, usize> = try_map_replicas(100, |i| if i % 30 == 29 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(29));
    }
}

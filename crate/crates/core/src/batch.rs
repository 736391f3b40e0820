//! Order-preserving batch mapping. With the `parallel` feature (default)
//! items run on a rayon pool sized by `jobs`; without it everything runs
//! sequentially and `jobs` is ignored.

/// Map items in input order. `jobs = None` uses the default pool size,
/// `Some(n)` pins the pool to `n` workers.
pub fn map<T, U, F>(items: Vec<T>, jobs: Option<usize>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_parallel(items, jobs, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        map_sequential(items, f)
    }
}

pub fn map_sequential<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_parallel<T, U, F>(items: Vec<T>, jobs: Option<usize>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    match jobs {
        Some(n) if n >= 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("thread pool construction");
            pool.install(|| items.into_par_iter().map(f).collect())
        }
        _ => items.into_par_iter().map(f).collect(),
    }
}

/// True when this build runs batches on a thread pool.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_input_order() {
        let items: Vec<u64> = (0..200).collect();
        let out = map(items.clone(), Some(4), |x| x * 3);
        let expected: Vec<u64> = items.iter().map(|x| x * 3).collect();
        assert_eq!(out, expected);
    }

    #[test]
    fn sequential_matches_dispatch() {
        let items: Vec<u64> = (0..50).collect();
        let a = map_sequential(items.clone(), |x| x * x);
        let b = map(items, None, |x| x * x);
        assert_eq!(a, b);
    }
}

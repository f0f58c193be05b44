//! Independent runs executed either sequentially or on a rayon pool.
//!
//! Each job owns its objective, counter and RNG, so the results do not
//! depend on the execution mode. Without the `parallel` feature every mode
//! falls back to sequential execution.

/// How to execute a batch of independent jobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Sequential,
    /// Rayon pool with the given number of threads (0 = rayon's default).
    Threads(usize),
}

impl Parallelism {
    pub fn from_threads(n: Option<usize>) -> Self {
        match n {
            None | Some(1) => Parallelism::Sequential,
            Some(n) => Parallelism::Threads(n),
        }
    }
}

/// Maps `job` over `inputs`, preserving order.
pub fn run_batch<I, T, F>(inputs: Vec<I>, mode: Parallelism, job: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Send + Sync,
{
    match mode {
        Parallelism::Sequential => inputs.into_iter().map(job).collect(),
        Parallelism::Threads(n) => parallel(inputs, n, job),
    }
}

#[cfg(feature = "parallel")]
fn parallel<I, T, F>(inputs: Vec<I>, threads: usize, job: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Send + Sync,
{
    use rayon::prelude::*;

    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| inputs.into_par_iter().map(&job).collect()),
        Err(_) => inputs.into_iter().map(job).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel<I, T, F>(inputs: Vec<I>, _threads: usize, job: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Send + Sync,
{
    inputs.into_iter().map(job).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let inputs: Vec<u64> = (0..64).collect();
        let seq = run_batch(inputs.clone(), Parallelism::Sequential, |x| x * x);
        let par = run_batch(inputs, Parallelism::Threads(4), |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq[7], 49);
    }

    #[test]
    fn thread_count_mapping() {
        assert_eq!(Parallelism::from_threads(None), Parallelism::Sequential);
        assert_eq!(Parallelism::from_threads(Some(1)), Parallelism::Sequential);
        assert_eq!(Parallelism::from_threads(Some(3)), Parallelism::Threads(3));
    }
}

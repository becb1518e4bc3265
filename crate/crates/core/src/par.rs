//! Execution strategy for the data-parallel loops (grid scans, Monte Carlo
//! batches, decay tables).
//!
//! Every loop goes through [`map_indexed`], which always returns results in
//! index order. With the `parallel` feature disabled, [`Exec::Parallel`]
//! silently runs sequentially, so outputs are identical in both builds.

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[default]
    Parallel,
    Sequential,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Maps `f` over `0..n`, preserving index order in the output.
pub fn map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Fallible [`map_indexed`]; the first error in index order wins.
pub fn try_map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_indexed(exec, n, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let par = map_indexed(Exec::Parallel, 1000, |i| i * i);
        let seq = map_indexed(Exec::Sequential, 1000, |i| i * i);
        assert_eq!(par, seq);
        assert_eq!(par[31], 961);
    }

    #[test]
    fn first_error_in_index_order() {
        let r: Result<Vec<usize>> = try_map_indexed(Exec::Parallel, 100, |i| {
            if i % 30 == 29 {
                Err(crate::Error::Parameter(format!("bad {i}")))
            } else {
                Ok(i)
            }
        });
        assert!(matches!(r, Err(crate::Error::Parameter(m)) if m == "bad 29"));
    }
}

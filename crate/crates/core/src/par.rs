//! Order-preserving map over independent work items.
//!
//! Without the `parallel` feature every path runs sequentially; results are
//! identical either way because each item carries its own random stream and
//! outputs are reduced in index order.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// Whether work is actually spread over threads in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// `(0..n).map(f)` collected in index order.
pub fn map_indexed<T, F>(n: usize, mode: Parallelism, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        let f = |i: usize| (i * i) as u64;
        assert_eq!(
            map_indexed(100, Parallelism::Sequential, f),
            map_indexed(100, Parallelism::Parallel, f)
        );
        assert!(map_indexed(0, Parallelism::Parallel, f).is_empty());
    }
}

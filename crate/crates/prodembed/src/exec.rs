//! Thread-pool executor for the core's per-item work.
//!
//! Results come back in index order and the core reduces them
//! sequentially, so outputs do not depend on the thread count.

use prodembed_core::pretrain::Executor;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::{Error, Result};

pub struct Threads {
    pool: Option<ThreadPool>,
}

impl Threads {
    /// `n = 1` runs inline on the calling thread.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("threads", "must be at least 1"));
        }
        let pool = if n == 1 {
            None
        } else {
            let p = ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config("threads", e.to_string()))?;
            Some(p)
        };
        Ok(Threads { pool })
    }
}

impl Executor for Threads {
    fn map<T, F>(&self, n: usize, f: F) -> prodembed_core::Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> prodembed_core::Result<T> + Sync + Send,
    {
        match &self.pool {
            None => (0..n).map(f).collect(),
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_across_pools() {
        let seq = Threads::new(1).unwrap().map(100, |i| Ok(i * i)).unwrap();
        let par = Threads::new(4).unwrap().map(100, |i| Ok(i * i)).unwrap();
        assert_eq!(seq, par);
        assert!(Threads::new(0).is_err());
    }
}

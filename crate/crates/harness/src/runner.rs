//! Deterministic parallel execution of independent replicas.
//!
//! Replicas are grouped into fixed-size chunks. Each chunk folds its replicas
//! in index order into an accumulator and chunks are merged in chunk order, so
//! results do not depend on the number of worker threads.

use crate::error::{HarnessError, Result};
use rayon::prelude::*;

pub const CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Runner {
    jobs: usize,
}

impl Default for Runner {
    fn default() -> Self {
        Self { jobs: 1 }
    }
}

impl Runner {
    pub fn new(jobs: usize) -> Self {
        Self { jobs: jobs.max(1) }
    }

    pub fn jobs(&self) -> usize {
        self.jobs
    }

    /// Folds `body(acc, index)` over `0..count` and merges chunk accumulators
    /// in order. The first error by replica index wins.
    pub fn fold<A, I, B, M>(&self, count: usize, init: I, body: B, merge: M) -> Result<A>
    where
        A: Send,
        I: Fn() -> A + Sync,
        B: Fn(&mut A, usize) -> Result<()> + Sync,
        M: Fn(&mut A, A),
    {
        let chunks = count.div_ceil(CHUNK);
        let run_chunk = |c: usize| -> Result<A> {
            let mut acc = init();
            for i in c * CHUNK..((c + 1) * CHUNK).min(count) {
                body(&mut acc, i)?;
            }
            Ok(acc)
        };
        let parts: Vec<Result<A>> = if self.jobs == 1 {
            (0..chunks).map(run_chunk).collect()
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.jobs)
                .build()
                .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))?;
            pool.install(|| (0..chunks).into_par_iter().map(run_chunk).collect())
        };
        let mut out = init();
        for part in parts {
            merge(&mut out, part?);
        }
        Ok(out)
    }

    /// Runs `body` for each index and returns the results in index order.
    pub fn map<T, B>(&self, count: usize, body: B) -> Result<Vec<T>>
    where
        T: Send,
        B: Fn(usize) -> Result<T> + Sync,
    {
        self.fold(
            count,
            Vec::new,
            |acc: &mut Vec<T>, i| {
                acc.push(body(i)?);
                Ok(())
            },
            |out, part| out.extend(part),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_count_does_not_change_results() {
        let body = |i: usize| Ok(((i as f64) * 0.37).sin() / 3.0);
        let one = Runner::new(1).map(300, body).unwrap();
        let four = Runner::new(4).map(300, body).unwrap();
        assert_eq!(one, four);
        let sum = |r: Runner| {
            r.fold(1000, || 0.0, |acc: &mut f64, i| {
                *acc += 1.0 / (1.0 + i as f64);
                Ok(())
            }, |a, b| *a += b)
            .unwrap()
        };
        assert_eq!(sum(Runner::new(1)).to_bits(), sum(Runner::new(3)).to_bits());
    }

    #[test]
    fn first_error_by_index() {
        let r = Runner::new(2).map(500, |i| if i == 130 || i == 420 { Err(HarnessError::Config(format!("{i}"))) } else { Ok(i) });
        match r {
            Err(HarnessError::Config(s)) => assert_eq!(s, "130"),
            _ => panic!("expected error"),
        }
    }
}

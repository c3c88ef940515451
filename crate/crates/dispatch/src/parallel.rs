//! Restart fan-out over a thread pool.

use dispatch_core::relocation::{best_partition, CenterProblem};
use dispatch_core::sim::RestartRunner;
use dispatch_core::{Partition, RelocationError};
use rayon::prelude::*;

/// Runs one descent per seed in parallel. The reduction is order-independent,
/// so the result matches the sequential run bit for bit.
pub fn parallel_restarts(
    problem: &CenterProblem<'_>,
    k: usize,
    seeds: &[u64],
) -> Result<Partition, RelocationError> {
    if seeds.is_empty() {
        return Err(RelocationError::NoSeeds);
    }
    let runs = seeds
        .par_iter()
        .map(|&s| problem.search(k, s).map(|r| r.partition))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(best_partition(runs).expect("at least one run"))
}

pub fn rayon_runner() -> Box<RestartRunner> {
    Box::new(parallel_restarts)
}

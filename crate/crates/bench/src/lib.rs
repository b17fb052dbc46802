//! Fixtures shared by the benchmark targets.

use votecount::sim::suite::reference_world;
use votecount::EmpiricalErrorCounts;

/// Validation counts of `n` examples drawn from the reference world.
pub fn reference_counts(m: usize, n: usize, seed: u64) -> EmpiricalErrorCounts {
    let world = reference_world(m, seed).expect("valid ensemble size");
    let mut counts = vec![0u64; m + 1];
    for i in world.sample_counts(n, 0) {
        counts[i] += 1;
    }
    EmpiricalErrorCounts::new(counts).expect("non-empty sample")
}

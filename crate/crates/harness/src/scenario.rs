//! Default synthetic scenario: the output space and the safe-model seeds
//! used when no distribution file is supplied.
//!
//! The safe side of a group is a near-consensus block — most models
//! concentrate on one safe answer — plus, when the group is large enough,
//! a single low-agreement outlier favoring a different safe answer. This
//! mirrors ensembles mixing strong and weak models: overlap among the
//! declared-s smallest statistics stays small (so the baseline abstains at
//! realistic rates) while the consensus answer keeps enough backing to win
//! trace selections against concentrated attacks.

use rcs_core::{Dist64, FiniteDistribution, OutputSpace};

pub const DEFAULT_SPACE_SIZE: usize = 8;
pub const DEFAULT_UNSAFE_INDICES: [usize; 2] = [6, 7];

/// Index of the consensus safe answer in the default space.
pub const CONSENSUS_RESPONSE: usize = 0;

pub fn default_space() -> OutputSpace {
    OutputSpace::new(DEFAULT_SPACE_SIZE, DEFAULT_UNSAFE_INDICES).expect("static space is valid")
}

/// High-agreement seed: 0.985 on the consensus answer, 0.5% unsafe leak.
pub fn consensus_base() -> Dist64 {
    FiniteDistribution::new(vec![0.985, 0.003, 0.003, 0.002, 0.001, 0.001, 0.003, 0.002])
        .expect("static base is valid")
}

/// Low-agreement seed favoring a different safe answer.
pub fn outlier_base() -> Dist64 {
    FiniteDistribution::new(vec![0.002, 0.970, 0.010, 0.005, 0.004, 0.004, 0.003, 0.002])
        .expect("static base is valid")
}

/// Seed list for a group with `safe_count` safe models: one base per model
/// (the generator cycles through them), all consensus except a single
/// trailing outlier once the group is large enough to absorb one.
pub fn default_base_dists(safe_count: usize) -> Vec<Dist64> {
    assert!(safe_count >= 1);
    if safe_count >= 3 {
        let mut bases = vec![consensus_base(); safe_count - 1];
        bases.push(outlier_base());
        bases
    } else {
        vec![consensus_base(); safe_count]
    }
}

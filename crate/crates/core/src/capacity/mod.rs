//! Causal capacity: the entropy of a state's next-state distribution under
//! the uniform random policy.
//!
//! Two estimators are provided. The Monte Carlo estimator counts logged
//! transitions per state bin. The clustered estimator, for continuous state
//! spaces, takes the sampled states in the distance band `[tau_nei, tau_adj)`
//! around an anchor, groups them by average-linkage agglomerative clustering
//! and uses the cluster-size frequencies. On tabular MDPs both are checked
//! against exact entropies computed from the transition tensor, together with
//! the transfer-entropy bounds.

mod cluster;
mod counts;
mod entropy;
mod map;
mod partition;
mod transfer;

pub use cluster::{agglomerative_cluster, ClusterResult};
pub use counts::{count_transitions, CountTable, StateCounts};
pub use entropy::{entropy, entropy_from_counts, miller_madow};
pub use map::{capacity_map, read_capacity_map, write_capacity_map, CapacityEntry, CapacityMap, Estimator};
pub use partition::{partition_states, Partition, PartitionConfig};
pub use transfer::{
    check_propositions, exact_capacity, exact_transfer_entropy, BoundKind, BoundReport, McCheck,
    Violation,
};

use crate::geometry::StateKey;

/// Default minimum number of samples before a capacity is reported as confident.
pub const DEFAULT_MIN_SAMPLES: u64 = 20;

#[derive(Debug, thiserror::Error)]
pub enum CapacityError {
    #[error("no transitions to count")]
    EmptyData,
    #[error("state {key} has {found} samples, need {needed}")]
    InsufficientSamples { key: StateKey, found: u64, needed: u64 },
    #[error("clustering input is empty")]
    EmptyInput,
    #[error("invalid partition config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Tabular(#[from] crate::mdpcore::TabularError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed capacity file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// Options of the Monte Carlo estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McOptions {
    pub min_samples: u64,
    /// Drop `s -> s` transitions. In mazes these are blocked moves, which stay
    /// within the same physical state and carry no transition choice.
    pub exclude_self: bool,
    /// Add the Miller–Madow correction `(K - 1) / 2N`.
    pub miller_madow: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { min_samples: DEFAULT_MIN_SAMPLES, exclude_self: false, miller_madow: false }
    }
}

/// Capacity of one state with its support size and sample count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CapacityEstimate {
    pub capacity: f64,
    pub support: usize,
    pub samples: u64,
}

/// Plug-in entropy of the empirical next-state distribution of `key`.
pub fn capacity_mc(
    counts: &CountTable,
    key: StateKey,
    opts: McOptions,
) -> Result<CapacityEstimate, CapacityError> {
    let est = counts.estimate(key, opts);
    if est.samples < opts.min_samples {
        return Err(CapacityError::InsufficientSamples {
            key,
            found: est.samples,
            needed: opts.min_samples,
        });
    }
    Ok(est)
}

pub use cluster::capacity_clustered;

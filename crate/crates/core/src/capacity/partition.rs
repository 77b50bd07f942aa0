use super::{CapacityError, DEFAULT_MIN_SAMPLES};
use crate::geometry::{Metric, Vec2};

/// Distance bands and clustering parameters of the clustered estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionConfig {
    /// Samples closer than this are the same physical state.
    pub tau_nei: f64,
    /// Samples in `[tau_nei, tau_adj)` are one-step successors.
    pub tau_adj: f64,
    pub metric: Metric,
    /// Average-linkage merging stops once the closest pair is at least this far apart.
    pub link_threshold: f64,
    /// The successor band is stride-subsampled to at most this many points before clustering.
    pub max_cluster_points: usize,
    pub min_samples: u64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            tau_nei: 0.7,
            tau_adj: 1.0,
            metric: Metric::Euclidean,
            link_threshold: 0.7,
            max_cluster_points: 400,
            min_samples: DEFAULT_MIN_SAMPLES,
        }
    }
}

impl PartitionConfig {
    pub fn validate(&self) -> Result<(), CapacityError> {
        if !(self.tau_nei > 0.0 && self.tau_nei < self.tau_adj) {
            return Err(CapacityError::BadConfig(format!(
                "need 0 < tau_nei < tau_adj, got tau_nei = {}, tau_adj = {}",
                self.tau_nei, self.tau_adj
            )));
        }
        if self.link_threshold <= 0.0 {
            return Err(CapacityError::BadConfig("link_threshold must be positive".into()));
        }
        if self.max_cluster_points < 2 {
            return Err(CapacityError::BadConfig("max_cluster_points must be at least 2".into()));
        }
        Ok(())
    }
}

/// Indices of samples in each distance band around an anchor.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Partition {
    pub nei: Vec<usize>,
    pub adj: Vec<usize>,
    pub out: Vec<usize>,
}

/// Splits samples into `d < tau_nei`, `tau_nei <= d < tau_adj` and `d >= tau_adj`.
pub fn partition_states(samples: &[Vec2], anchor: Vec2, cfg: &PartitionConfig) -> Partition {
    let mut p = Partition::default();
    for (i, &s) in samples.iter().enumerate() {
        let d = cfg.metric.dist(anchor, s);
        if d < cfg.tau_nei {
            p.nei.push(i);
        } else if d < cfg.tau_adj {
            p.adj.push(i);
        } else {
            p.out.push(i);
        }
    }
    p
}

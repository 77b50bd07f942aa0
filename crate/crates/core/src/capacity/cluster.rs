use super::entropy::entropy_from_counts;
use super::partition::{partition_states, PartitionConfig};
use super::{CapacityError, CapacityEstimate};
use crate::geometry::{Metric, Vec2};

/// Disjoint clusters covering the input points, ordered by their smallest
/// member index, with `p_i = |cluster_i| / n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterResult {
    pub clusters: Vec<Vec<usize>>,
    pub probabilities: Vec<f64>,
}

impl ClusterResult {
    pub fn sizes(&self) -> Vec<u64> {
        self.clusters.iter().map(|c| c.len() as u64).collect()
    }

    /// `-sum p ln p` over cluster frequencies.
    pub fn entropy(&self) -> f64 {
        entropy_from_counts(self.sizes())
    }
}

/// Bottom-up average-linkage clustering.
///
/// Starts from singletons and repeatedly merges the closest pair of clusters
/// until the closest pair is at least `link_threshold` apart. Ties go to the
/// lexicographically smallest pair of representative indices, where a merged
/// cluster is represented by its smallest member.
///
/// Each active cluster caches its nearest neighbour. Under average linkage a
/// merged distance is a weighted mean of the two old distances, so it never
/// undercuts an existing cached minimum; only clusters whose cached neighbour
/// took part in the merge need a rescan.
pub fn agglomerative_cluster(
    points: &[Vec2],
    metric: Metric,
    link_threshold: f64,
) -> Result<ClusterResult, CapacityError> {
    let n = points.len();
    if n == 0 {
        return Err(CapacityError::EmptyInput);
    }
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = metric.dist(points[i], points[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();

    let nearest = |i: usize, dist: &[f64], active: &[bool]| -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in 0..n {
            if j != i && active[j] && dist[i * n + j] < best.0 {
                best = (dist[i * n + j], j);
            }
        }
        best
    };
    let mut best: Vec<(f64, usize)> = (0..n).map(|i| nearest(i, &dist, &active)).collect();

    loop {
        // Global closest pair, ties by (lo, hi).
        let mut pick: Option<(f64, usize, usize)> = None;
        for i in (0..n).filter(|&i| active[i]) {
            let (d, j) = best[i];
            if j == usize::MAX {
                continue;
            }
            let cand = (d, i.min(j), i.max(j));
            let better = match pick {
                None => true,
                Some(p) => cand.0 < p.0 || (cand.0 == p.0 && (cand.1, cand.2) < (p.1, p.2)),
            };
            if better {
                pick = Some(cand);
            }
        }
        let Some((d, lo, hi)) = pick else { break };
        if d >= link_threshold {
            break;
        }

        let (s_lo, s_hi) = (size[lo] as f64, size[hi] as f64);
        for k in 0..n {
            if active[k] && k != lo && k != hi {
                let merged = (s_lo * dist[lo * n + k] + s_hi * dist[hi * n + k]) / (s_lo + s_hi);
                dist[lo * n + k] = merged;
                dist[k * n + lo] = merged;
            }
        }
        active[hi] = false;
        size[lo] += size[hi];
        let moved = std::mem::take(&mut members[hi]);
        members[lo].extend(moved);

        best[lo] = nearest(lo, &dist, &active);
        for k in 0..n {
            if !active[k] || k == lo {
                continue;
            }
            if best[k].1 == lo || best[k].1 == hi {
                best[k] = nearest(k, &dist, &active);
            } else {
                let dk = dist[k * n + lo];
                if dk < best[k].0 || (dk == best[k].0 && lo < best[k].1) {
                    best[k] = (dk, lo);
                }
            }
        }
    }

    let mut clusters: Vec<Vec<usize>> = members
        .into_iter()
        .zip(&active)
        .filter(|(_, &a)| a)
        .map(|(mut m, _)| {
            m.sort_unstable();
            m
        })
        .collect();
    clusters.sort_by_key(|c| c[0]);
    let probabilities = clusters.iter().map(|c| c.len() as f64 / n as f64).collect();
    Ok(ClusterResult { clusters, probabilities })
}

/// Clustered capacity of `anchor`: partition the samples, cluster the
/// successor band and take the entropy of the cluster frequencies.
///
/// `samples` in the estimate is the size of the full band; clustering runs on
/// a stride subsample of at most `max_cluster_points` points. An empty band
/// is an error. Small bands are estimated anyway; the caller decides what
/// counts as enough.
pub fn capacity_clustered(
    samples: &[Vec2],
    anchor: Vec2,
    cfg: &PartitionConfig,
) -> Result<(CapacityEstimate, ClusterResult), CapacityError> {
    cfg.validate()?;
    let band = partition_states(samples, anchor, cfg).adj;
    if band.is_empty() {
        return Err(CapacityError::EmptyInput);
    }
    let stride = band.len().div_ceil(cfg.max_cluster_points);
    let points: Vec<Vec2> = band.iter().step_by(stride).map(|&i| samples[i]).collect();
    let result = agglomerative_cluster(&points, cfg.metric, cfg.link_threshold)?;
    let est = CapacityEstimate {
        capacity: result.entropy(),
        support: result.clusters.len(),
        samples: band.len() as u64,
    };
    Ok((est, result))
}

use super::entropy::{entropy_from_counts, miller_madow};
use super::{CapacityError, CapacityEstimate, McOptions};
use crate::geometry::StateKey;
use crate::mdpcore::Transition;
use crate::par;
use crate::sampler::TrajectorySet;
use std::collections::BTreeMap;

/// `N(S = s)` and `N(S' = s' | S = s)` for one state bin.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StateCounts {
    /// Occurrences of the state as a record's state, terminal records included.
    pub visits: u64,
    /// Successor counts over non-terminal records.
    pub next: BTreeMap<StateKey, u64>,
}

/// Transition counts per state bin.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CountTable {
    pub states: BTreeMap<StateKey, StateCounts>,
}

impl CountTable {
    pub fn add(&mut self, from: StateKey, to: StateKey, terminal: bool) {
        let entry = self.states.entry(from).or_default();
        entry.visits += 1;
        if !terminal {
            *entry.next.entry(to).or_insert(0) += 1;
        }
    }

    pub fn merge(mut self, other: CountTable) -> CountTable {
        for (k, c) in other.states {
            let entry = self.states.entry(k).or_default();
            entry.visits += c.visits;
            for (n, v) in c.next {
                *entry.next.entry(n).or_insert(0) += v;
            }
        }
        self
    }

    pub fn get(&self, key: &StateKey) -> Option<&StateCounts> {
        self.states.get(key)
    }

    /// Empirical `p(s' | s)` over the successors kept by `exclude_self`.
    pub fn distribution(&self, key: StateKey, exclude_self: bool) -> Vec<(StateKey, f64)> {
        let Some(c) = self.states.get(&key) else { return Vec::new() };
        let kept: Vec<(StateKey, u64)> = c
            .next
            .iter()
            .filter(|(n, _)| !(exclude_self && **n == key))
            .map(|(n, v)| (*n, *v))
            .collect();
        let total: u64 = kept.iter().map(|e| e.1).sum();
        kept.into_iter()
            .map(|(n, v)| (n, v as f64 / total as f64))
            .collect()
    }

    /// Plug-in estimate regardless of sample size.
    pub fn estimate(&self, key: StateKey, opts: McOptions) -> CapacityEstimate {
        let Some(c) = self.states.get(&key) else {
            return CapacityEstimate { capacity: 0.0, support: 0, samples: 0 };
        };
        let kept: Vec<u64> = c
            .next
            .iter()
            .filter(|(n, _)| !(opts.exclude_self && **n == key))
            .map(|(_, v)| *v)
            .collect();
        let samples: u64 = kept.iter().sum();
        let support = kept.len();
        let mut capacity = entropy_from_counts(kept);
        if opts.miller_madow {
            capacity += miller_madow(support, samples);
        }
        CapacityEstimate { capacity, support, samples }
    }
}

const CHUNK: usize = 8192;

/// Counts every transition under `key`. Chunks are counted independently and
/// merged with integer sums, so the table does not depend on record order or
/// on the number of workers.
pub fn count_transitions<S, A, K>(
    trajs: &TrajectorySet<S, A>,
    key: K,
) -> Result<CountTable, CapacityError>
where
    S: Sync,
    A: Sync,
    K: Fn(&S) -> StateKey + Sync + Send,
{
    par::chunked_reduce(
        &trajs.transitions,
        CHUNK,
        |chunk: &[Transition<S, A>]| {
            let mut table = CountTable::default();
            for t in chunk {
                table.add(key(&t.state), key(&t.next_state), t.done);
            }
            table
        },
        CountTable::merge,
    )
    .ok_or(CapacityError::EmptyData)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::capacity_mc;
    use crate::sampler::TrajectoryMeta;
    use approx::assert_abs_diff_eq;

    fn set_from(pairs: &[(i64, i64)]) -> TrajectorySet<usize, usize> {
        TrajectorySet {
            transitions: pairs
                .iter()
                .enumerate()
                .map(|(i, &(s, n))| Transition {
                    state: s as usize,
                    action: 0,
                    next_state: n as usize,
                    reward: 0.0,
                    done: false,
                    episode: i,
                    t: 0,
                })
                .collect(),
            episodes: pairs.len(),
            meta: TrajectoryMeta { seed: 0, policy: "random".into(), env: "t".into() },
        }
    }

    fn key(s: &usize) -> StateKey {
        StateKey::new(*s as i64, 0)
    }

    #[test]
    fn single_transition() {
        let t = count_transitions(&set_from(&[(0, 1)]), key).unwrap();
        let c = t.get(&StateKey::new(0, 0)).unwrap();
        assert_eq!(c.visits, 1);
        assert_eq!(c.next[&StateKey::new(1, 0)], 1);
    }

    #[test]
    fn junction_ratio() {
        let mut pairs = Vec::new();
        for n in [1, 2, 3] {
            pairs.extend(std::iter::repeat_n((0, n), 5));
        }
        let t = count_transitions(&set_from(&pairs), key).unwrap();
        let d = t.distribution(StateKey::new(0, 0), false);
        assert_eq!(d.len(), 3);
        for (_, p) in d {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn terminal_records_count_as_visits_only() {
        let mut set = set_from(&[(0, 1), (0, 2)]);
        set.transitions[1].done = true;
        let t = count_transitions(&set, key).unwrap();
        let c = t.get(&StateKey::new(0, 0)).unwrap();
        assert_eq!(c.visits, 2);
        assert_eq!(c.next.values().sum::<u64>(), 1);
    }

    #[test]
    fn empty_data_errors() {
        assert!(matches!(count_transitions(&set_from(&[]), key), Err(CapacityError::EmptyData)));
    }

    #[test]
    fn mc_examples() {
        let opts = McOptions { min_samples: 4, ..McOptions::default() };
        let k = StateKey::new(0, 0);
        let det = count_transitions(&set_from(&[(0, 1); 20]), key).unwrap();
        assert_eq!(capacity_mc(&det, k, McOptions::default()).unwrap().capacity, 0.0);
        let mixed = count_transitions(&set_from(&[(0, 1), (0, 1), (0, 2), (0, 3)]), key).unwrap();
        assert_abs_diff_eq!(capacity_mc(&mixed, k, opts).unwrap().capacity, 1.5 * 2f64.ln(), epsilon = 1e-12);
        assert!(matches!(
            capacity_mc(&mixed, k, McOptions::default()),
            Err(CapacityError::InsufficientSamples { found: 4, needed: 20, .. })
        ));
    }

    #[test]
    fn self_transitions_can_be_excluded() {
        let pairs = [(0, 0), (0, 0), (0, 1), (0, 2)];
        let t = count_transitions(&set_from(&pairs), key).unwrap();
        let k = StateKey::new(0, 0);
        let with = t.estimate(k, McOptions { min_samples: 0, ..McOptions::default() });
        let without = t.estimate(k, McOptions { min_samples: 0, exclude_self: true, miller_madow: false });
        assert_abs_diff_eq!(with.capacity, 1.5 * 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(without.capacity, 2f64.ln(), epsilon = 1e-12);
        assert_eq!(without.samples, 2);
    }
}

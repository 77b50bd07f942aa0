use super::{SamplerError, TrajectoryMeta, TrajectorySet};
use crate::geometry::StateKey;
use crate::mdpcore::{Environment, Transition};
use crate::par;
use crate::seed::stream_rng;
use rand::Rng;
use std::collections::BTreeMap;

/// Visit count per state bin with the first state seen in that bin.
#[derive(Clone, Debug, PartialEq)]
pub struct VisitCounts<S> {
    counts: BTreeMap<StateKey, (u64, S)>,
}

impl<S: Copy> Default for VisitCounts<S> {
    fn default() -> Self {
        Self { counts: BTreeMap::new() }
    }
}

impl<S: Copy> VisitCounts<S> {
    /// Counts every logged state: each record's state plus each episode's
    /// final next state.
    pub fn from_trajectories<E, A>(env: &E, set: &TrajectorySet<S, A>) -> Self
    where
        E: Environment<State = S>,
        S: PartialEq,
        A: Copy,
    {
        let mut counts = Self::default();
        for seq in set.episode_states() {
            for s in seq {
                counts.add(env.key(&s), s);
            }
        }
        counts
    }

    pub fn add(&mut self, key: StateKey, s: S) {
        self.counts.entry(key).or_insert((0, s)).0 += 1;
    }

    pub fn get(&self, key: &StateKey) -> u64 {
        self.counts.get(key).map_or(0, |e| e.0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().map(|e| e.0).sum()
    }

    pub fn keys(&self) -> impl Iterator<Item = &StateKey> {
        self.counts.keys()
    }

    /// Restart candidates: the 10% least-visited bins (at least one), widened
    /// to include every bin tied with the cutoff count.
    pub fn frontier(&self) -> Vec<(StateKey, S)> {
        let mut ranked: Vec<(u64, StateKey, S)> =
            self.counts.iter().map(|(k, &(c, s))| (c, *k, s)).collect();
        ranked.sort_by_key(|&(c, k, _)| (c, k));
        let take = ranked.len().div_ceil(10).max(1);
        let Some(cutoff) = ranked.get(take - 1).map(|e| e.0) else {
            return Vec::new();
        };
        ranked
            .into_iter()
            .take_while(|e| e.0 <= cutoff)
            .map(|(_, k, s)| (k, s))
            .collect()
    }
}

fn run_episode<E: Environment>(
    env: &E,
    episode: usize,
    start: E::State,
    horizon: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Transition<E::State, E::Action>>, SamplerError> {
    let mut s = start;
    let mut out = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let a = env.random_action(rng);
        let next = env.step(s, a, rng)?;
        out.push(Transition { state: s, action: a, next_state: next, reward: 0.0, done: false, episode, t });
        s = next;
    }
    Ok(out)
}

fn collect<E: Environment>(
    env: &E,
    episodes: usize,
    seed: u64,
    policy: &str,
    run: impl Fn(usize) -> Result<Vec<Transition<E::State, E::Action>>, SamplerError> + Sync + Send,
) -> Result<TrajectorySet<E::State, E::Action>, SamplerError> {
    let per_episode = par::map_range(episodes, run);
    let mut transitions = Vec::new();
    for ep in per_episode {
        transitions.extend(ep?);
    }
    Ok(TrajectorySet {
        transitions,
        episodes,
        meta: TrajectoryMeta { seed, policy: policy.to_string(), env: env.tag() },
    })
}

/// Uniform random-policy rollouts. Each episode starts at a uniformly random
/// state and draws from its own stream `(seed, episode)`, so the result does
/// not depend on how episodes are scheduled.
pub fn rollout_random<E: Environment>(
    env: &E,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<TrajectorySet<E::State, E::Action>, SamplerError> {
    if episodes == 0 || horizon == 0 {
        return Err(SamplerError::BadArgs);
    }
    collect(env, episodes, seed, "random", |e| {
        let mut rng = stream_rng(seed, e as u64);
        let start = env.random_start(&mut rng);
        run_episode(env, e, start, horizon, &mut rng)
    })
}

/// Random rollouts restarted from the least-visited bins in `counts`.
pub fn frontier_resample<E: Environment>(
    env: &E,
    counts: &VisitCounts<E::State>,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<TrajectorySet<E::State, E::Action>, SamplerError> {
    if counts.is_empty() {
        return Err(SamplerError::EmptyCounts);
    }
    if episodes == 0 || horizon == 0 {
        return Err(SamplerError::BadArgs);
    }
    let frontier = counts.frontier();
    collect(env, episodes, seed, "frontier", |e| {
        let mut rng = stream_rng(seed, e as u64);
        let start = frontier[rng.random_range(0..frontier.len())].1;
        run_episode(env, e, start, horizon, &mut rng)
    })
}

/// Random rollouts followed by `frontier_rounds` rounds of frontier restarts,
/// each seeded with `seed + round`.
pub fn explore<E: Environment>(
    env: &E,
    episodes: usize,
    horizon: usize,
    seed: u64,
    frontier_rounds: usize,
    frontier_episodes: usize,
) -> Result<TrajectorySet<E::State, E::Action>, SamplerError> {
    let mut set = rollout_random(env, episodes, horizon, seed)?;
    for round in 0..frontier_rounds {
        let counts = VisitCounts::from_trajectories(env, &set);
        let round_seed = seed.wrapping_add(round as u64 + 1);
        set.append(frontier_resample(env, &counts, frontier_episodes, horizon, round_seed)?);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdpcore::{DiscreteState, GridEnv, MazeSpec, Move, Record};

    fn grid(text: &str) -> GridEnv {
        GridEnv::new(MazeSpec::parse(text).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn corridor_rollout_chains() {
        let env = grid("#####\n#...#\n#####");
        let set = rollout_random(&env, 1, 10, 0).unwrap();
        assert_eq!(set.len(), 10);
        assert_eq!(set.chaining_violation(), None);
        assert_eq!(set.meta.policy, "random");
    }

    #[test]
    fn uniform_action_marginal() {
        let env = grid(include_str!("../../fixtures/demo.maze"));
        let set = rollout_random(&env, 100, 1000, 3).unwrap();
        let mut freq = [0usize; 4];
        for t in &set.transitions {
            freq[t.action.index()] += 1;
        }
        for f in freq {
            assert!((f as f64 / 100_000.0 - 0.25).abs() < 0.01, "{freq:?}");
        }
    }

    #[test]
    fn demo_maze_full_coverage() {
        let env = grid(include_str!("../../fixtures/demo.maze"));
        let set = rollout_random(&env, 500, 600, 0).unwrap();
        let counts = VisitCounts::from_trajectories(&env, &set);
        assert_eq!(counts.len(), env.free_cells().len());
        assert_eq!(counts.total() as usize, set.len() + set.episodes);
    }

    #[test]
    fn frontier_prefers_rare_cells() {
        let env = grid("#########\n#.......#\n#########");
        let mut counts = VisitCounts::default();
        for col in 1..8 {
            let s = DiscreteState::new(1, col);
            for _ in 0..(100 / col) {
                counts.add(env.key(&s), s);
            }
        }
        let frontier = counts.frontier();
        assert_eq!(frontier.len(), 1);
        assert_eq!(frontier[0].1, DiscreteState::new(1, 7));
        let set = frontier_resample(&env, &counts, 20, 1, 5).unwrap();
        assert!(set.transitions.iter().all(|t| t.state == DiscreteState::new(1, 7)));
        assert_eq!(set.meta.policy, "frontier");
    }

    #[test]
    fn equal_counts_make_every_state_a_candidate() {
        let env = grid("#######\n#.....#\n#######");
        let mut counts = VisitCounts::default();
        for col in 1..6 {
            let s = DiscreteState::new(1, col);
            counts.add(env.key(&s), s);
        }
        assert_eq!(counts.frontier().len(), 5);
        let set = frontier_resample(&env, &counts, 2000, 1, 9).unwrap();
        let mut starts = [0usize; 5];
        for t in &set.transitions {
            starts[t.state.col - 1] += 1;
        }
        for s in starts {
            assert!((s as f64 / 2000.0 - 0.2).abs() < 0.04, "{starts:?}");
        }
    }

    #[test]
    fn frontier_closes_long_corridor_gap() {
        // Few short random episodes on a 60-cell corridor leave gaps; one
        // frontier round restarted from the least-visited cells fills them.
        let text = format!("{}\n#{}#\n{}", "#".repeat(62), ".".repeat(60), "#".repeat(62));
        let env = grid(&text);
        let cells = env.free_cells().len();
        let base = rollout_random(&env, 3, 40, 1).unwrap();
        let counts = VisitCounts::from_trajectories(&env, &base);
        assert!(counts.len() < cells, "fixture should leave gaps: {}/{cells}", counts.len());
        let mut set = base.clone();
        set.append(frontier_resample(&env, &counts, 40, 1500, 100).unwrap());
        assert_eq!(VisitCounts::from_trajectories(&env, &set).len(), cells);
        assert_eq!(set.meta.policy, "random+frontier");
        assert_eq!(set.chaining_violation(), None);
    }

    #[test]
    fn empty_counts_rejected() {
        let env = grid("#####\n#...#\n#####");
        assert!(matches!(
            frontier_resample(&env, &VisitCounts::default(), 1, 1, 0),
            Err(SamplerError::EmptyCounts)
        ));
    }

    #[test]
    fn record_helpers_cover_moves() {
        assert_eq!(Move::decode([1.0, 0.0]), Some(Move::Right));
    }
}

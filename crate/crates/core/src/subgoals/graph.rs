use super::{SubgoalError, SubgoalSet};
use crate::geometry::{Discretizer, StateKey, Vec2};
use crate::mdpcore::{DiscreteState, MazeSpec, Spatial};
use crate::par;
use crate::sampler::TrajectorySet;
use std::collections::{BTreeMap, VecDeque};

/// Observed subgoal transitions and the region label of every state bin.
#[derive(Clone, Debug, PartialEq)]
pub struct SubgoalGraph {
    pub n_subgoals: usize,
    /// `(from, to) -> count`, self-edges included.
    pub edges: BTreeMap<(usize, usize), u64>,
    /// State bin -> owning subgoal.
    pub regions: BTreeMap<StateKey, usize>,
    pub disc: Discretizer,
}

/// Next target of a plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PlanStep {
    Subgoal(usize),
    /// The goal lies in the current region.
    Goal,
}

impl SubgoalGraph {
    pub fn region_of(&self, p: Vec2) -> Option<usize> {
        self.regions.get(&self.disc.key(p)).copied()
    }

    /// Successors over non-self edges, in id order.
    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.range((i, 0)..(i + 1, 0)).map(|(&(_, j), _)| j).filter(move |&j| j != i)
    }

    /// Hop distances to `target` along directed non-self edges.
    pub fn hops_to(&self, target: usize) -> Vec<Option<usize>> {
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); self.n_subgoals];
        for &(i, j) in self.edges.keys() {
            if i != j {
                rev[j].push(i);
            }
        }
        let mut dist = vec![None; self.n_subgoals];
        let mut queue = VecDeque::from([target]);
        dist[target] = Some(0);
        while let Some(j) = queue.pop_front() {
            let d = dist[j].unwrap_or(0);
            for &i in &rev[j] {
                if dist[i].is_none() {
                    dist[i] = Some(d + 1);
                    queue.push_back(i);
                }
            }
        }
        dist
    }
}

struct EpisodeScan {
    edges: BTreeMap<(usize, usize), u64>,
    labels: BTreeMap<StateKey, BTreeMap<usize, u64>>,
}

fn scan_episode(positions: &[Vec2], set: &SubgoalSet, disc: Discretizer) -> EpisodeScan {
    let achieved: Vec<Option<usize>> = positions.iter().map(|&p| set.achieved_at(p)).collect();
    let mut edges = BTreeMap::new();
    let mut prev: Option<usize> = None;
    for (t, a) in achieved.iter().enumerate() {
        let Some(g) = *a else { continue };
        let entered = t == 0 || achieved[t - 1] != Some(g);
        if entered {
            if let Some(p) = prev {
                *edges.entry((p, g)).or_insert(0) += 1;
            }
            prev = Some(g);
        }
    }
    let mut labels: BTreeMap<StateKey, BTreeMap<usize, u64>> = BTreeMap::new();
    let mut next: Option<usize> = None;
    for (t, &p) in positions.iter().enumerate().rev() {
        if achieved[t].is_some() {
            next = achieved[t];
        }
        if let Some(g) = next {
            *labels.entry(disc.key(p)).or_default().entry(g).or_insert(0) += 1;
        }
    }
    EpisodeScan { edges, labels }
}

/// Scans every episode for achievement entries (distance below the subgoal
/// radius) and counts an edge from the previously entered subgoal to the
/// newly entered one. Each visited state bin is labeled with the subgoal
/// most often achieved next from it, at the same step or later; ties go to
/// the lowest id. Free bins with no such observation fall back to the anchor
/// nearest in maze hop distance.
pub fn build_subgoal_graph<S, A>(
    trajs: &TrajectorySet<S, A>,
    set: &SubgoalSet,
    maze: &MazeSpec,
    disc: Discretizer,
) -> Result<SubgoalGraph, SubgoalError>
where
    S: Spatial + Copy + PartialEq + Sync,
    A: Copy + Sync,
{
    if set.is_empty() {
        return Err(SubgoalError::EmptySubgoals);
    }
    let episodes: Vec<Vec<Vec2>> = trajs
        .episode_states()
        .into_iter()
        .map(|ep| ep.iter().map(Spatial::position).collect())
        .collect();
    let scans = par::map_slice(&episodes, |ep| scan_episode(ep, set, disc));
    let mut edges: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut labels: BTreeMap<StateKey, BTreeMap<usize, u64>> = BTreeMap::new();
    for scan in scans {
        for (e, c) in scan.edges {
            *edges.entry(e).or_insert(0) += c;
        }
        for (k, m) in scan.labels {
            let slot = labels.entry(k).or_default();
            for (g, c) in m {
                *slot.entry(g).or_insert(0) += c;
            }
        }
    }

    let mut regions: BTreeMap<StateKey, usize> = labels
        .into_iter()
        .map(|(k, m)| {
            let best = m.iter().fold((0u64, usize::MAX), |acc, (&g, &c)| if c > acc.0 { (c, g) } else { acc });
            (k, best.1)
        })
        .collect();

    let hop_maps: Vec<Vec<Option<usize>>> = set
        .subgoals
        .iter()
        .map(|g| maze.bfs_distances(&[cell_at(g.anchor)]))
        .collect();
    let nx = (maze.width() as f64 / disc.bin).ceil() as i64;
    let ny = (maze.height() as f64 / disc.bin).ceil() as i64;
    for y in 0..ny {
        for x in 0..nx {
            let k = StateKey::new(x, y);
            let c = disc.center(k);
            if regions.contains_key(&k) || !maze.is_free_point(c) {
                continue;
            }
            let idx = maze.index(cell_at(c));
            let best = hop_maps
                .iter()
                .enumerate()
                .filter_map(|(id, d)| d[idx].map(|d| (d, id)))
                .min();
            if let Some((_, id)) = best {
                regions.insert(k, id);
            }
        }
    }
    Ok(SubgoalGraph { n_subgoals: set.len(), edges, regions, disc })
}

fn cell_at(p: Vec2) -> DiscreteState {
    DiscreteState::new(p.y.floor().max(0.0) as usize, p.x.floor().max(0.0) as usize)
}

/// First hop of a unit-cost shortest path from `current` to `goal_region`
/// over non-self edges. Neighbors are expanded in id order, so among equal
/// shortest paths the one through the lowest first hop wins.
pub fn plan_next_subgoal(
    graph: &SubgoalGraph,
    current: usize,
    goal_region: usize,
) -> Result<PlanStep, SubgoalError> {
    for id in [current, goal_region] {
        if id >= graph.n_subgoals {
            return Err(SubgoalError::UnknownId(id));
        }
    }
    if current == goal_region {
        return Ok(PlanStep::Goal);
    }
    let hops = graph.hops_to(goal_region);
    if hops[current].is_none() {
        return Err(SubgoalError::Unreachable { from: current, goal: goal_region });
    }
    let d = hops[current].unwrap_or(0);
    graph
        .successors(current)
        .find(|&j| hops[j] == Some(d - 1))
        .map(PlanStep::Subgoal)
        .ok_or(SubgoalError::Unreachable { from: current, goal: goal_region })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::{capacity_map, Estimator, McOptions, PartitionConfig};
    use crate::mdpcore::{GridEnv, Transition};
    use crate::sampler::{explore, TrajectoryMeta};
    use crate::subgoals::{select_subgoals, Subgoal};
    use std::collections::BTreeSet;

    fn two_subgoals() -> SubgoalSet {
        let mk = |id, x| Subgoal { id, anchor: Vec2::new(x, 1.5), capacity: 1.1, radius: 0.7 };
        SubgoalSet { subgoals: vec![mk(0, 1.5), mk(1, 5.5)], threshold: 0.9, suppression_radius: 1.0 }
    }

    fn corridor() -> MazeSpec {
        MazeSpec::parse("#########\n#.......#\n#########").unwrap()
    }

    fn walk(xs: &[f64]) -> TrajectorySet<Vec2, Vec2> {
        let meta = TrajectoryMeta { seed: 0, policy: "random".into(), env: "test".into() };
        let mut set = TrajectorySet::empty(meta);
        for (t, w) in xs.windows(2).enumerate() {
            set.transitions.push(Transition {
                state: Vec2::new(w[0], 1.5),
                action: Vec2::ZERO,
                next_state: Vec2::new(w[1], 1.5),
                reward: 0.0,
                done: false,
                episode: 0,
                t,
            });
        }
        set.episodes = 1;
        set
    }

    fn graph_for(xs: &[f64]) -> SubgoalGraph {
        build_subgoal_graph(&walk(xs), &two_subgoals(), &corridor(), Discretizer::new(1.0)).unwrap()
    }

    #[test]
    fn one_transition_edge() {
        let g = graph_for(&[1.5, 2.5, 3.5, 4.5, 5.5]);
        assert_eq!(g.edges, BTreeMap::from([((0, 1), 1)]));
    }

    #[test]
    fn revisit_records_self_edge_but_plan_ignores_it() {
        let g = graph_for(&[1.5, 2.5, 3.5, 2.5, 1.5, 1.5, 2.5]);
        assert_eq!(g.edges, BTreeMap::from([((0, 0), 1)]));
        assert_eq!(g.successors(0).count(), 0);
        assert!(matches!(plan_next_subgoal(&g, 0, 1), Err(SubgoalError::Unreachable { .. })));
    }

    #[test]
    fn region_labels_follow_next_achievement() {
        let g = graph_for(&[3.5, 4.5, 5.5]);
        assert_eq!(g.regions[&StateKey::new(3, 1)], 1);
        assert_eq!(g.regions[&StateKey::new(4, 1)], 1);
        // Unvisited cells fall back to the hop-nearest anchor, ties to the lower id.
        assert_eq!(g.regions[&StateKey::new(1, 1)], 0);
        assert_eq!(g.regions[&StateKey::new(7, 1)], 1);
        assert_eq!(g.regions.len(), 7);
    }

    #[test]
    fn planner_chain_and_goal() {
        let g = SubgoalGraph {
            n_subgoals: 4,
            edges: BTreeMap::from([((0, 1), 3), ((1, 2), 2), ((2, 1), 1), ((1, 0), 1)]),
            regions: BTreeMap::new(),
            disc: Discretizer::new(1.0),
        };
        assert_eq!(plan_next_subgoal(&g, 0, 2).unwrap(), PlanStep::Subgoal(1));
        assert_eq!(plan_next_subgoal(&g, 1, 2).unwrap(), PlanStep::Subgoal(2));
        assert_eq!(plan_next_subgoal(&g, 2, 2).unwrap(), PlanStep::Goal);
        assert!(matches!(plan_next_subgoal(&g, 0, 3), Err(SubgoalError::Unreachable { .. })));
        assert!(plan_next_subgoal(&g, 0, 9).is_err());
    }

    /// Pairs of junctions joined by a path whose interior avoids every
    /// other junction.
    fn corridor_pairs(maze: &MazeSpec, junctions: &[DiscreteState]) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for (i, &j) in junctions.iter().enumerate() {
            let mut seen = vec![false; maze.width() * maze.height()];
            let mut queue = VecDeque::from([j]);
            seen[maze.index(j)] = true;
            while let Some(c) = queue.pop_front() {
                for n in maze.free_neighbors(c) {
                    if seen[maze.index(n)] {
                        continue;
                    }
                    seen[maze.index(n)] = true;
                    if let Some(k) = junctions.iter().position(|&x| x == n) {
                        out.insert((i, k));
                    } else {
                        queue.push_back(n);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn demo_maze_edges_match_corridor_connectivity() {
        let maze = MazeSpec::parse(include_str!("../../fixtures/demo.maze")).unwrap();
        let env = GridEnv::new(maze.clone(), 0.0).unwrap();
        let trajs = explore(&env, 300, 200, 21, 0, 0).unwrap();
        let mc = McOptions { exclude_self: true, ..McOptions::default() };
        let cmap = capacity_map(&trajs, Discretizer::new(1.0), Estimator::Mc, mc, &PartitionConfig::default())
            .unwrap();
        let set = select_subgoals(&cmap, 2.5f64.ln(), 1.0, 0.7).unwrap();
        let g = build_subgoal_graph(&trajs, &set, &maze, Discretizer::new(1.0)).unwrap();
        let cells: Vec<DiscreteState> = set.subgoals.iter().map(|s| cell_at(s.anchor)).collect();
        let expected = corridor_pairs(&maze, &cells);
        let observed: BTreeSet<(usize, usize)> = g.edges.keys().copied().filter(|(i, j)| i != j).collect();
        assert_eq!(observed, expected);
        assert_eq!(g.regions.len(), maze.free_cells().len());
    }
}

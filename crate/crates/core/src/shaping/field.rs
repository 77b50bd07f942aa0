use super::ShapingError;
use crate::geometry::Vec2;
use crate::mdpcore::{DiscreteState, MazeSpec};
use crate::subgoals::{plan_next_subgoal, PlanStep, SubgoalGraph, SubgoalSet};

/// Per-cell potential toward one final goal. Cells are indexed by
/// [`MazeSpec::index`]; walls and cells with no path to their target hold `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialField {
    pub width: usize,
    pub height: usize,
    pub goal: DiscreteState,
    pub phi: Vec<Option<f64>>,
    /// Region of each cell, if any.
    pub region: Vec<Option<usize>>,
    /// Base offset per region: hops from the goal region along the plan.
    pub offsets: Vec<Option<usize>>,
    /// Regions with no planned route to the goal region. They get offset
    /// `max + 1` and a local potential toward the goal itself.
    pub unreachable: Vec<usize>,
    /// Largest finite potential. Shaping measures potentials below it.
    pub ceiling: f64,
}

fn max_of(phi: &[Option<f64>]) -> f64 {
    phi.iter().flatten().copied().fold(0.0, f64::max)
}

pub(crate) fn cell_of(p: Vec2) -> Option<DiscreteState> {
    (p.x >= 0.0 && p.y >= 0.0).then(|| DiscreteState::new(p.y.floor() as usize, p.x.floor() as usize))
}

impl PotentialField {
    /// Field from explicit per-cell values (index order of [`MazeSpec::index`]),
    /// with no region structure.
    pub fn from_values(maze: &MazeSpec, goal: DiscreteState, phi: Vec<Option<f64>>) -> Result<Self, ShapingError> {
        let n = maze.width() * maze.height();
        if phi.len() != n {
            return Err(ShapingError::BadField(format!("{} values for {n} cells", phi.len())));
        }
        if !maze.is_free(goal) {
            return Err(ShapingError::UnknownState(format!("{goal:?}")));
        }
        Ok(Self {
            width: maze.width(),
            height: maze.height(),
            goal,
            region: vec![None; n],
            offsets: Vec::new(),
            unreachable: Vec::new(),
            ceiling: max_of(&phi),
            phi,
        })
    }

    fn index(&self, c: DiscreteState) -> Option<usize> {
        (c.row < self.height && c.col < self.width).then(|| c.row * self.width + c.col)
    }

    pub fn at_cell(&self, c: DiscreteState) -> Option<f64> {
        self.index(c).and_then(|i| self.phi[i])
    }

    /// Potential of the cell containing `p`.
    pub fn at(&self, p: Vec2) -> Option<f64> {
        cell_of(p).and_then(|c| self.at_cell(c))
    }

    pub fn region_at_cell(&self, c: DiscreteState) -> Option<usize> {
        self.index(c).and_then(|i| self.region[i])
    }

    /// `Φ - ceiling` of the cell containing `p`; never positive.
    pub fn depth(&self, p: Vec2) -> Option<f64> {
        self.at(p).map(|v| v - self.ceiling)
    }

    pub fn depth_at_cell(&self, c: DiscreteState) -> Option<f64> {
        self.at_cell(c).map(|v| v - self.ceiling)
    }

    /// `col,row phi region` per finite cell, under a one-line header.
    pub fn format(&self) -> String {
        let mut out = format!(
            "# potential-field v1 width={} height={} goal={},{}\n",
            self.width, self.height, self.goal.col, self.goal.row
        );
        for i in 0..self.phi.len() {
            if let Some(v) = self.phi[i] {
                let (r, c) = (i / self.width, i % self.width);
                let reg = self.region[i].map_or("-".to_string(), |g| g.to_string());
                out.push_str(&format!("{c},{r} {v} {reg}\n"));
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ShapingError> {
        let bad = |line: usize, why: &str| ShapingError::Malformed { line, reason: why.to_string() };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty input"))?;
        let mut width = None;
        let mut height = None;
        let mut goal = None;
        if !header.starts_with("# potential-field v1") {
            return Err(bad(1, "missing header"));
        }
        for tok in header.split_whitespace().skip(3) {
            match tok.split_once('=') {
                Some(("width", v)) => width = v.parse::<usize>().ok(),
                Some(("height", v)) => height = v.parse::<usize>().ok(),
                Some(("goal", v)) => goal = parse_cell(v),
                _ => return Err(bad(1, "unknown header field")),
            }
        }
        let (Some(width), Some(height), Some(goal)) = (width, height, goal) else {
            return Err(bad(1, "incomplete header"));
        };
        let n = width * height;
        let mut phi = vec![None; n];
        let mut region = vec![None; n];
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(bad(i + 1, "expected `col,row phi region`"));
            }
            let c = parse_cell(parts[0]).ok_or_else(|| bad(i + 1, "bad cell"))?;
            if c.row >= height || c.col >= width {
                return Err(bad(i + 1, "cell outside the maze"));
            }
            let v: f64 = parts[1].parse().map_err(|_| bad(i + 1, "bad potential"))?;
            let r = match parts[2] {
                "-" => None,
                s => Some(s.parse::<usize>().map_err(|_| bad(i + 1, "bad region"))?),
            };
            phi[c.row * width + c.col] = Some(v);
            region[c.row * width + c.col] = r;
        }
        Ok(Self { width, height, goal, ceiling: max_of(&phi), phi, region, offsets: Vec::new(), unreachable: Vec::new() })
    }
}

fn parse_cell(s: &str) -> Option<DiscreteState> {
    let (c, r) = s.split_once(',')?;
    Some(DiscreteState::new(r.parse().ok()?, c.parse().ok()?))
}

/// Hop distances from `target` moving only through `allowed` cells.
fn bfs_within(maze: &MazeSpec, target: DiscreteState, allowed: &[bool]) -> Vec<Option<usize>> {
    let mut dist = vec![None; allowed.len()];
    let mut queue = std::collections::VecDeque::from([target]);
    dist[maze.index(target)] = Some(0);
    while let Some(c) = queue.pop_front() {
        let d = dist[maze.index(c)].unwrap_or(0);
        for n in maze.free_neighbors(c) {
            let i = maze.index(n);
            if allowed[i] && dist[i].is_none() {
                dist[i] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

fn normalized(dist: &[Option<usize>], cells: &[usize]) -> Vec<Option<f64>> {
    let max = cells.iter().filter_map(|&i| dist[i]).max().unwrap_or(0);
    cells
        .iter()
        .map(|&i| dist[i].map(|d| if max == 0 { 0.0 } else { d as f64 / max as f64 }))
        .collect()
}

/// Concatenated potential toward `goal`.
///
/// Every free cell belongs to the region the graph assigns to its center.
/// A region `k` hops from the goal region along the plan gets offset `k`;
/// its local term is the hop distance to its exit target (the anchor cell of
/// the planned next subgoal, or the goal inside the goal region), divided by
/// the largest such distance within the region. Paths are confined to the
/// region and the next region on the plan, so following them never enters a
/// region farther from the goal; cells cut off from the target that way use
/// the unconfined maze distance.
pub fn build_potentials(
    maze: &MazeSpec,
    set: &SubgoalSet,
    graph: &SubgoalGraph,
    goal: DiscreteState,
) -> Result<PotentialField, ShapingError> {
    if !maze.is_free(goal) {
        return Err(ShapingError::UnknownState(format!("{goal:?}")));
    }
    let goal_region = graph.region_of(goal.center()).ok_or(ShapingError::UnreachableGoal(goal))?;
    let n = maze.width() * maze.height();
    let mut region = vec![None; n];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); graph.n_subgoals];
    for c in maze.free_cells() {
        if let Some(r) = graph.region_of(c.center()) {
            region[maze.index(c)] = Some(r);
            members[r].push(maze.index(c));
        }
    }
    let hops = graph.hops_to(goal_region);
    let max_hops = hops.iter().flatten().copied().max().unwrap_or(0);
    let goal_dist = maze.bfs_distances(&[goal]);
    let mut phi = vec![None; n];
    let mut unreachable = Vec::new();
    for (k, cells) in members.iter().enumerate() {
        if cells.is_empty() {
            continue;
        }
        let (offset, dist) = match hops[k] {
            Some(h) => {
                let (target, next) = match plan_next_subgoal(graph, k, goal_region)? {
                    PlanStep::Goal => (goal, k),
                    PlanStep::Subgoal(j) => {
                        let a = set.get(j).ok_or(ShapingError::Subgoals(crate::subgoals::SubgoalError::UnknownId(j)))?;
                        let c = cell_of(a.anchor).ok_or_else(|| ShapingError::UnknownState(format!("{:?}", a.anchor)))?;
                        (c, j)
                    }
                };
                let allowed: Vec<bool> = region.iter().map(|r| *r == Some(k) || *r == Some(next)).collect();
                let inside = bfs_within(maze, target, &allowed);
                let anywhere = maze.bfs_distances(&[target]);
                (h, inside.iter().zip(anywhere).map(|(a, b)| a.or(b)).collect())
            }
            None => {
                unreachable.push(k);
                (max_hops + 1, goal_dist.clone())
            }
        };
        for (&i, local) in cells.iter().zip(normalized(&dist, cells)) {
            phi[i] = local.map(|v| offset as f64 + v);
        }
    }
    let offsets = (0..graph.n_subgoals)
        .map(|k| match hops[k] {
            Some(h) => Some(h),
            None if !members[k].is_empty() => Some(max_hops + 1),
            None => None,
        })
        .collect();
    Ok(PotentialField {
        width: maze.width(),
        height: maze.height(),
        goal,
        ceiling: max_of(&phi),
        phi,
        region,
        offsets,
        unreachable,
    })
}

/// Single global potential: straight-line distance to the goal, scaled to [0, 1].
pub fn naive_potential(maze: &MazeSpec, goal: DiscreteState) -> Result<PotentialField, ShapingError> {
    if !maze.is_free(goal) {
        return Err(ShapingError::UnknownState(format!("{goal:?}")));
    }
    let g = goal.center();
    let mut phi = vec![None; maze.width() * maze.height()];
    let cells = maze.free_cells();
    let max = cells.iter().map(|c| c.center().dist(g)).fold(0.0, f64::max);
    for c in cells {
        phi[maze.index(c)] = Some(if max > 0.0 { c.center().dist(g) / max } else { 0.0 });
    }
    PotentialField::from_values(maze, goal, phi)
}

/// Result of following the steepest potential descent.
#[derive(Clone, Debug, PartialEq)]
pub struct Descent {
    pub path: Vec<DiscreteState>,
    pub reached: bool,
}

/// From `start`, repeatedly move to the free 4-neighbor with the lowest
/// potential while it is strictly lower than the current one. Neighbor ties
/// resolve in up, down, left, right order.
pub fn greedy_descent(maze: &MazeSpec, field: &PotentialField, start: DiscreteState, max_steps: usize) -> Descent {
    let mut path = vec![start];
    let mut cur = start;
    for _ in 0..max_steps {
        if cur == field.goal {
            break;
        }
        let Some(here) = field.at_cell(cur) else { break };
        let best = maze
            .free_neighbors(cur)
            .into_iter()
            .filter_map(|n| field.at_cell(n).map(|v| (v, n)))
            .fold(None::<(f64, DiscreteState)>, |acc, (v, n)| match acc {
                Some((bv, _)) if bv <= v => acc,
                _ => Some((v, n)),
            });
        match best {
            Some((v, n)) if v < here => {
                cur = n;
                path.push(n);
            }
            _ => break,
        }
    }
    Descent { reached: cur == field.goal, path }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Discretizer, StateKey};
    use crate::subgoals::Subgoal;
    use std::collections::BTreeMap;

    fn graph_from(
        maze: &MazeSpec,
        n: usize,
        edges: &[(usize, usize)],
        label: impl Fn(DiscreteState) -> usize,
    ) -> SubgoalGraph {
        let regions: BTreeMap<StateKey, usize> = maze
            .free_cells()
            .into_iter()
            .map(|c| (StateKey::new(c.col as i64, c.row as i64), label(c)))
            .collect();
        SubgoalGraph {
            n_subgoals: n,
            edges: edges.iter().map(|&e| (e, 1)).collect(),
            regions,
            disc: Discretizer::new(1.0),
        }
    }

    fn set_at(cells: &[DiscreteState]) -> SubgoalSet {
        SubgoalSet {
            subgoals: cells
                .iter()
                .enumerate()
                .map(|(id, c)| Subgoal { id, anchor: c.center(), capacity: 1.0, radius: 0.7 })
                .collect(),
            threshold: 0.9,
            suppression_radius: 1.0,
        }
    }

    #[test]
    fn single_region_is_normalized_goal_distance() {
        let maze = MazeSpec::parse("#######\n#.....#\n#######").unwrap();
        let goal = DiscreteState::new(1, 5);
        let set = set_at(&[goal]);
        let graph = graph_from(&maze, 1, &[], |_| 0);
        let f = build_potentials(&maze, &set, &graph, goal).unwrap();
        let got: Vec<f64> = (1..=5).map(|c| f.at_cell(DiscreteState::new(1, c)).unwrap()).collect();
        assert_eq!(got, vec![1.0, 0.75, 0.5, 0.25, 0.0]);
        assert_eq!(f.offsets, vec![Some(0)]);
    }

    #[test]
    fn two_region_chain_orders_regions() {
        let maze = MazeSpec::parse("##########\n#........#\n##########").unwrap();
        let goal = DiscreteState::new(1, 8);
        let set = set_at(&[DiscreteState::new(1, 2), DiscreteState::new(1, 6)]);
        let graph = graph_from(&maze, 2, &[(0, 1), (1, 0)], |c| usize::from(c.col >= 5));
        let f = build_potentials(&maze, &set, &graph, goal).unwrap();
        let far: Vec<f64> = (1..5).map(|c| f.at_cell(DiscreteState::new(1, c)).unwrap()).collect();
        let near: Vec<f64> = (5..9).map(|c| f.at_cell(DiscreteState::new(1, c)).unwrap()).collect();
        let min_far = far.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(near.iter().all(|&v| v < min_far));
        // Strictly decreasing toward the goal along the corridor.
        let all: Vec<f64> = far.into_iter().chain(near).collect();
        assert!(all.windows(2).all(|w| w[1] < w[0]));
        assert!(f.unreachable.is_empty());
    }

    #[test]
    fn regions_without_route_are_flagged() {
        let maze = MazeSpec::parse("##########\n#........#\n##########").unwrap();
        let goal = DiscreteState::new(1, 8);
        let set = set_at(&[DiscreteState::new(1, 2), DiscreteState::new(1, 6)]);
        let graph = graph_from(&maze, 2, &[], |c| usize::from(c.col >= 5));
        let f = build_potentials(&maze, &set, &graph, goal).unwrap();
        assert_eq!(f.unreachable, vec![0]);
        assert_eq!(f.offsets, vec![Some(1), Some(0)]);
        assert!(f.phi.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn wall_goal_rejected() {
        let maze = MazeSpec::parse("#####\n#...#\n#####").unwrap();
        let set = set_at(&[DiscreteState::new(1, 1)]);
        let graph = graph_from(&maze, 1, &[], |_| 0);
        assert!(build_potentials(&maze, &set, &graph, DiscreteState::new(0, 0)).is_err());
    }

    #[test]
    fn naive_descent_stalls_behind_a_wall() {
        let maze = MazeSpec::parse("#######\n#.....#\n#.###.#\n#.#.#.#\n#######").unwrap();
        let goal = DiscreteState::new(3, 3);
        let f = naive_potential(&maze, goal).unwrap();
        // The goal pocket is unreachable, so descent can never arrive.
        let d = greedy_descent(&maze, &f, DiscreteState::new(1, 3), 100);
        assert!(!d.reached);
    }

    #[test]
    fn format_round_trip() {
        let maze = MazeSpec::parse("#######\n#.....#\n#######").unwrap();
        let goal = DiscreteState::new(1, 5);
        let set = set_at(&[goal]);
        let graph = graph_from(&maze, 1, &[], |_| 0);
        let f = build_potentials(&maze, &set, &graph, goal).unwrap();
        let g = PotentialField::parse(&f.format()).unwrap();
        assert_eq!(g.phi, f.phi);
        assert_eq!(g.region, f.region);
        assert_eq!(g.goal, goal);
        assert!(PotentialField::parse("nonsense").is_err());
    }
}

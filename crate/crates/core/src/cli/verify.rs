//! Self-checks run by the `verify` command.

use crate::capacity::{capacity_map, check_propositions, Estimator, McCheck, McOptions, PartitionConfig};
use crate::geometry::Discretizer;
use crate::mdpcore::{build_tabular, random_tabular, DiscreteState, GridEnv, MazeSpec, Move};
use crate::predictor::gradcheck::{run_gradient_checks, GradientReport};
use crate::sampler::explore;
use crate::seed::stream_rng;
use crate::shaping::{build_potentials, verify_invariance, verify_with_bonus, PotentialField, ShapingError};
use crate::subgoals::{build_subgoal_graph, select_subgoals};
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct PropositionSweep {
    pub mdps: usize,
    pub failed: usize,
    pub min_upper_slack: f64,
    pub min_lower_slack: f64,
    pub max_tv: f64,
}

/// Bound checks on `n` random tabular MDPs with sampled successor checks.
pub fn proposition_sweep(n: usize, seed: u64) -> PropositionSweep {
    let mut out = PropositionSweep {
        mdps: n,
        failed: 0,
        min_upper_slack: f64::INFINITY,
        min_lower_slack: f64::INFINITY,
        max_tv: 0.0,
    };
    for i in 0..n {
        let mut rng = stream_rng(seed, i as u64);
        let states = rng.random_range(2..=12);
        let actions = rng.random_range(2..=5);
        let branching = rng.random_range(1..=states);
        let mdp = random_tabular(states, actions, branching, seed.wrapping_add(i as u64)).expect("valid dims");
        let mc = McCheck { samples_per_state: 20_000, seed: seed ^ i as u64, tolerance: 0.05 };
        let r = check_propositions(&mdp, 1e-9, Some(mc));
        if !r.holds() {
            out.failed += 1;
        }
        out.min_upper_slack = out.min_upper_slack.min(r.min_upper_slack);
        out.min_lower_slack = out.min_lower_slack.min(r.min_lower_slack);
        out.max_tv = out.max_tv.max(r.mc_max_tv.unwrap_or(0.0));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Random,
    Pipeline,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FuzzCase {
    pub kind: FieldKind,
    pub states: usize,
    pub mismatches: usize,
    pub max_shift_error: f64,
}

/// Perfect maze of 2 to 3 rooms per side with a few extra openings.
pub fn fuzz_maze(seed: u64, i: usize) -> MazeSpec {
    let mut rng = stream_rng(seed, i as u64);
    let h = rng.random_range(2..=3);
    let w = rng.random_range(2..=3);
    let openings = rng.random_range(0..=2);
    MazeSpec::random(h, w, openings, &mut rng)
}

fn random_field(maze: &MazeSpec, goal: DiscreteState, seed: u64) -> Result<PotentialField, ShapingError> {
    let mut rng = stream_rng(seed, 1);
    let phi = (0..maze.width() * maze.height())
        .map(|i| maze.is_free(maze.from_index(i)).then(|| rng.random_range(-3.0..3.0)))
        .collect();
    PotentialField::from_values(maze, goal, phi)
}

/// Field from sampling, capacity and subgoal selection on `maze`. Mazes
/// whose capacity stays below ln 2.5 use 95% of their largest capacity.
pub fn pipeline_field(maze: &MazeSpec, goal: DiscreteState, seed: u64) -> Result<PotentialField, ShapingError> {
    let env = GridEnv::new(maze.clone(), 0.0).map_err(|e| ShapingError::BadField(e.to_string()))?;
    let trajs = explore(&env, 200, 100, seed, 0, 0).map_err(|e| ShapingError::BadField(e.to_string()))?;
    let disc = Discretizer::new(1.0);
    let mc = McOptions { exclude_self: true, ..McOptions::default() };
    let cmap = capacity_map(&trajs, disc, Estimator::Mc, mc, &PartitionConfig::default())
        .map_err(|e| ShapingError::BadField(e.to_string()))?;
    let threshold = 2.5f64.ln().min(0.95 * cmap.max_capacity()).max(1e-6);
    let set = select_subgoals(&cmap, threshold, 1.0, 0.7)?;
    let graph = build_subgoal_graph(&trajs, &set, maze, disc)?;
    build_potentials(maze, &set, &graph, goal)
}

/// Invariance on `n` random mazes with a random goal cell, alternating
/// random and pipeline potentials.
pub fn invariance_fuzz(n: usize, seed: u64, gamma: f64) -> Result<Vec<FuzzCase>, ShapingError> {
    (0..n)
        .map(|i| {
            let maze = fuzz_maze(seed, i);
            let cells = maze.free_cells();
            let goal = cells[stream_rng(seed ^ 0x9e37, i as u64).random_range(0..cells.len())];
            let kind = if i % 2 == 0 { FieldKind::Random } else { FieldKind::Pipeline };
            let field = match kind {
                FieldKind::Random => random_field(&maze, goal, seed.wrapping_add(i as u64))?,
                FieldKind::Pipeline => pipeline_field(&maze, goal, seed.wrapping_add(i as u64))?,
            };
            let mdp = build_tabular(&maze, 0.0).map_err(|e| ShapingError::BadField(e.to_string()))?;
            let r = verify_invariance(&mdp, &field, gamma, 1e-9)?;
            Ok(FuzzCase { kind, states: r.states, mismatches: r.mismatches.len(), max_shift_error: r.max_shift_error })
        })
        .collect()
}

/// A flat `+0.1` bonus on rightward moves, which is not potential-based.
/// Returns the number of states whose greedy set changes.
pub fn negative_control(gamma: f64) -> Result<usize, ShapingError> {
    let maze = MazeSpec::parse("#######\n#.....#\n#.....#\n#.....#\n#######").expect("fixed maze");
    let goal = DiscreteState::new(2, 1);
    let phi = (0..maze.width() * maze.height()).map(|i| maze.is_free(maze.from_index(i)).then_some(0.0)).collect();
    let field = PotentialField::from_values(&maze, goal, phi)?;
    let mdp = build_tabular(&maze, 0.0).map_err(|e| ShapingError::BadField(e.to_string()))?;
    let right = Move::Right.index();
    let r = verify_with_bonus(&mdp, &field, gamma, 1e-9, |_, a, _| if a == right { 0.1 } else { 0.0 })?;
    Ok(r.mismatches.len())
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub propositions: PropositionSweep,
    pub fuzz: Vec<FuzzCase>,
    pub control_mismatches: usize,
    pub gradients: GradientReport,
}

pub const GRAD_TOL: f64 = 1e-4;

impl VerifyReport {
    pub fn passes(&self) -> bool {
        self.propositions.failed == 0
            && self.fuzz.iter().all(|c| c.mismatches == 0)
            && self.control_mismatches > 0
            && self.gradients.passes(GRAD_TOL)
    }

    pub fn format(&self) -> String {
        let p = &self.propositions;
        let fuzz_bad = self.fuzz.iter().filter(|c| c.mismatches > 0).count();
        let shift = self.fuzz.iter().map(|c| c.max_shift_error).fold(0.0, f64::max);
        format!(
            "propositions {} mdps, {} failed, min upper slack {:.3e}, min lower slack {:.3e}, max tv {:.4}\n\
             invariance {} mazes, {} with mismatches, max shift error {:.3e}\n\
             negative control {} mismatched states\n\
             gradients worst relative error {:.3e}\n\
             result {}\n",
            p.mdps,
            p.failed,
            p.min_upper_slack,
            p.min_lower_slack,
            p.max_tv,
            self.fuzz.len(),
            fuzz_bad,
            shift,
            self.control_mismatches,
            self.gradients.worst(),
            if self.passes() { "pass" } else { "fail" }
        )
    }
}

pub fn run_verify(seed: u64, gamma: f64) -> Result<VerifyReport, ShapingError> {
    Ok(VerifyReport {
        propositions: proposition_sweep(100, seed),
        fuzz: invariance_fuzz(50, seed, gamma)?,
        control_mismatches: negative_control(gamma)?,
        gradients: run_gradient_checks(seed),
    })
}

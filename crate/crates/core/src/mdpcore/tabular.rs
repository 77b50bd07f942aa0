use super::grid::{DiscreteState, Move};
use super::maze::MazeSpec;
use super::{Environment, Record, StepError};
use crate::geometry::StateKey;
use crate::seed::stream_rng;
use rand::seq::index::sample;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TabularError {
    #[error("bad dimensions: {0}")]
    BadDims(String),
    #[error("row (s={s}, a={a}) sums to {sum}")]
    NotStochastic { s: usize, a: usize, sum: f64 },
    #[error("negative probability at (s={s}, a={a}, s'={next})")]
    NegativeEntry { s: usize, a: usize, next: usize },
    #[error("index out of range: state {s}, action {a}")]
    IndexOutOfRange { s: usize, a: usize },
}

/// Exact transition tensor `p[s][a][s']`, stored flat.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMDP {
    n_states: usize,
    n_actions: usize,
    p: Vec<f64>,
    state_cells: Option<Vec<DiscreteState>>,
}

impl TabularMDP {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        p: Vec<f64>,
        state_cells: Option<Vec<DiscreteState>>,
    ) -> Result<Self, TabularError> {
        if n_states == 0 || n_actions == 0 || p.len() != n_states * n_actions * n_states {
            return Err(TabularError::BadDims(format!(
                "{n_states} states, {n_actions} actions, {} entries",
                p.len()
            )));
        }
        if state_cells.as_ref().is_some_and(|c| c.len() != n_states) {
            return Err(TabularError::BadDims("state_cells length".into()));
        }
        let mdp = Self { n_states, n_actions, p, state_cells };
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = mdp.row(s, a);
                if let Some(next) = row.iter().position(|&x| x < 0.0) {
                    return Err(TabularError::NegativeEntry { s, a, next });
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(TabularError::NotStochastic { s, a, sum });
                }
            }
        }
        Ok(mdp)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn state_cells(&self) -> Option<&[DiscreteState]> {
        self.state_cells.as_deref()
    }

    /// State index of a maze cell, when the MDP was built from a maze.
    pub fn state_of_cell(&self, cell: DiscreteState) -> Option<usize> {
        self.state_cells.as_ref()?.iter().position(|&c| c == cell)
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.p[start..start + self.n_states]
    }

    pub fn check_index(&self, s: usize, a: usize) -> Result<(), TabularError> {
        if s < self.n_states && a < self.n_actions {
            Ok(())
        } else {
            Err(TabularError::IndexOutOfRange { s, a })
        }
    }

    /// Next-state distribution under the uniform random policy.
    pub fn marginal(&self, s: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.n_states];
        let w = 1.0 / self.n_actions as f64;
        for a in 0..self.n_actions {
            for (acc, &p) in m.iter_mut().zip(self.row(s, a)) {
                *acc += w * p;
            }
        }
        m
    }

    /// Samples `s'` from `p[s][a][.]`.
    pub fn sample_next<R: Rng>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let row = self.row(s, a);
        for (next, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return next;
            }
        }
        // Rounding left `u` past the cumulative sum; take the last support point.
        row.iter().rposition(|&p| p > 0.0).unwrap_or(s)
    }
}

/// Enumerates free cells (row-major) as states and fills the tensor with the
/// slip-noise gridworld dynamics. Actions are indexed as [`Move::ALL`].
pub fn build_tabular(maze: &MazeSpec, noise: f64) -> Result<TabularMDP, StepError> {
    if !(0.0..=0.5).contains(&noise) {
        return Err(StepError::InvalidNoise(noise));
    }
    let cells = maze.free_cells();
    let n = cells.len();
    let mut index = vec![usize::MAX; maze.width() * maze.height()];
    for (i, c) in cells.iter().enumerate() {
        index[maze.index(*c)] = i;
    }
    let mut p = vec![0.0; n * 4 * n];
    for (s, &cell) in cells.iter().enumerate() {
        for a in Move::ALL {
            let base = (s * 4 + a.index()) * n;
            for actual in Move::ALL {
                let w = if actual == a { 1.0 - noise } else { noise / 3.0 };
                if w > 0.0 {
                    p[base + index[maze.index(actual.apply(maze, cell))]] += w;
                }
            }
        }
    }
    TabularMDP::new(n, 4, p, Some(cells)).map_err(|e| StepError::InvalidState(e.to_string()))
}

/// Seeded random MDP: each row gets between 1 and `branching` nonzero entries
/// on distinct next states with normalized uniform weights.
pub fn random_tabular(
    n_states: usize,
    n_actions: usize,
    branching: usize,
    seed: u64,
) -> Result<TabularMDP, TabularError> {
    if n_states < 2 || n_actions < 2 || branching < 1 {
        return Err(TabularError::BadDims(format!(
            "need n_states >= 2, n_actions >= 2, branching >= 1; got {n_states}, {n_actions}, {branching}"
        )));
    }
    let mut rng = stream_rng(seed, 0);
    let mut p = vec![0.0; n_states * n_actions * n_states];
    for s in 0..n_states {
        for a in 0..n_actions {
            let k = rng.random_range(1..=branching.min(n_states));
            let support = sample(&mut rng, n_states, k);
            // Weights in (0, 1] so every chosen entry stays nonzero.
            let weights: Vec<f64> = (0..k).map(|_| 1.0 - rng.random::<f64>()).collect();
            let total: f64 = weights.iter().sum();
            let base = (s * n_actions + a) * n_states;
            for (next, w) in support.iter().zip(weights) {
                p[base + next] = w / total;
            }
        }
    }
    TabularMDP::new(n_states, n_actions, p, None)
}

impl Record for usize {
    fn encode(&self) -> [f64; 2] {
        [*self as f64, 0.0]
    }

    fn decode(v: [f64; 2]) -> Option<Self> {
        (v[0] >= 0.0 && v[0].fract() == 0.0 && v[1] == 0.0).then_some(v[0] as usize)
    }
}

/// Sampling view of a tabular MDP: states and actions are plain indices.
#[derive(Clone, Debug)]
pub struct TabularEnv {
    pub mdp: TabularMDP,
}

impl Environment for TabularEnv {
    type State = usize;
    type Action = usize;

    fn random_start<R: Rng>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.mdp.n_states)
    }

    fn random_action<R: Rng>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.mdp.n_actions)
    }

    fn step<R: Rng>(&self, s: usize, a: usize, rng: &mut R) -> Result<usize, StepError> {
        self.mdp
            .check_index(s, a)
            .map_err(|e| StepError::InvalidState(e.to_string()))?;
        Ok(self.mdp.sample_next(s, a, rng))
    }

    fn key(&self, s: &usize) -> StateKey {
        StateKey::new(*s as i64, 0)
    }

    fn tag(&self) -> String {
        format!("tabular:{}x{}", self.mdp.n_states, self.mdp.n_actions)
    }
}

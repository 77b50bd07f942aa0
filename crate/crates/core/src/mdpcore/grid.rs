use super::maze::MazeSpec;
use super::{Environment, MazeEnv, Record, Spatial, StepError, Transition};
use crate::geometry::{StateKey, Vec2};
use rand::Rng;

/// A free cell, addressed by `(row, col)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DiscreteState {
    pub row: usize,
    pub col: usize,
}

impl DiscreteState {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.col as f64 + 0.5, self.row as f64 + 0.5)
    }
}

impl Spatial for DiscreteState {
    fn position(&self) -> Vec2 {
        self.center()
    }
}

/// Logged as `(col, row)`.
impl Record for DiscreteState {
    fn encode(&self) -> [f64; 2] {
        [self.col as f64, self.row as f64]
    }

    fn decode(v: [f64; 2]) -> Option<Self> {
        let ok = |x: f64| x >= 0.0 && x.fract() == 0.0 && x < u32::MAX as f64;
        (ok(v[0]) && ok(v[1])).then(|| DiscreteState::new(v[1] as usize, v[0] as usize))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::Up, Move::Down, Move::Left, Move::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Move> {
        Self::ALL.get(i).copied()
    }

    /// `(d_row, d_col)`.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Move::Up => (-1, 0),
            Move::Down => (1, 0),
            Move::Left => (0, -1),
            Move::Right => (0, 1),
        }
    }

    /// Cell reached by moving once, or `s` itself when blocked.
    pub fn apply(self, maze: &MazeSpec, s: DiscreteState) -> DiscreteState {
        let (dr, dc) = self.delta();
        let (r, c) = (s.row as i64 + dr, s.col as i64 + dc);
        if maze.is_free_at(r, c) {
            DiscreteState::new(r as usize, c as usize)
        } else {
            s
        }
    }
}

/// Logged as the unit displacement `(d_col, d_row)`.
impl Record for Move {
    fn encode(&self) -> [f64; 2] {
        let (dr, dc) = self.delta();
        [dc as f64, dr as f64]
    }

    fn decode(v: [f64; 2]) -> Option<Self> {
        Move::ALL.into_iter().find(|m| m.encode() == v)
    }
}

/// Moves one cell in direction `a` with probability `1 - noise`, otherwise in a
/// uniformly chosen other direction. Blocked moves stay put. Reward is 1 iff
/// the next state is `goal`.
pub fn step_discrete<R: Rng>(
    maze: &MazeSpec,
    s: DiscreteState,
    a: Move,
    noise: f64,
    goal: Option<DiscreteState>,
    rng: &mut R,
) -> Result<Transition<DiscreteState, Move>, StepError> {
    if !maze.is_free(s) {
        return Err(StepError::InvalidState(format!("{s:?}")));
    }
    if !(0.0..=0.5).contains(&noise) {
        return Err(StepError::InvalidNoise(noise));
    }
    let actual = if noise > 0.0 && rng.random::<f64>() < noise {
        let others: Vec<Move> = Move::ALL.into_iter().filter(|&m| m != a).collect();
        others[rng.random_range(0..others.len())]
    } else {
        a
    };
    let next = actual.apply(maze, s);
    let reached = goal == Some(next);
    Ok(Transition {
        state: s,
        action: a,
        next_state: next,
        reward: if reached { 1.0 } else { 0.0 },
        done: reached,
        episode: 0,
        t: 0,
    })
}

/// Gridworld over a maze's free cells.
#[derive(Clone, Debug)]
pub struct GridEnv {
    maze: MazeSpec,
    noise: f64,
    free: Vec<DiscreteState>,
}

impl GridEnv {
    pub fn new(maze: MazeSpec, noise: f64) -> Result<Self, StepError> {
        if !(0.0..=0.5).contains(&noise) {
            return Err(StepError::InvalidNoise(noise));
        }
        let free = maze.free_cells();
        Ok(Self { maze, noise, free })
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn free_cells(&self) -> &[DiscreteState] {
        &self.free
    }
}

impl Environment for GridEnv {
    type State = DiscreteState;
    type Action = Move;

    fn random_start<R: Rng>(&self, rng: &mut R) -> DiscreteState {
        self.free[rng.random_range(0..self.free.len())]
    }

    fn random_action<R: Rng>(&self, rng: &mut R) -> Move {
        Move::ALL[rng.random_range(0..4)]
    }

    fn step<R: Rng>(&self, s: DiscreteState, a: Move, rng: &mut R) -> Result<DiscreteState, StepError> {
        step_discrete(&self.maze, s, a, self.noise, None, rng).map(|t| t.next_state)
    }

    fn key(&self, s: &DiscreteState) -> StateKey {
        StateKey::new(s.col as i64, s.row as i64)
    }

    fn tag(&self) -> String {
        format!("grid:{}x{}:noise={}", self.maze.width(), self.maze.height(), self.noise)
    }
}

impl MazeEnv for GridEnv {
    fn maze(&self) -> &MazeSpec {
        &self.maze
    }

    fn achieve_radius(&self) -> f64 {
        0.5
    }

    fn cell_of(&self, s: &DiscreteState) -> DiscreteState {
        *s
    }

    fn state_at(&self, cell: DiscreteState) -> DiscreteState {
        cell
    }

    fn control_actions(&self) -> Vec<Move> {
        Move::ALL.to_vec()
    }

    fn is_discrete(&self) -> bool {
        true
    }

    fn achieves(&self, s: &DiscreteState, target: &DiscreteState) -> bool {
        s == target
    }
}

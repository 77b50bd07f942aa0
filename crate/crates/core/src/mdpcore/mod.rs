//! Environments: ASCII mazes, slip-noise gridworld dynamics, a continuous point
//! maze with slide-along-wall collisions, and exact tabular MDPs.

mod grid;
mod maze;
mod point;
mod tabular;

pub use grid::{step_discrete, DiscreteState, GridEnv, Move};
pub use maze::{Cell, MazeError, MazeSpec};
pub use point::{
    is_clear, slide_body, slide_move, step_body, step_continuous, ContinuousState, PointEnv, DEFAULT_BODY_RADIUS,
    DEFAULT_STEP_MAX,
};
pub use tabular::{build_tabular, random_tabular, TabularEnv, TabularError, TabularMDP};

use crate::geometry::{StateKey, Vec2};
use rand::Rng;
use std::fmt::Debug;

/// Errors raised by environment dynamics.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StepError {
    #[error("state {0} is not a free maze location")]
    InvalidState(String),
    #[error("slip noise {0} outside [0, 0.5]")]
    InvalidNoise(f64),
}

/// A logged environment step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition<S, A> {
    pub state: S,
    pub action: A,
    pub next_state: S,
    pub reward: f64,
    pub done: bool,
    pub episode: usize,
    pub t: usize,
}

/// Two-column numeric encoding used by the trajectory log.
pub trait Record: Sized + Copy {
    fn encode(&self) -> [f64; 2];
    fn decode(v: [f64; 2]) -> Option<Self>;
}

/// States with a location in maze coordinates.
pub trait Spatial {
    fn position(&self) -> Vec2;
}

/// Anything random-policy rollouts can run on.
pub trait Environment: Sync {
    type State: Record + PartialEq + Debug + Send + Sync;
    type Action: Record + PartialEq + Debug + Send + Sync;

    /// Uniform random start state.
    fn random_start<R: Rng>(&self, rng: &mut R) -> Self::State;
    /// Uniform random action (the non-interventional policy).
    fn random_action<R: Rng>(&self, rng: &mut R) -> Self::Action;
    /// One step with no episode goal.
    fn step<R: Rng>(
        &self,
        s: Self::State,
        a: Self::Action,
        rng: &mut R,
    ) -> Result<Self::State, StepError>;
    /// Bin of a state for counting.
    fn key(&self, s: &Self::State) -> StateKey;
    /// Short identifier written to log metadata.
    fn tag(&self) -> String;
}

/// Maze-backed environments: goal-conditioned stepping and a finite control
/// action set for tabular learners.
pub trait MazeEnv: Environment
where
    Self::State: Spatial,
{
    fn maze(&self) -> &MazeSpec;
    /// Radius within which a state counts as reaching a target.
    fn achieve_radius(&self) -> f64;
    /// Cell containing a state.
    fn cell_of(&self, s: &Self::State) -> DiscreteState;
    /// Representative state of a free cell (its center).
    fn state_at(&self, cell: DiscreteState) -> Self::State;
    /// Finite action set used by Q-learning.
    fn control_actions(&self) -> Vec<Self::Action>;
    /// Whether the environment state space is the cell grid itself.
    fn is_discrete(&self) -> bool;

    fn achieves(&self, s: &Self::State, target: &Self::State) -> bool {
        s.position().dist(target.position()) < self.achieve_radius()
    }

    /// Goal-conditioned step: reward 1 and `done` once `goal` is achieved.
    fn step_to_goal<R: Rng>(
        &self,
        s: Self::State,
        a: Self::Action,
        goal: &Self::State,
        rng: &mut R,
    ) -> Result<(Self::State, f64, bool), StepError> {
        let next = self.step(s, a, rng)?;
        let done = self.achieves(&next, goal);
        Ok((next, if done { 1.0 } else { 0.0 }, done))
    }
}

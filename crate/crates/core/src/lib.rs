//! Goal discovery from causal capacity.
//!
//! The pipeline runs random-policy rollouts over a maze, estimates the entropy of
//! every state's non-interventional next-state distribution (its causal capacity),
//! selects high-capacity states as subgoals, learns a subgoal predictor, and builds
//! concatenated potential-based shaping rewards for a goal-conditioned Q-learning
//! harness. Exact tabular oracles back every estimator.
//!
//! Modules map one-to-one onto the pipeline stages:
//!
//! - [`mdpcore`]: mazes, discrete and continuous dynamics, exact tabular MDPs
//! - [`sampler`]: random and frontier-restart rollouts, trajectory logs
//! - [`capacity`]: transition counting, Monte Carlo and clustered capacity, transfer-entropy bounds
//! - [`subgoals`]: selection, subgoal transition graph, planning
//! - [`predictor`]: encoder/decoder/predictor networks with hand-written gradients
//! - [`shaping`]: per-region potentials and the policy-invariance check
//! - [`rl`]: tabular goal-conditioned Q-learning, value iteration, ablations
//! - [`cli`]: configuration, pipeline stages and rendering
//!
//! Data-parallel loops go through [`par`], which uses rayon when the `parallel`
//! feature is enabled and plain iterators otherwise. Results never depend on the
//! worker count.

pub mod capacity;
pub mod cli;
pub mod geometry;
pub mod mdpcore;
pub mod par;
pub mod predictor;
pub mod rl;
pub mod sampler;
pub mod seed;
pub mod shaping;
pub mod subgoals;

pub use geometry::{Discretizer, StateKey, Vec2};

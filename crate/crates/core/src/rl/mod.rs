//! Goal-conditioned tabular Q-learning, the value-iteration oracle, and the
//! variant ablation harness.

mod ablation;
mod qtable;
mod train;
mod vi;

pub use ablation::{run_ablation, AblationConfig, AblationResult, RunResult, VariantSummary};
pub use qtable::QTable;
pub use train::{evaluate, format_curve, parse_curve, train, Curve, CurvePoint, Guidance, RLConfig, Variant};
pub use vi::{greedy_sets, value_iteration, ValueResult};

use crate::mdpcore::StepError;

#[derive(Debug, thiserror::Error)]
pub enum RlError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("value iteration did not converge within {0} sweeps")]
    NonConvergence(usize),
    #[error("variant {0} needs subgoal guidance it was not given")]
    MissingDependency(Variant),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("malformed line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

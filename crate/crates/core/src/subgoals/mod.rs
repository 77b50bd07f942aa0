//! Subgoal selection, the observed subgoal transition graph, region labels
//! and next-subgoal planning.

mod graph;
mod io;
mod select;

pub use graph::{build_subgoal_graph, plan_next_subgoal, PlanStep, SubgoalGraph};
pub use io::{format_subgoals, parse_subgoals, read_subgoals, write_subgoals};
pub use select::{assign_nearest, select_subgoals, Subgoal, SubgoalSet};

#[derive(Debug, thiserror::Error)]
pub enum SubgoalError {
    #[error("no state reaches the threshold {threshold} (max capacity {max})")]
    NoCandidates { threshold: f64, max: f64 },
    #[error("subgoal set is empty")]
    EmptySubgoals,
    #[error("threshold must be positive, got {0}")]
    BadThreshold(f64),
    #[error("capacity map is empty")]
    EmptyMap,
    #[error("goal region {goal} is unreachable from region {from}")]
    Unreachable { from: usize, goal: usize },
    #[error("unknown subgoal id {0}")]
    UnknownId(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed subgoal file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

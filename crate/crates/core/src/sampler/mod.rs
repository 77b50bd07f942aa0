//! Trajectory collection: uniform random-policy rollouts, frontier restarts
//! from rarely visited states, visit counting and the line-oriented log.

mod log;
mod rollout;

pub use log::{format_log, parse_log, read_log, write_log, LOG_COLUMNS};
pub use rollout::{explore, frontier_resample, rollout_random, VisitCounts};

use crate::mdpcore::{StepError, Transition};

#[derive(Debug, thiserror::Error)]
pub enum SamplerError {
    #[error("visit counts are empty")]
    EmptyCounts,
    #[error("episodes and horizon must both be at least 1")]
    BadArgs,
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
}

/// Provenance of a trajectory set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrajectoryMeta {
    pub seed: u64,
    /// `random`, `frontier`, or a `+`-joined combination after [`TrajectorySet::append`].
    pub policy: String,
    pub env: String,
}

/// Ordered transitions grouped into contiguous episodes `0..episodes`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySet<S, A> {
    pub transitions: Vec<Transition<S, A>>,
    pub episodes: usize,
    pub meta: TrajectoryMeta,
}

impl<S: Copy + PartialEq, A: Copy> TrajectorySet<S, A> {
    pub fn empty(meta: TrajectoryMeta) -> Self {
        Self { transitions: Vec::new(), episodes: 0, meta }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Appends `other`, shifting its episode indices past ours.
    pub fn append(&mut self, other: TrajectorySet<S, A>) {
        let offset = self.episodes;
        self.transitions.extend(other.transitions.into_iter().map(|mut t| {
            t.episode += offset;
            t
        }));
        self.episodes += other.episodes;
        if self.meta.policy.is_empty() {
            self.meta.policy = other.meta.policy;
        } else if !self.meta.policy.split('+').any(|p| p == other.meta.policy) {
            self.meta.policy = format!("{}+{}", self.meta.policy, other.meta.policy);
        }
    }

    /// Per-episode state sequences: every record's state followed by the
    /// episode's final next state.
    pub fn episode_states(&self) -> Vec<Vec<S>> {
        let mut out: Vec<Vec<S>> = Vec::with_capacity(self.episodes);
        let mut current = usize::MAX;
        for (i, t) in self.transitions.iter().enumerate() {
            if t.episode != current {
                current = t.episode;
                out.push(Vec::new());
            }
            let seq = out.last_mut().expect("pushed above");
            seq.push(t.state);
            let last_of_episode = self
                .transitions
                .get(i + 1)
                .is_none_or(|n| n.episode != t.episode);
            if last_of_episode || t.done {
                seq.push(t.next_state);
            }
        }
        out
    }

    /// Index of the first record that breaks `next_state[t] == state[t + 1]`
    /// within an episode (ignoring records marked done), or that breaks
    /// contiguous episode numbering.
    pub fn chaining_violation(&self) -> Option<usize> {
        for (i, w) in self.transitions.windows(2).enumerate() {
            let (a, b) = (&w[0], &w[1]);
            if b.episode == a.episode {
                if !a.done && a.next_state != b.state {
                    return Some(i + 1);
                }
            } else if b.episode != a.episode + 1 {
                return Some(i + 1);
            }
        }
        match self.transitions.first() {
            Some(t) if t.episode != 0 => Some(0),
            _ => None,
        }
    }
}

//! Region-wise potential fields concatenated along the subgoal plan, the gated
//! shaped reward, and a value-iteration check that ungated shaping leaves the
//! optimal greedy actions unchanged.
//!
//! Potentials decrease toward the goal. Shaping works on the depth
//! `ψ = Φ - ceiling <= 0` of a state below the field's largest potential, and
//! the term for a transition `s -> s'` is `ψ(s) - γ ψ(s')`. Progress earns a
//! bonus and a blocked move costs `(1 - γ) |ψ(s)|`. Transitions into the goal
//! use the goal's depth like any other, so the shaped return of an episode is
//! `ψ(s_0) + (1 + γ ceiling_gap) R`, where `R` is the sparse goal return and
//! `ceiling_gap = -ψ(goal)`: a positive rescaling of the goal reward, which a
//! goal-reaching task's optimal actions do not depend on.

mod field;

pub use field::{build_potentials, greedy_descent, naive_potential, Descent, PotentialField};

use crate::mdpcore::{DiscreteState, Spatial, TabularMDP, Transition};
use crate::rl::{greedy_sets, value_iteration, RlError};
use crate::subgoals::SubgoalError;

#[derive(Debug, thiserror::Error)]
pub enum ShapingError {
    #[error("goal {0:?} has no region")]
    UnreachableGoal(DiscreteState),
    #[error("state {0} has no potential")]
    UnknownState(String),
    #[error("bad potential field: {0}")]
    BadField(String),
    #[error("malformed potential file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Subgoals(#[from] SubgoalError),
    #[error(transparent)]
    Rl(#[from] RlError),
}

/// `ψ(s) - γ ψ(s')`.
pub fn shaping_term(psi_s: f64, psi_next: f64, gamma: f64) -> f64 {
    psi_s - gamma * psi_next
}

/// Environment reward plus `κ` times the shaping term, applied only when the
/// predicted region equals the planned one.
pub fn shaped_reward<S: Spatial, A>(
    field: &PotentialField,
    tr: &Transition<S, A>,
    gamma: f64,
    predicted: usize,
    planned: usize,
    kappa: f64,
) -> Result<f64, ShapingError> {
    if predicted != planned {
        return Ok(tr.reward);
    }
    let p = tr.state.position();
    let q = tr.next_state.position();
    let psi_s = field.depth(p).ok_or_else(|| ShapingError::UnknownState(format!("{p:?}")))?;
    let psi_n = field.depth(q).ok_or_else(|| ShapingError::UnknownState(format!("{q:?}")))?;
    Ok(tr.reward + kappa * shaping_term(psi_s, psi_n, gamma))
}

/// Tabular state whose greedy actions differ after shaping.
#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    pub state: usize,
    pub original: Vec<usize>,
    pub shaped: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceReport {
    pub states: usize,
    pub mismatches: Vec<Mismatch>,
    /// `max |Q_shaped(s, a) - ((1 - γ ψ(goal)) Q(s, a) + ψ(s))|` over
    /// non-terminal states.
    pub max_shift_error: f64,
}

impl InvarianceReport {
    pub fn holds(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Sweep tolerance used for both value iterations.
pub const VI_TOL: f64 = 1e-12;
const VI_MAX_SWEEPS: usize = 200_000;

/// Runs value iteration on the goal-reaching task (reward 1 on entering the
/// field's goal, which is absorbing) with and without ungated shaping and
/// compares greedy-action sets within the tie band `tol`.
pub fn verify_invariance(
    mdp: &TabularMDP,
    field: &PotentialField,
    gamma: f64,
    tol: f64,
) -> Result<InvarianceReport, ShapingError> {
    verify_with_bonus(mdp, field, gamma, tol, |_, _, _| 0.0)
}

/// [`verify_invariance`] with an extra reward `bonus(s, a, s')` added to the
/// shaped task. A bonus that is not potential-based is expected to show up
/// as mismatches.
pub fn verify_with_bonus<B>(
    mdp: &TabularMDP,
    field: &PotentialField,
    gamma: f64,
    tol: f64,
    bonus: B,
) -> Result<InvarianceReport, ShapingError>
where
    B: Fn(usize, usize, usize) -> f64,
{
    let cells = mdp
        .state_cells()
        .ok_or_else(|| ShapingError::BadField("tabular MDP has no cell layout".into()))?;
    let goal = mdp
        .state_of_cell(field.goal)
        .ok_or_else(|| ShapingError::UnknownState(format!("{:?}", field.goal)))?;
    let psi: Vec<f64> = cells
        .iter()
        .map(|&c| field.depth_at_cell(c).ok_or_else(|| ShapingError::UnknownState(format!("{c:?}"))))
        .collect::<Result<_, _>>()?;
    let mut terminal = vec![false; mdp.n_states()];
    terminal[goal] = true;
    let base = |_: usize, _: usize, s2: usize| if s2 == goal { 1.0 } else { 0.0 };
    let original = value_iteration(mdp, base, &terminal, gamma, VI_TOL, VI_MAX_SWEEPS)?;
    let shaped = value_iteration(
        mdp,
        |s, a, s2| base(s, a, s2) + shaping_term(psi[s], psi[s2], gamma) + bonus(s, a, s2),
        &terminal,
        gamma,
        VI_TOL,
        VI_MAX_SWEEPS,
    )?;
    let g0 = greedy_sets(&original.q, tol);
    let g1 = greedy_sets(&shaped.q, tol);
    let mut mismatches = Vec::new();
    let scale = 1.0 - gamma * psi[goal];
    let mut max_shift_error: f64 = 0.0;
    for s in 0..mdp.n_states() {
        if terminal[s] {
            continue;
        }
        for a in 0..mdp.n_actions() {
            max_shift_error = max_shift_error.max((shaped.q[s][a] - (scale * original.q[s][a] + psi[s])).abs());
        }
        if g0[s] != g1[s] {
            mismatches.push(Mismatch { state: s, original: g0[s].clone(), shaped: g1[s].clone() });
        }
    }
    Ok(InvarianceReport { states: mdp.n_states(), mismatches, max_shift_error })
}

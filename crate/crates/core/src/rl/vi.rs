use super::RlError;
use crate::mdpcore::TabularMDP;

/// Converged optimal values and action values.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueResult {
    pub v: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub sweeps: usize,
}

impl ValueResult {
    /// Actions within `tol` of the best action value, per state.
    pub fn greedy_sets(&self, tol: f64) -> Vec<Vec<usize>> {
        greedy_sets(&self.q, tol)
    }
}

pub fn greedy_sets(q: &[Vec<f64>], tol: f64) -> Vec<Vec<usize>> {
    q.iter()
        .map(|row| {
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..row.len()).filter(|&a| row[a] >= best - tol).collect()
        })
        .collect()
}

/// Synchronous Bellman optimality sweeps until the sup-norm change drops
/// below `tol`. Terminal states have value 0 and are never left.
/// `reward(s, a, s')` is paid on every transition out of a non-terminal state.
pub fn value_iteration<F>(
    mdp: &TabularMDP,
    reward: F,
    terminal: &[bool],
    gamma: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<ValueResult, RlError>
where
    F: Fn(usize, usize, usize) -> f64,
{
    let (n, na) = (mdp.n_states(), mdp.n_actions());
    if terminal.len() != n {
        return Err(RlError::BadConfig(format!("terminal mask has {} entries for {n} states", terminal.len())));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(RlError::BadConfig(format!("gamma must be in [0, 1), got {gamma}")));
    }
    // Sparse rows and their rewards, computed once.
    let rows: Vec<Vec<Vec<(usize, f64, f64)>>> = (0..n)
        .map(|s| {
            (0..na)
                .map(|a| {
                    mdp.row(s, a)
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p > 0.0)
                        .map(|(s2, &p)| (s2, p, reward(s, a, s2)))
                        .collect()
                })
                .collect()
        })
        .collect();
    let backup = |v: &[f64], s: usize, a: usize| -> f64 {
        rows[s][a].iter().map(|&(s2, p, r)| p * (r + if terminal[s2] { 0.0 } else { gamma * v[s2] })).sum()
    };
    let mut v = vec![0.0; n];
    for sweep in 1..=max_sweeps {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                if terminal[s] {
                    0.0
                } else {
                    (0..na).map(|a| backup(&v, s, a)).fold(f64::NEG_INFINITY, f64::max)
                }
            })
            .collect();
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < tol {
            let q = (0..n).map(|s| (0..na).map(|a| if terminal[s] { 0.0 } else { backup(&v, s, a) }).collect()).collect();
            return Ok(ValueResult { v, q, sweeps: sweep });
        }
    }
    Err(RlError::NonConvergence(max_sweeps))
}

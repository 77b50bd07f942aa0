use super::entropy::entropy;
use super::CapacityError;
use crate::mdpcore::TabularMDP;
use crate::seed::stream_rng;
use rand::Rng;

/// `C(s) = H(p(. | s))` under the uniform random policy, from the exact tensor.
pub fn exact_capacity(mdp: &TabularMDP, s: usize) -> Result<f64, CapacityError> {
    mdp.check_index(s, 0)?;
    Ok(entropy(&mdp.marginal(s)))
}

/// `T(s, a) = H(p(. | s)) - H(p(. | s, a))`.
pub fn exact_transfer_entropy(mdp: &TabularMDP, s: usize, a: usize) -> Result<f64, CapacityError> {
    mdp.check_index(s, a)?;
    Ok(entropy(&mdp.marginal(s)) - entropy(mdp.row(s, a)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    /// `T(s, a) <= C(s)`.
    Upper,
    /// `T(s, a) >= (1 - |A|) H(p(. | s, a))`.
    Lower,
    /// `max_a T(s, a) >= 0`.
    MaxNonNegative,
    /// `max_a T(s, a) <= C(s)`.
    MaxUpper,
    /// Sampled next-state frequencies disagree with the tensor.
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    pub s: usize,
    pub a: Option<usize>,
    pub kind: BoundKind,
    /// How far the bound is exceeded.
    pub amount: f64,
}

/// Sampled check of `p(s' | s)`: draw uniform actions and successors per state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McCheck {
    pub samples_per_state: usize,
    pub seed: u64,
    /// Largest accepted total-variation distance per state.
    pub tolerance: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundReport {
    pub checked_pairs: usize,
    /// Smallest `C(s) - T(s, a)`.
    pub min_upper_slack: f64,
    /// Smallest `T(s, a) - (1 - |A|) H(p(. | s, a))`.
    pub min_lower_slack: f64,
    /// Largest sampled total-variation distance, when sampling was requested.
    pub mc_max_tv: Option<f64>,
    pub violations: Vec<Violation>,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the transfer-entropy bounds for every `(s, a)` with tolerance `tol`,
/// and optionally compares sampled successor frequencies against the tensor.
pub fn check_propositions(mdp: &TabularMDP, tol: f64, mc: Option<McCheck>) -> BoundReport {
    let n_a = mdp.n_actions();
    let mut report = BoundReport {
        min_upper_slack: f64::INFINITY,
        min_lower_slack: f64::INFINITY,
        ..BoundReport::default()
    };
    for s in 0..mdp.n_states() {
        let c = entropy(&mdp.marginal(s));
        let mut best = f64::NEG_INFINITY;
        for a in 0..n_a {
            let h = entropy(mdp.row(s, a));
            let t = c - h;
            best = best.max(t);
            report.checked_pairs += 1;
            let upper = c - t;
            let lower = t - (1.0 - n_a as f64) * h;
            report.min_upper_slack = report.min_upper_slack.min(upper);
            report.min_lower_slack = report.min_lower_slack.min(lower);
            if upper < -tol {
                report.violations.push(Violation { s, a: Some(a), kind: BoundKind::Upper, amount: -upper });
            }
            if lower < -tol {
                report.violations.push(Violation { s, a: Some(a), kind: BoundKind::Lower, amount: -lower });
            }
        }
        if best < -tol {
            report.violations.push(Violation { s, a: None, kind: BoundKind::MaxNonNegative, amount: -best });
        }
        if best > c + tol {
            report.violations.push(Violation { s, a: None, kind: BoundKind::MaxUpper, amount: best - c });
        }
    }
    if let Some(check) = mc {
        let tvs = crate::par::map_range(mdp.n_states(), |s| {
            let mut rng = stream_rng(check.seed, s as u64);
            let mut counts = vec![0u64; mdp.n_states()];
            for _ in 0..check.samples_per_state {
                let a = rng.random_range(0..n_a);
                counts[mdp.sample_next(s, a, &mut rng)] += 1;
            }
            let n = check.samples_per_state.max(1) as f64;
            let m = mdp.marginal(s);
            0.5 * counts.iter().zip(&m).map(|(&k, &p)| (k as f64 / n - p).abs()).sum::<f64>()
        });
        let mut worst: f64 = 0.0;
        for (s, tv) in tvs.into_iter().enumerate() {
            worst = worst.max(tv);
            if tv > check.tolerance {
                report.violations.push(Violation { s, a: None, kind: BoundKind::MonteCarlo, amount: tv });
            }
        }
        report.mc_max_tv = Some(worst);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdpcore::{build_tabular, random_tabular, MazeSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn deterministic_junction() {
        // Three actions to three distinct successors, one action blocked.
        let p = vec![
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            1.0, 0.0, 0.0, 0.0, //
        ];
        let mut full = p.clone();
        for _ in 1..4 {
            full.extend([1.0, 0.0, 0.0, 0.0].repeat(4));
        }
        let mdp = TabularMDP::new(4, 4, full, None).unwrap();
        assert_abs_diff_eq!(exact_capacity(&mdp, 0).unwrap(), 4f64.ln(), epsilon = 1e-12);
        // Deterministic rows have zero conditional entropy, so T = C.
        assert_abs_diff_eq!(exact_transfer_entropy(&mdp, 0, 2).unwrap(), 4f64.ln(), epsilon = 1e-12);
        assert!(check_propositions(&mdp, 1e-9, None).holds());
    }

    #[test]
    fn out_of_range_indices() {
        let mdp = random_tabular(3, 2, 2, 1).unwrap();
        assert!(exact_capacity(&mdp, 3).is_err());
        assert!(exact_transfer_entropy(&mdp, 0, 2).is_err());
    }

    #[test]
    fn noisy_maze_satisfies_bounds_and_sampling() {
        let maze = MazeSpec::parse(include_str!("../../fixtures/demo.maze")).unwrap();
        let mdp = build_tabular(&maze, 0.1).unwrap();
        let check = McCheck { samples_per_state: 20_000, seed: 9, tolerance: 0.02 };
        let r = check_propositions(&mdp, 1e-9, Some(check));
        assert!(r.holds(), "{:?}", r.violations);
        assert!(r.mc_max_tv.unwrap() < 0.02);
    }

    #[test]
    fn corrupted_sampling_is_detected() {
        let mdp = random_tabular(5, 3, 3, 2).unwrap();
        let check = McCheck { samples_per_state: 10, seed: 1, tolerance: 1e-6 };
        let r = check_propositions(&mdp, 1e-9, Some(check));
        assert!(r.violations.iter().any(|v| v.kind == BoundKind::MonteCarlo));
    }

    proptest! {
        #[test]
        fn random_mdps_satisfy_bounds(seed in 0u64..1000, n in 2usize..12, a in 2usize..6, b in 1usize..5) {
            let mdp = random_tabular(n, a, b, seed).unwrap();
            let r = check_propositions(&mdp, 1e-9, None);
            prop_assert!(r.holds(), "{:?}", r.violations);
            for s in 0..n {
                let c = exact_capacity(&mdp, s).unwrap();
                prop_assert!(c >= -1e-12 && c <= (n as f64).ln() + 1e-12);
            }
        }
    }
}

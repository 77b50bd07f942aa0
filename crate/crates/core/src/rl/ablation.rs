use super::{train, Curve, Guidance, RLConfig, RlError, Variant};
use crate::mdpcore::{MazeEnv, Spatial};
use crate::par;

#[derive(Clone, Debug, PartialEq)]
pub struct AblationConfig {
    pub rl: RLConfig,
    pub variants: Vec<Variant>,
    /// Shared across variants; each overrides `rl.seed`.
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub variant: Variant,
    pub seed: u64,
    pub curve: Curve,
}

impl RunResult {
    pub fn final_success(&self) -> f64 {
        self.curve.last().map_or(0.0, |p| p.success)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariantSummary {
    pub variant: Variant,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationResult {
    /// In variant-major, then seed order.
    pub runs: Vec<RunResult>,
}

impl AblationResult {
    pub fn runs_of(&self, v: Variant) -> impl Iterator<Item = &RunResult> {
        self.runs.iter().filter(move |r| r.variant == v)
    }

    /// Mean final success of a variant, `None` if it was not run.
    pub fn mean_final(&self, v: Variant) -> Option<f64> {
        let finals: Vec<f64> = self.runs_of(v).map(RunResult::final_success).collect();
        (!finals.is_empty()).then(|| finals.iter().sum::<f64>() / finals.len() as f64)
    }

    /// Per-variant final-success statistics, best mean first. Equal means
    /// keep run order.
    pub fn summary(&self) -> Vec<VariantSummary> {
        let mut seen: Vec<Variant> = Vec::new();
        for r in &self.runs {
            if !seen.contains(&r.variant) {
                seen.push(r.variant);
            }
        }
        let mut out: Vec<VariantSummary> = seen
            .into_iter()
            .map(|v| {
                let finals: Vec<f64> = self.runs_of(v).map(RunResult::final_success).collect();
                VariantSummary {
                    variant: v,
                    mean: finals.iter().sum::<f64>() / finals.len() as f64,
                    min: finals.iter().copied().fold(f64::INFINITY, f64::min),
                    max: finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    runs: finals.len(),
                }
            })
            .collect();
        out.sort_by(|a, b| b.mean.total_cmp(&a.mean));
        out
    }

    pub fn format_summary(&self) -> String {
        let mut out = format!("{:<14}{:>6}{:>10}{:>10}{:>10}\n", "variant", "runs", "mean", "min", "max");
        for s in self.summary() {
            out.push_str(&format!(
                "{:<14}{:>6}{:>10.4}{:>10.4}{:>10.4}\n",
                s.variant.name(),
                s.runs,
                s.mean,
                s.min,
                s.max
            ));
        }
        out
    }
}

/// Trains every `(variant, seed)` pair independently and in parallel.
pub fn run_ablation<E>(env: &E, guidance: Option<&Guidance>, cfg: &AblationConfig) -> Result<AblationResult, RlError>
where
    E: MazeEnv,
    E::State: Spatial,
{
    if cfg.seeds.is_empty() || cfg.variants.is_empty() {
        return Err(RlError::BadConfig("ablation needs at least one variant and one seed".into()));
    }
    let jobs: Vec<(Variant, u64)> = cfg.variants.iter().flat_map(|&v| cfg.seeds.iter().map(move |&s| (v, s))).collect();
    let runs = par::map_slice(&jobs, |&(variant, seed)| {
        let rl = RLConfig { seed, ..cfg.rl.clone() };
        train(env, &rl, variant, guidance).map(|(_, curve)| RunResult { variant, seed, curve })
    });
    Ok(AblationResult { runs: runs.into_iter().collect::<Result<_, _>>()? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdpcore::{GridEnv, MazeSpec};
    use crate::rl::CurvePoint;

    #[test]
    fn easy_corridor_shows_no_separation() {
        let env = GridEnv::new(MazeSpec::parse("#####\n#...#\n#####").unwrap(), 0.0).unwrap();
        let cfg = AblationConfig {
            rl: RLConfig { episodes: 200, eval_every: 100, ..RLConfig::default() },
            variants: vec![Variant::NoReward, Variant::Sparse],
            seeds: vec![1, 2, 3],
        };
        let res = run_ablation(&env, None, &cfg).unwrap();
        assert_eq!(res.runs.len(), 6);
        assert!(res.runs.iter().all(|r| r.final_success() == 1.0));
        assert_eq!(res.mean_final(Variant::Gdcc), None);
        let table = res.format_summary();
        assert!(table.lines().count() == 3 && table.contains("no_reward"));
    }

    #[test]
    fn summary_orders_by_mean() {
        let mk = |variant, success| RunResult { variant, seed: 0, curve: vec![CurvePoint { episode: 1, success }] };
        let res = AblationResult { runs: vec![mk(Variant::Sparse, 0.2), mk(Variant::Gdcc, 0.9), mk(Variant::Gdcc, 0.7)] };
        let s = res.summary();
        assert_eq!(s[0].variant, Variant::Gdcc);
        assert!((s[0].mean - 0.8).abs() < 1e-12);
        assert_eq!((s[0].min, s[0].max, s[0].runs), (0.7, 0.9, 2));
    }
}

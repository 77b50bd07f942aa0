use crate::capacity::{Estimator, PartitionConfig};
use crate::rl::{RLConfig, Variant};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Parse { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), reason: reason.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvKind {
    Grid,
    Point,
}

/// Every pipeline setting. Defaults follow the paper's settings tables where
/// they exist; predictor training uses the desk-scale values.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub maze: Option<PathBuf>,
    pub env: EnvKind,
    pub noise: f64,
    pub step_max: f64,
    /// Half-width of the point-maze body.
    pub body_radius: f64,
    pub seed: u64,
    pub out_dir: PathBuf,

    pub sample_episodes: usize,
    pub sample_horizon: usize,
    pub frontier_rounds: usize,
    pub frontier_episodes: usize,

    pub estimator: Estimator,
    pub bin: f64,
    pub min_samples: u64,
    pub partition: PartitionConfig,
    pub threshold: f64,
    pub suppression_radius: f64,
    /// Cell `(row, col)` the exported potential field points to; the maze's
    /// `G` marker, else its last free cell.
    pub field_goal: Option<(usize, usize)>,

    pub embed_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub pretrain_steps: usize,
    pub pretrain_lr: f64,
    pub pretrain_batch: usize,
    pub recon_weight: f64,
    pub similarity_weight: f64,
    pub predictor_steps: usize,
    pub predictor_lr: f64,
    pub predictor_batch: usize,
    pub segment_len: usize,

    pub rl: RLConfig,
    pub variant: Variant,
    pub ablation_seeds: Vec<u64>,
    pub render_scale: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let partition = PartitionConfig::default();
        Self {
            maze: None,
            env: EnvKind::Grid,
            noise: 0.0,
            step_max: crate::mdpcore::DEFAULT_STEP_MAX,
            body_radius: crate::mdpcore::DEFAULT_BODY_RADIUS,
            seed: 0,
            out_dir: PathBuf::from("out"),
            sample_episodes: 400,
            sample_horizon: 200,
            frontier_rounds: 0,
            frontier_episodes: 100,
            estimator: Estimator::Mc,
            bin: 1.0,
            min_samples: partition.min_samples,
            partition,
            threshold: 2.5f64.ln(),
            suppression_radius: 1.0,
            field_goal: None,
            embed_dim: 64,
            hidden: 64,
            layers: 3,
            pretrain_steps: 2000,
            pretrain_lr: 1e-3,
            pretrain_batch: 256,
            recon_weight: 1.0,
            similarity_weight: 1.0,
            predictor_steps: 4000,
            predictor_lr: 0.1,
            predictor_batch: 20,
            segment_len: 50,
            rl: RLConfig::default(),
            variant: Variant::Gdcc,
            ablation_seeds: vec![1, 2, 3, 4, 5],
            render_scale: 8,
        }
    }
}

pub const KEYS: &[&str] = &[
    "maze",
    "env",
    "noise",
    "step_max",
    "body_radius",
    "seed",
    "out_dir",
    "sample_episodes",
    "sample_horizon",
    "frontier_rounds",
    "frontier_episodes",
    "estimator",
    "bin",
    "min_samples",
    "tau_nei",
    "tau_adj",
    "link_threshold",
    "max_cluster_points",
    "threshold",
    "suppression_radius",
    "field_goal",
    "embed_dim",
    "hidden",
    "layers",
    "pretrain_steps",
    "pretrain_lr",
    "pretrain_batch",
    "recon_weight",
    "similarity_weight",
    "predictor_steps",
    "predictor_lr",
    "predictor_batch",
    "segment_len",
    "gamma",
    "alpha",
    "alpha_decay",
    "eps_start",
    "eps_end",
    "eps_decay_frac",
    "episodes",
    "horizon",
    "eval_every",
    "eval_episodes",
    "kappa",
    "variant",
    "ablation_seeds",
    "render_scale",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| invalid(key, format!("cannot parse `{v}`")))
}

impl PipelineConfig {
    /// Applies one `key = value` pair. Relative paths resolve against `base`.
    pub fn set(&mut self, key: &str, v: &str, base: &Path) -> Result<(), ConfigError> {
        match key {
            "maze" => self.maze = Some(base.join(v)),
            "env" => {
                self.env = match v {
                    "grid" => EnvKind::Grid,
                    "point" => EnvKind::Point,
                    _ => return Err(invalid(key, "expected `grid` or `point`")),
                }
            }
            "noise" => self.noise = num(key, v)?,
            "step_max" => self.step_max = num(key, v)?,
            "body_radius" => self.body_radius = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "out_dir" => self.out_dir = base.join(v),
            "sample_episodes" => self.sample_episodes = num(key, v)?,
            "sample_horizon" => self.sample_horizon = num(key, v)?,
            "frontier_rounds" => self.frontier_rounds = num(key, v)?,
            "frontier_episodes" => self.frontier_episodes = num(key, v)?,
            "estimator" => self.estimator = v.parse().map_err(|_| invalid(key, "expected `mc` or `clustered`"))?,
            "bin" => self.bin = num(key, v)?,
            "min_samples" => {
                self.min_samples = num(key, v)?;
                self.partition.min_samples = self.min_samples;
            }
            "tau_nei" => self.partition.tau_nei = num(key, v)?,
            "tau_adj" => self.partition.tau_adj = num(key, v)?,
            "link_threshold" => self.partition.link_threshold = num(key, v)?,
            "max_cluster_points" => self.partition.max_cluster_points = num(key, v)?,
            "threshold" => self.threshold = num(key, v)?,
            "suppression_radius" => self.suppression_radius = num(key, v)?,
            "field_goal" => {
                let (r, c) = v.split_once(',').ok_or_else(|| invalid(key, "expected `row,col`"))?;
                self.field_goal = Some((num(key, r.trim())?, num(key, c.trim())?));
            }
            "embed_dim" => self.embed_dim = num(key, v)?,
            "hidden" => self.hidden = num(key, v)?,
            "layers" => self.layers = num(key, v)?,
            "pretrain_steps" => self.pretrain_steps = num(key, v)?,
            "pretrain_lr" => self.pretrain_lr = num(key, v)?,
            "pretrain_batch" => self.pretrain_batch = num(key, v)?,
            "recon_weight" => self.recon_weight = num(key, v)?,
            "similarity_weight" => self.similarity_weight = num(key, v)?,
            "predictor_steps" => self.predictor_steps = num(key, v)?,
            "predictor_lr" => self.predictor_lr = num(key, v)?,
            "predictor_batch" => self.predictor_batch = num(key, v)?,
            "segment_len" => self.segment_len = num(key, v)?,
            "gamma" => self.rl.gamma = num(key, v)?,
            "alpha" => self.rl.alpha = num(key, v)?,
            "alpha_decay" => self.rl.alpha_decay = num(key, v)?,
            "eps_start" => self.rl.eps_start = num(key, v)?,
            "eps_end" => self.rl.eps_end = num(key, v)?,
            "eps_decay_frac" => self.rl.eps_decay_frac = num(key, v)?,
            "episodes" => self.rl.episodes = num(key, v)?,
            "horizon" => self.rl.horizon = num(key, v)?,
            "eval_every" => self.rl.eval_every = num(key, v)?,
            "eval_episodes" => self.rl.eval_episodes = num(key, v)?,
            "kappa" => self.rl.kappa = num(key, v)?,
            "variant" => self.variant = v.parse().map_err(|_| invalid(key, "unknown variant"))?,
            "ablation_seeds" => {
                self.ablation_seeds = v
                    .split(',')
                    .map(|s| num::<u64>(key, s.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "render_scale" => self.render_scale = num(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Cross-key invariants. Errors name every key involved.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.partition;
        if !(p.tau_nei > 0.0 && p.tau_nei < p.tau_adj) {
            return Err(ConfigError::Invalid {
                key: "tau_nei, tau_adj".into(),
                reason: format!("need 0 < tau_nei < tau_adj, got {} and {}", p.tau_nei, p.tau_adj),
            });
        }
        self.partition.validate().map_err(|e| invalid("link_threshold, max_cluster_points", e.to_string()))?;
        self.rl.validate().map_err(|e| {
            let key = ["gamma", "alpha", "alpha_decay", "eps_start", "eps_end", "eps_decay_frac", "horizon", "eval_every", "kappa"]
                .into_iter()
                .find(|k| e.to_string().starts_with(&format!("invalid configuration: {k} ")))
                .unwrap_or("rl");
            invalid(key, e.to_string())
        })?;
        if !(0.0..=0.5).contains(&self.noise) {
            return Err(invalid("noise", "must be in [0, 0.5]"));
        }
        if !(self.threshold > 0.0) {
            return Err(invalid("threshold", "must be positive"));
        }
        if !(self.bin > 0.0 && self.bin.is_finite()) {
            return Err(invalid("bin", "must be positive"));
        }
        if !(self.step_max > 0.0 && self.step_max.is_finite()) {
            return Err(invalid("step_max", "must be positive"));
        }
        if !(0.0..0.5).contains(&self.body_radius) {
            return Err(invalid("body_radius", "must be in [0, 0.5)"));
        }
        for (k, v) in [
            ("sample_episodes", self.sample_episodes),
            ("sample_horizon", self.sample_horizon),
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("pretrain_batch", self.pretrain_batch),
            ("predictor_batch", self.predictor_batch),
            ("segment_len", self.segment_len),
            ("render_scale", self.render_scale),
        ] {
            if v == 0 {
                return Err(invalid(k, "must be at least 1"));
            }
        }
        if self.layers == 0 {
            return Err(invalid("layers", "must be at least 1"));
        }
        if self.ablation_seeds.is_empty() {
            return Err(invalid("ablation_seeds", "needs at least one seed"));
        }
        if let Some(m) = &self.maze {
            if !m.is_file() {
                return Err(invalid("maze", format!("{} does not exist", m.display())));
            }
        }
        Ok(())
    }
}

/// Result of reading a config file: the config plus the notes produced while
/// resolving it (duplicate keys and applied defaults).
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: PipelineConfig,
    pub warnings: Vec<String>,
    pub defaulted: Vec<&'static str>,
}

/// Parses `key = value` lines with `#` comments. Later duplicates win and
/// produce a warning. Relative paths resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<Loaded, ConfigError> {
    let mut config = PipelineConfig::default();
    let mut seen: Vec<String> = Vec::new();
    let mut warnings = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Parse { line: i + 1 })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(ConfigError::Parse { line: i + 1 });
        }
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        if seen.iter().any(|s| s == k) {
            warnings.push(format!("line {}: duplicate key `{k}`, last value wins", i + 1));
        } else {
            seen.push(k.to_string());
        }
        config.set(k, v, base)?;
    }
    config.validate()?;
    let defaulted = KEYS.iter().copied().filter(|k| !seen.iter().any(|s| s == k)).collect();
    Ok(Loaded { config, warnings, defaulted })
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Loaded, ConfigError> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&std::fs::read_to_string(path)?, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Loaded, ConfigError> {
        parse_config(text, Path::new("."))
    }

    #[test]
    fn empty_file_gives_defaults() {
        let l = parse("").unwrap();
        assert_eq!(l.config.partition.tau_nei, 0.7);
        assert_eq!(l.config.partition.tau_adj, 1.0);
        assert!((l.config.threshold - 2.5f64.ln()).abs() < 1e-15);
        assert_eq!(l.config.embed_dim, 64);
        assert_eq!(l.config.rl.gamma, 0.99);
        assert_eq!(l.config.rl.horizon, 600);
        assert_eq!(l.defaulted.len(), KEYS.len());
    }

    #[test]
    fn bad_gamma_rejected() {
        match parse("gamma = 1.5") {
            Err(ConfigError::Invalid { key, .. }) => assert_eq!(key, "gamma"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn crossed_thresholds_name_both_keys() {
        match parse("tau_nei = 1.0\ntau_adj = 0.7\n") {
            Err(e @ ConfigError::Invalid { .. }) => {
                let msg = e.to_string();
                assert!(msg.contains("tau_nei") && msg.contains("tau_adj"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicates_warn_and_last_wins() {
        let l = parse("seed = 1\n# comment\nseed = 7 # trailing\n").unwrap();
        assert_eq!(l.config.seed, 7);
        assert_eq!(l.warnings.len(), 1);
        assert!(!l.defaulted.contains(&"seed"));
    }

    #[test]
    fn unknown_key_and_bad_line() {
        assert!(matches!(parse("colour = red"), Err(ConfigError::UnknownKey(k)) if k == "colour"));
        assert!(matches!(parse("seed 3"), Err(ConfigError::Parse { line: 1 })));
        assert!(matches!(parse("maze = /no/such/file.maze"), Err(ConfigError::Invalid { key, .. }) if key == "maze"));
    }

    #[test]
    fn lists_and_enums() {
        let l = parse("ablation_seeds = 3, 4\nvariant = sparse\nestimator = clustered\nenv = point\nfield_goal = 2,3").unwrap();
        assert_eq!(l.config.ablation_seeds, vec![3, 4]);
        assert_eq!(l.config.variant, Variant::Sparse);
        assert_eq!(l.config.estimator, Estimator::Clustered);
        assert_eq!(l.config.env, EnvKind::Point);
        assert_eq!(l.config.field_goal, Some((2, 3)));
    }
}

//! Command-line front end. Every stage reads its inputs from and writes its
//! outputs to the output directory, so stages can be run one at a time or
//! all together with `pipeline`.
//!
//! Exit codes: 0 success, 1 runtime or check failure, 2 usage error,
//! 3 configuration error.

pub mod config;
pub mod render;
pub mod stages;
pub mod verify;

pub use config::{load_config, parse_config, ConfigError, EnvKind, Loaded, PipelineConfig, KEYS};

use crate::capacity::{read_capacity_map, CapacityError};
use crate::geometry::Discretizer;
use crate::mdpcore::{GridEnv, MazeError, PointEnv, StepError};
use crate::predictor::PredictorError;
use crate::rl::{RlError, Variant};
use crate::sampler::SamplerError;
use crate::shaping::{PotentialField, ShapingError};
use crate::subgoals::SubgoalError;
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use stages::{with_env, Paths};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("check failed")]
    CheckFailed,
    #[error(transparent)]
    Maze(#[from] MazeError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error(transparent)]
    Subgoals(#[from] SubgoalError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Shaping(#[from] ShapingError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "goal-discovery", version, about = "Subgoal discovery and subgoal-guided reward shaping on mazes")]
struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Maze file.
    #[arg(long, global = true)]
    maze: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Random-policy rollouts to trajectories.log.
    Sample,
    /// Capacity map from the logged trajectories.
    Capacity,
    /// Subgoals, region graph and the potential field.
    Subgoals,
    /// Pretrain the encoder and train the subgoal predictor.
    TrainPredictor,
    /// Region accuracy of the saved predictor.
    EvalPredictor,
    /// Tabular Q-learning for one variant.
    Train {
        #[arg(long)]
        variant: Option<Variant>,
    },
    /// Greedy success rate of a saved Q-table.
    Eval {
        #[arg(long)]
        variant: Option<Variant>,
    },
    /// Every variant over the configured seeds.
    Ablate,
    /// Image of one artifact.
    Render {
        #[arg(long, value_enum)]
        kind: RenderKind,
        /// Output file; defaults to a name in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Bound checks, shaping invariance fuzz and gradient checks.
    Verify,
    /// Every stage in order, then the default figures.
    Pipeline,
    /// Print the resolved config.
    ShowConfig,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RenderKind {
    Capacity,
    Regions,
    Potential,
    Curve,
}

fn resolve(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut loaded = match &cli.config {
        Some(path) => load_config(path)?,
        None => parse_config("", std::path::Path::new("."))?,
    };
    for w in &loaded.warnings {
        warn!("{w}");
    }
    let cwd = std::path::Path::new(".");
    let cfg = &mut loaded.config;
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        let k = k.trim();
        cfg.set(k, v.trim(), cwd)?;
        loaded.defaulted.retain(|d| *d != k);
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
        loaded.defaulted.retain(|d| *d != "out_dir");
    }
    if let Some(m) = &cli.maze {
        cfg.maze = Some(m.clone());
        loaded.defaulted.retain(|d| *d != "maze");
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
        loaded.defaulted.retain(|d| *d != "seed");
    }
    cfg.validate()?;
    info!("config: {cfg:?}");
    if !loaded.defaulted.is_empty() {
        info!("defaulted keys: {}", loaded.defaulted.join(", "));
    }
    Ok(loaded.config)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli)?;
    let paths = Paths(cfg.out_dir.clone());
    match cli.command {
        Command::ShowConfig => println!("{cfg:#?}"),
        Command::Verify => {
            let report = verify::run_verify(cfg.seed, cfg.rl.gamma)?;
            print!("{}", report.format());
            if !report.passes() {
                return Err(CliError::CheckFailed);
            }
        }
        Command::EvalPredictor => {
            let acc = stages::eval_predictor_stage(&paths)?;
            println!("region_accuracy {acc}");
            stages::write_file(&paths.0.join("predictor_eval.txt"), format!("region_accuracy {acc}\n"))?;
        }
        Command::Pipeline => stages::pipeline(&cfg)?,
        Command::Render { kind, output } => render(&cfg, &paths, kind, output)?,
        command => {
            let maze = stages::load_maze(&cfg)?;
            with_env!(cfg, maze, |env| match command {
                Command::Sample => {
                    let t = stages::sample(&env, &cfg, &paths)?;
                    println!("transitions {}", t.len());
                }
                Command::Capacity => {
                    let m = stages::capacity(&env, &cfg, &paths)?;
                    println!("bins {} max_capacity {}", m.len(), m.max_capacity());
                }
                Command::Subgoals => {
                    let (set, graph) = stages::subgoals(&env, &cfg, &paths)?;
                    println!("subgoals {} edges {}", set.len(), graph.edges.len());
                }
                Command::TrainPredictor => {
                    let (_, acc) = stages::train_predictor_stage(&env, &cfg, &paths)?;
                    println!("region_accuracy {acc}");
                }
                Command::Train { variant } => {
                    let v = variant.unwrap_or(cfg.variant);
                    let (_, last) = stages::train_stage(&env, &cfg, &paths, v)?;
                    println!("variant {v} final_success {last}");
                }
                Command::Eval { variant } => {
                    let v = variant.unwrap_or(cfg.variant);
                    let rate = stages::eval_stage(&env, &cfg, &paths, v)?;
                    println!("variant {v} success_rate {rate}");
                }
                Command::Ablate => {
                    let r = stages::ablate_stage(&env, &cfg, &paths)?;
                    print!("{}", r.format_summary());
                }
                _ => unreachable!("handled above"),
            })
        }
    }
    Ok(())
}

fn render(cfg: &PipelineConfig, paths: &Paths, kind: RenderKind, output: Option<PathBuf>) -> Result<(), CliError> {
    let scale = cfg.render_scale;
    let (bytes, name): (Vec<u8>, &str) = match kind {
        RenderKind::Curve => {
            let mut curves = Vec::new();
            for v in Variant::ALL {
                let p = paths.curve(v);
                if p.is_file() {
                    curves.push((v.to_string(), crate::rl::parse_curve(&std::fs::read_to_string(p)?)?));
                }
            }
            if curves.is_empty() {
                return Err(CliError::Usage(format!("no curve files in {}", paths.0.display())));
            }
            (render::curves_svg(&curves).into_bytes(), "curves.svg")
        }
        _ => {
            let maze = stages::load_maze(cfg)?;
            match kind {
                RenderKind::Capacity => {
                    stages::need(&paths.capacity(), "capacity")?;
                    let map = read_capacity_map(paths.capacity())?;
                    (render::heatmap(&maze, map.disc, &stages::capacity_values(&map), scale).to_ppm(), "capacity.ppm")
                }
                RenderKind::Regions => {
                    let (set, graph) = stages::read_subgoal_files(paths)?;
                    (render::region_map(&maze, &graph, &set, scale).to_ppm(), "regions.ppm")
                }
                _ => {
                    stages::need(&paths.field(), "subgoals")?;
                    let field = PotentialField::parse(&std::fs::read_to_string(paths.field())?)?;
                    let values = stages::field_values(&field);
                    (render::heatmap(&maze, Discretizer::new(1.0), &values, scale).to_ppm(), "potential.ppm")
                }
            }
        }
    };
    stages::write_file(&output.unwrap_or_else(|| paths.0.join(name)), bytes)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

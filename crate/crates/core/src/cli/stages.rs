use super::config::{EnvKind, PipelineConfig};
use super::render;
use super::CliError;
use crate::capacity::{capacity_map, read_capacity_map, write_capacity_map, CapacityMap, McOptions};
use crate::geometry::{Discretizer, StateKey, Vec2};
use crate::mdpcore::{DiscreteState, GridEnv, MazeEnv, MazeSpec, PointEnv, Spatial};
use crate::predictor::{
    eval_accuracy, init_model, labeled_regions, load_model, pretrain_encoder, save_model, train_predictor, LossWeights,
    ModelConfig, Normalizer, PredictorModel, PretrainConfig, TrainConfig,
};
use crate::rl::{
    evaluate, format_curve, run_ablation, train, AblationConfig, AblationResult, Guidance, QTable, Variant,
};
use crate::sampler::{explore, read_log, TrajectorySet};
use crate::seed::stage_seed;
use crate::shaping::{build_potentials, PotentialField};
use crate::subgoals::{build_subgoal_graph, read_subgoals, select_subgoals, write_subgoals, SubgoalGraph, SubgoalSet};
use log::info;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// File layout of an output directory.
#[derive(Clone, Debug)]
pub struct Paths(pub PathBuf);

impl Paths {
    pub fn trajectories(&self) -> PathBuf {
        self.0.join("trajectories.log")
    }
    pub fn capacity(&self) -> PathBuf {
        self.0.join("capacity.map")
    }
    pub fn subgoals(&self) -> PathBuf {
        self.0.join("subgoals.txt")
    }
    pub fn field(&self) -> PathBuf {
        self.0.join("potential.field")
    }
    pub fn predictor(&self) -> PathBuf {
        self.0.join("predictor.bin")
    }
    pub fn predictor_report(&self) -> PathBuf {
        self.0.join("predictor_report.txt")
    }
    pub fn qtable(&self, v: Variant) -> PathBuf {
        self.0.join(format!("qtable_{v}.txt"))
    }
    pub fn curve(&self, v: Variant) -> PathBuf {
        self.0.join(format!("curve_{v}.txt"))
    }
    pub fn eval(&self, v: Variant) -> PathBuf {
        self.0.join(format!("eval_{v}.txt"))
    }
    pub fn ablation_curve(&self, v: Variant, seed: u64) -> PathBuf {
        self.0.join("ablation").join(format!("curve_{v}_seed{seed}.txt"))
    }
    pub fn ablation_summary(&self) -> PathBuf {
        self.0.join("ablation_summary.txt")
    }
}

pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes)?;
    info!("wrote {}", path.display());
    Ok(())
}

/// Fails with a usage error naming the stage that writes `path`.
pub fn need(path: &Path, stage: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{} not found; run `{stage}` first", path.display())))
    }
}

pub fn load_maze(cfg: &PipelineConfig) -> Result<MazeSpec, CliError> {
    let path = cfg.maze.as_ref().ok_or_else(|| CliError::Config(super::ConfigError::Invalid {
        key: "maze".into(),
        reason: "required by this command".into(),
    }))?;
    Ok(MazeSpec::load(path)?)
}

/// Bin width shared by counting, subgoal regions and the Q-table.
pub fn discretizer(cfg: &PipelineConfig) -> Discretizer {
    match cfg.env {
        EnvKind::Grid => Discretizer::new(1.0),
        EnvKind::Point => Discretizer::new(cfg.bin),
    }
}

/// Goal cell of the exported potential field.
pub fn field_goal(cfg: &PipelineConfig, maze: &MazeSpec) -> Result<DiscreteState, CliError> {
    let goal = match cfg.field_goal {
        Some((r, c)) => DiscreteState::new(r, c),
        None => maze.goal.or_else(|| maze.free_cells().last().copied()).ok_or_else(|| CliError::Usage("maze has no free cell".into()))?,
    };
    if !maze.is_free(goal) {
        return Err(CliError::Config(super::ConfigError::Invalid {
            key: "field_goal".into(),
            reason: format!("({}, {}) is not a free cell", goal.row, goal.col),
        }));
    }
    Ok(goal)
}

/// Runs `body` with the configured environment.
macro_rules! with_env {
    ($cfg:expr, $maze:expr, |$env:ident| $body:expr) => {
        match $cfg.env {
            EnvKind::Grid => {
                let $env = GridEnv::new($maze, $cfg.noise)?;
                $body
            }
            EnvKind::Point => {
                let $env = PointEnv::new($maze, $cfg.step_max, $cfg.bin, $cfg.partition.tau_nei)
                    .with_body_radius($cfg.body_radius);
                $body
            }
        }
    };
}
pub(crate) use with_env;

fn episodes_of<S: Spatial + Copy + PartialEq, A: Copy>(trajs: &TrajectorySet<S, A>) -> Vec<Vec<Vec2>> {
    trajs.episode_states().into_iter().map(|ep| ep.iter().map(Spatial::position).collect()).collect()
}

pub fn sample<E>(env: &E, cfg: &PipelineConfig, paths: &Paths) -> Result<TrajectorySet<E::State, E::Action>, CliError>
where
    E: MazeEnv,
    E::State: Spatial,
{
    let seed = stage_seed(cfg.seed, "sample");
    info!("sample: seed {seed}, {} episodes x {} steps", cfg.sample_episodes, cfg.sample_horizon);
    let trajs = explore(env, cfg.sample_episodes, cfg.sample_horizon, seed, cfg.frontier_rounds, cfg.frontier_episodes)?;
    write_file(&paths.trajectories(), crate::sampler::format_log(&trajs))?;
    Ok(trajs)
}

fn read_trajs<E>(paths: &Paths) -> Result<TrajectorySet<E::State, E::Action>, CliError>
where
    E: MazeEnv,
    E::State: Spatial,
{
    need(&paths.trajectories(), "sample")?;
    Ok(read_log(paths.trajectories())?)
}

pub fn capacity<E>(_env: &E, cfg: &PipelineConfig, paths: &Paths) -> Result<CapacityMap, CliError>
where
    E: MazeEnv,
    E::State: Spatial,
{
    let trajs = read_trajs::<E>(paths)?;
    let mc = McOptions { min_samples: cfg.min_samples, exclude_self: true, ..McOptions::default() };
    info!("capacity: estimator {}, {} transitions", cfg.estimator, trajs.len());
    let map = capacity_map(&trajs, discretizer(cfg), cfg.estimator, mc, &cfg.partition)?;
    write_capacity_map(paths.capacity(), &map)?;
    info!("wrote {}", paths.capacity().display());
    Ok(map)
}

pub fn subgoals<E>(env: &E, cfg: &PipelineConfig, paths: &Paths) -> Result<(SubgoalSet, SubgoalGraph), CliError>
where
    E: MazeEnv,
    E::State: Spatial,
{
    let trajs = read_trajs::<E>(paths)?;
    need(&paths.capacity(), "capacity")?;
    let map = read_capacity_map(paths.capacity())?;
    let set = select_subgoals(&map, cfg.threshold, cfg.suppression_radius, env.achieve_radius().max(cfg.partition.tau_nei))?;
    let graph = build_subgoal_graph(&trajs, &set, env.maze(), discretizer(cfg))?;
    info!("subgoals: {} selected at threshold {}", set.len(), cfg.threshold);
    write_subgoals(paths.subgoals(), &set, Some(&graph))?;
    info!("wrote {}", paths.subgoals().display());
    let goal = field_goal(cfg, env.maze())?;
    let field = build_potentials(env.maze(), &set, &graph, goal)?;
    write_file(&paths.field(), field.format())?;
    Ok((set, graph))
}

pub fn read_subgoal_files(paths: &Paths) -> Result<(SubgoalSet, SubgoalGraph), CliError> {
    need(&paths.subgoals(), "subgoals")?;
    let (set, graph) = read_subgoals(paths.subgoals())?;
    let graph = graph.ok_or_else(|| CliError::Usage(format!("{} has no graph section", paths.subgoals().display())))?;
    Ok((set, graph))
}

pub fn train_predictor_stage<E>(env: &E, cfg: &PipelineConfig, paths: &Paths) -> Result<(PredictorModel, f64), CliError>
where
    E: MazeEnv,
    E::State: Spatial,
{
    let trajs = read_trajs::<E>(paths)?;
    let (set, graph) = read_subgoal_files(paths)?;
    let seed = stage_seed(cfg.seed, "predictor");
    let mcfg = ModelConfig { embed_dim: cfg.embed_dim, hidden: cfg.hidden, layers: cfg.layers, ..ModelConfig::default() };
    let mut model = init_model(mcfg, seed)?;
    model.normalizer = Normalizer::for_maze(env.maze());
    let eps = episodes_of(&trajs);
    let states: Vec<Vec2> = eps.iter().flatten().copied().collect();
    info!("train-predictor: seed {seed}, {} pretraining steps, {} predictor steps", cfg.pretrain_steps, cfg.predictor_steps);
    let pre = PretrainConfig {
        steps: cfg.pretrain_steps,
        lr: cfg.pretrain_lr,
        batch: cfg.pretrain_batch,
        weights: LossWeights { recon: cfg.recon_weight, similarity: cfg.similarity_weight },
        seed,
        ..PretrainConfig::default()
    };
    let pr = pretrain_encoder(&mut model, &states, &set.anchors(), &pre)?;
    let tc = TrainConfig {
        steps: cfg.predictor_steps,
        lr: cfg.predictor_lr,
        batch: cfg.predictor_batch,
        segment_len: cfg.segment_len,
        seed,
    };
    let tr = train_predictor(&mut model, &eps, &set, &tc)?;
    let acc = eval_accuracy(&model, &labeled_regions(&graph))?;
    save_model(paths.predictor(), &model)?;
    info!("wrote {}", paths.predictor().display());
    let tail = |v: &[f64]| {
        let n = v.len().min(100);
        if n == 0 { f64::NAN } else { v[v.len() - n..].iter().sum::<f64>() / n as f64 }
    };
    let report = format!(
        "recon_final {}\nsimilarity_first {}\nsimilarity_final {}\npredictor_loss_final {}\nregion_accuracy {}\n",
        pr.recon.last().copied().unwrap_or(f64::NAN),
        pr.similarity.first().copied().unwrap_or(f64::NAN),
        pr.similarity.last().copied().unwrap_or(f64::NAN),
        tail(&tr.loss),
        acc
    );
    write_file(&paths.predictor_report(), report)?;
    Ok((model, acc))
}

pub fn eval_predictor_stage(paths: &Paths) -> Result<f64, CliError> {
    need(&paths.predictor(), "train-predictor")?;
    let model = load_model(paths.predictor())?;
    let (_, graph) = read_subgoal_files(paths)?;
    let acc = eval_accuracy(&model, &labeled_regions(&graph))?;
    info!("eval-predictor: region accuracy {acc}");
    Ok(acc)
}

fn guidance(maze: &MazeSpec, paths: &Paths, with_model: bool) -> Result<Guidance, CliError> {
    let (set, graph) = read_subgoal_files(paths)?;
    let model = if with_model {
        need(&paths.predictor(), "train-predictor")?;
        Some(load_model(paths.predictor())?)
    } else {
        None
    };
    Ok(Guidance::build(maze, &set, &graph, model.as_ref())?)
}

fn guidance_for(variant: Variant, maze: &MazeSpec, paths: &Paths) -> Result<Option<Guidance>, CliError> {
    Ok(match variant {
        Variant::Gdcc => Some(guidance(maze, paths, true)?),
        Variant::NoPredictor => Some(guidance(maze, paths, false)?),
        Variant::NoReward | Variant::Sparse => None,
    })
}

pub fn train_stage<E>(env: &E, cfg: &PipelineConfig, paths: &Paths, variant: Variant) -> Result<(QTable, f64), CliError>
where
    E: MazeEnv,
    E::State: Spatial,
{
    let g = guidance_for(variant, env.maze(), paths)?;
    let rl = crate::rl::RLConfig { seed: stage_seed(cfg.seed, "rl"), ..cfg.rl.clone() };
    info!("train: variant {variant}, seed {}, {} episodes", rl.seed, rl.episodes);
    let (q, curve) = train(env, &rl, variant, g.as_ref())?;
    write_file(&paths.qtable(variant), q.format())?;
    write_file(&paths.curve(variant), format_curve(&curve))?;
    Ok((q, curve.last().map_or(0.0, |p| p.success)))
}

pub fn eval_stage<E>(env: &E, cfg: &PipelineConfig, paths: &Paths, variant: Variant) -> Result<f64, CliError>
where
    E: MazeEnv,
    E::State: Spatial,
{
    need(&paths.qtable(variant), "train")?;
    let q = QTable::load(paths.qtable(variant))?;
    let seed = stage_seed(cfg.seed, "eval");
    let rate = evaluate(env, &q, cfg.rl.eval_episodes, cfg.rl.horizon, seed)?;
    info!("eval: variant {variant}, seed {seed}, success {rate}");
    write_file(&paths.eval(variant), format!("variant {variant}\nepisodes {}\nsuccess_rate {rate}\n", cfg.rl.eval_episodes))?;
    Ok(rate)
}

pub fn ablate_stage<E>(env: &E, cfg: &PipelineConfig, paths: &Paths) -> Result<AblationResult, CliError>
where
    E: MazeEnv,
    E::State: Spatial,
{
    let (set, graph) = read_subgoal_files(paths)?;
    need(&paths.predictor(), "train-predictor")?;
    let model = load_model(paths.predictor())?;
    let g = Guidance::build(env.maze(), &set, &graph, Some(&model))?;
    let acfg = AblationConfig { rl: cfg.rl.clone(), variants: Variant::ALL.to_vec(), seeds: cfg.ablation_seeds.clone() };
    info!("ablate: seeds {:?}, {} episodes", acfg.seeds, acfg.rl.episodes);
    let res = run_ablation(env, Some(&g), &acfg)?;
    for r in &res.runs {
        write_file(&paths.ablation_curve(r.variant, r.seed), format_curve(&r.curve))?;
    }
    write_file(&paths.ablation_summary(), res.format_summary())?;
    Ok(res)
}

/// Capacity values keyed by bin.
pub fn capacity_values(map: &CapacityMap) -> BTreeMap<StateKey, f64> {
    map.entries.iter().map(|(&k, e)| (k, e.capacity)).collect()
}

/// Potential values keyed by cell.
pub fn field_values(field: &PotentialField) -> BTreeMap<StateKey, f64> {
    (0..field.phi.len())
        .filter_map(|i| field.phi[i].map(|v| (StateKey::new((i % field.width) as i64, (i / field.width) as i64), v)))
        .collect()
}

/// Default figures of a finished pipeline run.
pub fn render_all(cfg: &PipelineConfig, maze: &MazeSpec, paths: &Paths) -> Result<(), CliError> {
    let map = read_capacity_map(paths.capacity())?;
    let disc = map.disc;
    let scale = cfg.render_scale;
    write_file(&paths.0.join("capacity.ppm"), render::heatmap(maze, disc, &capacity_values(&map), scale).to_ppm())?;
    let (set, graph) = read_subgoal_files(paths)?;
    write_file(&paths.0.join("regions.ppm"), render::region_map(maze, &graph, &set, scale).to_ppm())?;
    let field = PotentialField::parse(&std::fs::read_to_string(paths.field())?)?;
    let unit = Discretizer::new(1.0);
    write_file(&paths.0.join("potential.ppm"), render::heatmap(maze, unit, &field_values(&field), scale).to_ppm())?;
    let mut curves = Vec::new();
    for v in Variant::ALL {
        let p = paths.curve(v);
        if p.is_file() {
            curves.push((v.to_string(), crate::rl::parse_curve(&std::fs::read_to_string(p)?)?));
        }
    }
    if !curves.is_empty() {
        write_file(&paths.0.join("curves.svg"), render::curves_svg(&curves))?;
    }
    Ok(())
}

/// Every stage in order, then the default figures.
pub fn pipeline(cfg: &PipelineConfig) -> Result<(), CliError> {
    let maze = load_maze(cfg)?;
    let paths = Paths(cfg.out_dir.clone());
    with_env!(cfg, maze.clone(), |env| {
        sample(&env, cfg, &paths)?;
        capacity(&env, cfg, &paths)?;
        subgoals(&env, cfg, &paths)?;
        train_predictor_stage(&env, cfg, &paths)?;
        for v in Variant::ALL {
            train_stage(&env, cfg, &paths, v)?;
            eval_stage(&env, cfg, &paths, v)?;
        }
        ablate_stage(&env, cfg, &paths)?;
    });
    render_all(cfg, &maze, &paths)
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion, then fails if
//! any criterion failed.

use goal_discovery::capacity::{
    capacity_clustered, capacity_map, capacity_mc, check_propositions, exact_capacity, CapacityMap, CountTable,
    Estimator, McOptions, PartitionConfig,
};
use goal_discovery::cli::stages::{self, Paths};
use goal_discovery::cli::verify::{invariance_fuzz, negative_control, FieldKind};
use goal_discovery::cli::PipelineConfig;
use goal_discovery::mdpcore::{
    random_tabular, ContinuousState, DiscreteState, GridEnv, MazeSpec, PointEnv, Spatial, TabularMDP,
};
use goal_discovery::predictor::gradcheck::run_gradient_checks;
use goal_discovery::predictor::{
    eval_accuracy, init_model, labeled_regions, pretrain_encoder, train_predictor, ModelConfig, Normalizer,
    PretrainConfig, TrainConfig,
};
use goal_discovery::rl::Variant;
use goal_discovery::sampler::{explore, TrajectorySet};
use goal_discovery::seed::stream_rng;
use goal_discovery::shaping::{build_potentials, greedy_descent, naive_potential};
use goal_discovery::subgoals::{build_subgoal_graph, select_subgoals, SubgoalGraph, SubgoalSet};
use goal_discovery::{Discretizer, StateKey, Vec2};
use rand::Rng;
use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

const DEMO: &str = include_str!("../fixtures/demo.maze");
const T_JUNCTION: &str = include_str!("../fixtures/t_junction.maze");
const U_OBSTACLE: &str = include_str!("../fixtures/u_obstacle.maze");

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Samples, counts and selects subgoals on a grid maze at threshold ln 2.5.
fn discover(
    maze: &MazeSpec,
    seed: u64,
) -> (TrajectorySet<DiscreteState, goal_discovery::mdpcore::Move>, CapacityMap, SubgoalSet, SubgoalGraph) {
    let env = GridEnv::new(maze.clone(), 0.0).unwrap();
    let trajs = explore(&env, 400, 200, seed, 0, 0).unwrap();
    let disc = Discretizer::new(1.0);
    let mc = McOptions { exclude_self: true, ..McOptions::default() };
    let cmap = capacity_map(&trajs, disc, Estimator::Mc, mc, &PartitionConfig::default()).unwrap();
    let set = select_subgoals(&cmap, 2.5f64.ln(), 1.0, 0.7).unwrap();
    let graph = build_subgoal_graph(&trajs, &set, maze, disc).unwrap();
    (trajs, cmap, set, graph)
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let mut violations = 0;
    let mut pairs = 0;
    for i in 0..100u64 {
        let mut rng = stream_rng(1000 + i, 0);
        let n = rng.random_range(2..=20);
        let a = rng.random_range(2..=5);
        let b = rng.random_range(1..=n.min(6));
        let mdp = random_tabular(n, a, b, 1000 + i).unwrap();
        let r = check_propositions(&mdp, 1e-9, None);
        violations += r.violations.len();
        pairs += r.checked_pairs;
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        violations == 0 && pairs > 0 && secs < 10.0,
        format!("100 MDPs, {pairs} (s, a) pairs, {violations} violations, {secs:.2}s"),
    )
}

/// Uniform-action successor draws from state `s`.
fn sample_successors(mdp: &TabularMDP, s: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = stream_rng(seed, s as u64);
    (0..n)
        .map(|_| {
            let a = rng.random_range(0..mdp.n_actions());
            mdp.sample_next(s, a, &mut rng)
        })
        .collect()
}

fn criterion_2() -> Outcome {
    let mdp = random_tabular(10, 4, 4, 2024).unwrap();
    let mut max_tv: f64 = 0.0;
    for s in 0..10 {
        let draws = sample_successors(&mdp, s, 100_000, 1);
        let mut freq = [0.0; 10];
        for d in draws {
            freq[d] += 1.0 / 100_000.0;
        }
        let tv = 0.5 * freq.iter().zip(mdp.marginal(s)).map(|(f, p)| (f - p).abs()).sum::<f64>();
        max_tv = max_tv.max(tv);
    }
    let mut table = CountTable::default();
    for s in 0..10 {
        for d in sample_successors(&mdp, s, 10_000, 2) {
            table.add(StateKey::new(s as i64, 0), StateKey::new(d as i64, 0), false);
        }
    }
    let mut max_err: f64 = 0.0;
    for s in 0..10 {
        let est = capacity_mc(&table, StateKey::new(s as i64, 0), McOptions::default()).unwrap();
        max_err = max_err.max((est.capacity - exact_capacity(&mdp, s).unwrap()).abs());
    }
    outcome(
        max_tv <= 0.02 && max_err <= 0.05,
        format!("max TV at 1e5 samples {max_tv:.4}, max |capacity error| at 1e4 visits {max_err:.4} nats"),
    )
}

fn criterion_3() -> Outcome {
    let maze = MazeSpec::parse(DEMO).unwrap();
    let (_, _, set, _) = discover(&maze, 3);
    let junctions: BTreeSet<DiscreteState> =
        maze.free_cells().into_iter().filter(|&c| maze.free_neighbors(c).len() >= 3).collect();
    let selected: BTreeSet<DiscreteState> = set
        .subgoals
        .iter()
        .map(|g| DiscreteState::new(g.anchor.y.floor() as usize, g.anchor.x.floor() as usize))
        .collect();
    let extra = selected.difference(&junctions).count();
    let missing = junctions.difference(&selected).count();
    outcome(
        extra == 0 && missing == 0,
        format!("{} junctions, {} selected, {missing} missing, {extra} non-junction", junctions.len(), selected.len()),
    )
}

fn criterion_4() -> Outcome {
    let maze = MazeSpec::parse(T_JUNCTION).unwrap();
    let env = PointEnv::new(maze, 0.3, 0.7, 0.7);
    let trajs = explore(&env, 400, 200, 4, 0, 0).unwrap();
    let samples: Vec<Vec2> =
        trajs.episode_states().into_iter().flatten().map(|s: ContinuousState| s.position()).collect();
    let cfg = PartitionConfig::default();
    let junction = DiscreteState::new(1, 4).center();
    let dead_end = DiscreteState::new(1, 1).center();
    let (j, _) = capacity_clustered(&samples, junction, &cfg).unwrap();
    let (d, _) = capacity_clustered(&samples, dead_end, &cfg).unwrap();
    outcome(
        (j.capacity - 3f64.ln()).abs() <= 0.1 && d.capacity < 0.1,
        format!(
            "junction {:.4} nats ({} clusters), dead end {:.4} nats ({} clusters), ln 3 = {:.4}",
            j.capacity,
            j.support,
            d.capacity,
            d.support,
            3f64.ln()
        ),
    )
}

fn criterion_5() -> Outcome {
    let grads = run_gradient_checks(5);
    let maze = MazeSpec::parse(DEMO).unwrap();
    let (trajs, _, set, graph) = discover(&maze, 5);
    let episodes: Vec<Vec<Vec2>> =
        trajs.episode_states().into_iter().map(|ep| ep.iter().map(|s| s.center()).collect()).collect();
    let states: Vec<Vec2> = episodes.iter().flatten().copied().collect();
    let mut model = init_model(ModelConfig { hidden: 64, ..ModelConfig::default() }, 5).unwrap();
    model.normalizer = Normalizer::for_maze(&maze);
    let pre = PretrainConfig { steps: 2000, batch: 256, seed: 5, ..PretrainConfig::default() };
    let report = pretrain_encoder(&mut model, &states, &set.anchors(), &pre).unwrap();
    let sim = &report.similarity;
    let rises = sim.windows(2).filter(|w| w[1] > w[0]).count();
    let tc = TrainConfig { steps: 4000, lr: 0.1, seed: 5, ..TrainConfig::default() };
    train_predictor(&mut model, &episodes, &set, &tc).unwrap();
    let acc = eval_accuracy(&model, &labeled_regions(&graph)).unwrap();
    outcome(
        grads.passes(1e-4) && acc > 0.9 && rises == 0,
        format!(
            "worst gradient rel. error {:.2e}, region accuracy {acc:.3}, similarity {:.3} -> {:.3} with {rises} increases over {} steps",
            grads.worst(),
            sim[0],
            sim[sim.len() - 1],
            sim.len()
        ),
    )
}

fn criterion_6() -> Outcome {
    let cases = invariance_fuzz(50, 6, 0.99).unwrap();
    let bad = cases.iter().filter(|c| c.mismatches > 0).count();
    let pipeline = cases.iter().filter(|c| c.kind == FieldKind::Pipeline).count();
    let control = negative_control(0.99).unwrap();

    let maze = MazeSpec::parse(U_OBSTACLE).unwrap();
    let (start, goal) = (maze.start.unwrap(), maze.goal.unwrap());
    let (_, _, set, graph) = discover(&maze, 6);
    let field = build_potentials(&maze, &set, &graph, goal).unwrap();
    let budget = maze.free_cells().len();
    let concat = greedy_descent(&maze, &field, start, budget);
    let naive = greedy_descent(&maze, &naive_potential(&maze, goal).unwrap(), start, budget);
    outcome(
        bad == 0 && control > 0 && concat.reached && !naive.reached,
        format!(
            "{} mazes ({pipeline} pipeline fields), {bad} with greedy mismatches; control flags {control} states; \
             U-obstacle descent: concatenated {} in {} steps, single potential {}",
            cases.len(),
            if concat.reached { "reaches" } else { "stalls" },
            concat.path.len() - 1,
            if naive.reached { "reaches" } else { "stalls" },
        ),
    )
}

fn rl_config(maze: &str, out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig { maze: Some(fixture(maze)), out_dir: out.to_path_buf(), seed: 7, ..Default::default() };
    cfg.rl.episodes = 2000;
    cfg.rl.eval_every = 2000;
    cfg
}

fn criterion_7() -> Outcome {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = rl_config("maze_large.maze", dir.path());
    let maze = stages::load_maze(&cfg).unwrap();
    let env = GridEnv::new(maze, 0.0).unwrap();
    let paths = Paths(cfg.out_dir.clone());
    stages::sample(&env, &cfg, &paths).unwrap();
    stages::capacity(&env, &cfg, &paths).unwrap();
    stages::subgoals(&env, &cfg, &paths).unwrap();
    let (_, acc) = stages::train_predictor_stage(&env, &cfg, &paths).unwrap();
    let res = stages::ablate_stage(&env, &cfg, &paths).unwrap();
    let m = |v| res.mean_final(v).unwrap_or(f64::NAN);
    let (g, np, nr, sp) = (m(Variant::Gdcc), m(Variant::NoPredictor), m(Variant::NoReward), m(Variant::Sparse));
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        g - sp >= 0.25 && g >= np && np >= nr && secs < 1800.0,
        format!(
            "{} seeds x {} episodes: gdcc {g:.3}, no_predictor {np:.3}, no_reward {nr:.3}, sparse {sp:.3}; \
             uplift {:.1} pp; predictor accuracy {acc:.3}; {secs:.0}s",
            cfg.ablation_seeds.len(),
            cfg.rl.episodes,
            100.0 * (g - sp)
        ),
    )
}

fn files_of(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn criterion_8() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mk = |out: &Path| {
        let mut cfg = rl_config("demo.maze", out);
        cfg.rl.episodes = 300;
        cfg.rl.eval_every = 100;
        cfg.pretrain_steps = 300;
        cfg.predictor_steps = 300;
        cfg.ablation_seeds = vec![1, 2];
        cfg
    };
    stages::pipeline(&mk(a.path())).unwrap();
    stages::pipeline(&mk(b.path())).unwrap();
    let (fa, fb) = (files_of(a.path()), files_of(b.path()));
    let differing: Vec<_> = fa
        .iter()
        .filter(|f| std::fs::read(a.path().join(f)).ok() != std::fs::read(b.path().join(f)).ok())
        .collect();
    outcome(
        fa == fb && differing.is_empty() && fa.len() > 20,
        format!("{} files per run, {} differ{}", fa.len(), differing.len(), if fa == fb { "" } else { ", file lists differ" }),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("transfer-entropy bounds on random MDPs", criterion_1),
        ("Monte Carlo convergence", criterion_2),
        ("demo maze subgoals are the junctions", criterion_3),
        ("clustered capacity on the T-junction", criterion_4),
        ("predictor gradients, accuracy and pretraining", criterion_5),
        ("shaping invariance and U-obstacle descent", criterion_6),
        ("end-to-end uplift and ablation ordering", criterion_7),
        ("pipeline determinism", criterion_8),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        println!("{} criterion {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

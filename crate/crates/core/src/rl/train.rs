use super::{QTable, RlError};
use crate::mdpcore::{DiscreteState, MazeEnv, MazeSpec, Spatial, Transition};
use crate::par;
use crate::predictor::PredictorModel;
use crate::seed::{stage_seed, stream_rng};
use crate::shaping::{build_potentials, shaped_reward, PotentialField};
use crate::subgoals::{assign_nearest, SubgoalGraph, SubgoalSet};
use rand::Rng;
use std::fmt;
use std::str::FromStr;

/// Reward variant under comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    /// Gated shaping with the learned predictor.
    Gdcc,
    /// Subgoal machinery present, sparse reward only.
    NoReward,
    /// Gated shaping with the straight-line nearest subgoal as the prediction.
    NoPredictor,
    /// Plain sparse-reward baseline.
    Sparse,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Gdcc, Variant::NoPredictor, Variant::NoReward, Variant::Sparse];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Gdcc => "gdcc",
            Variant::NoReward => "no_reward",
            Variant::NoPredictor => "no_predictor",
            Variant::Sparse => "sparse",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = RlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| RlError::BadConfig(format!("unknown variant `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RLConfig {
    pub gamma: f64,
    /// Base step size.
    pub alpha: f64,
    /// Step size for the n-th update of a pair is `alpha / n^alpha_decay`.
    pub alpha_decay: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of the episodes over which epsilon decays linearly.
    pub eps_decay_frac: f64,
    pub episodes: usize,
    pub horizon: usize,
    /// Evaluate every this many training episodes (and after the last one).
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Shaping scale.
    pub kappa: f64,
    pub seed: u64,
}

impl Default for RLConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            alpha: 0.5,
            alpha_decay: 0.0,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_frac: 0.5,
            episodes: 2000,
            horizon: 600,
            eval_every: 200,
            eval_episodes: 100,
            kappa: 1.0,
            seed: 0,
        }
    }
}

impl RLConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |m: String| Err(RlError::BadConfig(m));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must be in (0, 1), got {}", self.gamma));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must be in (0, 1], got {}", self.alpha));
        }
        if !(self.alpha_decay >= 0.0 && self.alpha_decay <= 1.0) {
            return bad(format!("alpha_decay must be in [0, 1], got {}", self.alpha_decay));
        }
        for (name, v) in [("eps_start", self.eps_start), ("eps_end", self.eps_end), ("eps_decay_frac", self.eps_decay_frac)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.eval_every == 0 {
            return bad("eval_every must be at least 1".into());
        }
        if !self.kappa.is_finite() {
            return bad(format!("kappa must be finite, got {}", self.kappa));
        }
        Ok(())
    }

    /// Linear decay from `eps_start` to `eps_end` over the first
    /// `eps_decay_frac` of the episodes, constant afterwards.
    pub fn epsilon(&self, episode: usize) -> f64 {
        let span = self.eps_decay_frac * self.episodes as f64;
        if span <= 0.0 {
            return self.eps_end;
        }
        let f = (episode as f64 / span).min(1.0);
        self.eps_start + f * (self.eps_end - self.eps_start)
    }

    fn step_size(&self, visits: u64) -> f64 {
        if self.alpha_decay == 0.0 {
            self.alpha
        } else {
            self.alpha / ((visits + 1) as f64).powf(self.alpha_decay)
        }
    }
}

/// Everything the shaped variants need, precomputed per maze cell: the
/// potential field for every goal cell, the planned region of every cell,
/// and the region predicted for it by the model and by the nearest anchor.
#[derive(Clone, Debug)]
pub struct Guidance {
    width: usize,
    fields: Vec<Option<PotentialField>>,
    planned: Vec<Option<usize>>,
    nearest: Vec<Option<usize>>,
    predicted: Option<Vec<Option<usize>>>,
}

impl Guidance {
    /// Builds the field toward every free cell in parallel. Goals whose
    /// field cannot be built get no shaping.
    pub fn build(maze: &MazeSpec, set: &SubgoalSet, graph: &SubgoalGraph, model: Option<&PredictorModel>) -> Result<Self, RlError> {
        let n = maze.width() * maze.height();
        let cells = maze.free_cells();
        let built = par::map_slice(&cells, |&c| build_potentials(maze, set, graph, c).ok());
        let mut fields = vec![None; n];
        let mut planned = vec![None; n];
        let mut nearest = vec![None; n];
        for (&c, f) in cells.iter().zip(built) {
            let i = maze.index(c);
            fields[i] = f;
            planned[i] = graph.region_of(c.center());
            nearest[i] = assign_nearest(c.center(), set).ok();
        }
        let predicted = match model {
            Some(m) => {
                let centers: Vec<_> = cells.iter().map(|c| c.center()).collect();
                let ids = m.predict_batch(&centers).map_err(|e| RlError::BadConfig(e.to_string()))?;
                let mut p = vec![None; n];
                for (&c, id) in cells.iter().zip(ids) {
                    p[maze.index(c)] = Some(id);
                }
                Some(p)
            }
            None => None,
        };
        Ok(Self { width: maze.width(), fields, planned, nearest, predicted })
    }

    /// Replaces the model predictions with the planned regions themselves.
    pub fn with_oracle_predictions(mut self) -> Self {
        self.predicted = Some(self.planned.clone());
        self
    }

    fn idx(&self, c: DiscreteState) -> usize {
        c.row * self.width + c.col
    }

    pub fn field(&self, goal: DiscreteState) -> Option<&PotentialField> {
        self.fields.get(self.idx(goal)).and_then(|f| f.as_ref())
    }

    pub fn planned(&self, c: DiscreteState) -> Option<usize> {
        self.planned.get(self.idx(c)).copied().flatten()
    }

    pub fn has_predictor(&self) -> bool {
        self.predicted.is_some()
    }

    /// Region the variant believes `c` belongs to.
    pub fn predicted(&self, variant: Variant, c: DiscreteState) -> Option<usize> {
        let i = self.idx(c);
        match variant {
            Variant::Gdcc => self.predicted.as_ref().and_then(|p| p.get(i).copied().flatten()),
            Variant::NoPredictor => self.nearest.get(i).copied().flatten(),
            Variant::NoReward | Variant::Sparse => None,
        }
    }

    /// `(predicted, planned)` region of `c` for a transition `c -> c2`, or
    /// `None` when the prediction at the successor is wrong or either side is
    /// unknown. Gating on one endpoint only would leave free two-step loops:
    /// a shaped step from a correct cell into a mispredicted one and an
    /// unshaped step back.
    pub fn gate(&self, variant: Variant, c: DiscreteState, c2: DiscreteState) -> Option<(usize, usize)> {
        let plan2 = self.planned(c2)?;
        if self.predicted(variant, c2)? != plan2 {
            return None;
        }
        Some((self.predicted(variant, c)?, self.planned(c)?))
    }

    /// Fraction of free cells whose prediction equals the planned region.
    pub fn gate_rate(&self, variant: Variant) -> f64 {
        let cells: Vec<usize> = (0..self.planned.len()).filter(|&i| self.planned[i].is_some()).collect();
        if cells.is_empty() {
            return 0.0;
        }
        let open = cells
            .iter()
            .filter(|&&i| {
                let c = DiscreteState::new(i / self.width, i % self.width);
                self.predicted(variant, c) == self.planned[i]
            })
            .count();
        open as f64 / cells.len() as f64
    }
}

/// One evaluation checkpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub episode: usize,
    pub success: f64,
}

pub type Curve = Vec<CurvePoint>;

/// `episode success_rate` per line.
pub fn format_curve(curve: &[CurvePoint]) -> String {
    curve.iter().map(|p| format!("{} {}\n", p.episode, p.success)).collect()
}

pub fn parse_curve(text: &str) -> Result<Curve, RlError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || RlError::Malformed { line: i + 1, reason: "expected `episode success_rate`".into() };
        let (e, s) = line.split_once(char::is_whitespace).ok_or_else(bad)?;
        let episode = e.parse().map_err(|_| bad())?;
        let success: f64 = s.trim().parse().map_err(|_| bad())?;
        if !(0.0..=1.0).contains(&success) {
            return Err(bad());
        }
        out.push(CurvePoint { episode, success });
    }
    Ok(out)
}

fn random_pair<R: Rng>(cells: &[DiscreteState], rng: &mut R) -> (DiscreteState, DiscreteState) {
    let start = cells[rng.random_range(0..cells.len())];
    if cells.len() < 2 {
        return (start, start);
    }
    loop {
        let goal = cells[rng.random_range(0..cells.len())];
        if goal != start {
            return (start, goal);
        }
    }
}

fn epsilon_greedy<R: Rng>(row: &[f64], eps: f64, rng: &mut R) -> usize {
    if rng.random::<f64>() < eps {
        return rng.random_range(0..row.len());
    }
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..row.len()).filter(|&a| row[a] == best).collect();
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

/// Goal-conditioned one-step Q-learning. Each episode draws a uniform random
/// start and a distinct goal cell; `done` on achievement ends the episode and
/// cuts the bootstrap, the horizon only truncates. Shaped variants add the
/// gated shaping term of [`Guidance::gate`]. Episode `i` uses its own
/// random stream, so a run is a pure function of the config.
pub fn train<E>(env: &E, cfg: &RLConfig, variant: Variant, guidance: Option<&Guidance>) -> Result<(QTable, Curve), RlError>
where
    E: MazeEnv,
    E::State: Spatial,
{
    cfg.validate()?;
    let guide = match variant {
        Variant::Gdcc => Some(guidance.filter(|g| g.has_predictor()).ok_or(RlError::MissingDependency(variant))?),
        Variant::NoPredictor => Some(guidance.ok_or(RlError::MissingDependency(variant))?),
        Variant::NoReward | Variant::Sparse => None,
    };
    let actions = env.control_actions();
    let cells = env.maze().free_cells();
    if cells.is_empty() || actions.is_empty() {
        return Err(RlError::BadConfig("maze has no free cells or no actions".into()));
    }
    let mut q = QTable::new(actions.len());
    let mut curve = Vec::new();
    let eval_seed = stage_seed(cfg.seed, "eval");
    for ep in 0..cfg.episodes {
        let mut rng = stream_rng(cfg.seed, ep as u64);
        let (start, goal_cell) = random_pair(&cells, &mut rng);
        let goal = env.state_at(goal_cell);
        let gk = env.key(&goal);
        let field = guide.and_then(|g| g.field(goal_cell));
        let eps = cfg.epsilon(ep);
        let mut s = env.state_at(start);
        for t in 0..cfg.horizon {
            let sk = env.key(&s);
            let a = epsilon_greedy(&q.row(sk, gk), eps, &mut rng);
            let (next, r_env, done) = env.step_to_goal(s, actions[a], &goal, &mut rng)?;
            let mut r = r_env;
            if let (Some(g), Some(field)) = (guide, field) {
                if let Some((pred, plan)) = g.gate(variant, env.cell_of(&s), env.cell_of(&next)) {
                    let tr = Transition { state: s, action: actions[a], next_state: next, reward: r_env, done, episode: ep, t };
                    r = shaped_reward(field, &tr, cfg.gamma, pred, plan, cfg.kappa)
                        .map_err(|e| RlError::BadConfig(e.to_string()))?;
                }
            }
            let nk = env.key(&next);
            let target = if done { r } else { r + cfg.gamma * q.max_value(nk, gk) };
            let alpha = cfg.step_size(q.visits(sk, gk, a));
            q.update(sk, gk, a, target, alpha);
            s = next;
            if done {
                break;
            }
        }
        let n = ep + 1;
        if n % cfg.eval_every == 0 || n == cfg.episodes {
            curve.push(CurvePoint { episode: n, success: evaluate(env, &q, cfg.eval_episodes, cfg.horizon, eval_seed)? });
        }
    }
    Ok((q, curve))
}

/// Success rate of the greedy policy (ties to the lowest action) over
/// `episodes` uniform random start/goal pairs drawn from `seed`.
pub fn evaluate<E>(env: &E, q: &QTable, episodes: usize, horizon: usize, seed: u64) -> Result<f64, RlError>
where
    E: MazeEnv,
    E::State: Spatial,
{
    if episodes == 0 {
        return Ok(0.0);
    }
    let actions = env.control_actions();
    let cells = env.maze().free_cells();
    if cells.is_empty() || actions.len() != q.n_actions() {
        return Err(RlError::BadConfig("table does not match the environment".into()));
    }
    let outcomes = par::map_range(episodes, |i| -> Result<bool, RlError> {
        let mut rng = stream_rng(seed, i as u64);
        let (start, goal_cell) = random_pair(&cells, &mut rng);
        let goal = env.state_at(goal_cell);
        let gk = env.key(&goal);
        let mut s = env.state_at(start);
        for _ in 0..horizon {
            let a = q.greedy(env.key(&s), gk);
            let (next, _, done) = env.step_to_goal(s, actions[a], &goal, &mut rng)?;
            if done {
                return Ok(true);
            }
            s = next;
        }
        Ok(false)
    });
    let mut wins = 0usize;
    for o in outcomes {
        wins += usize::from(o?);
    }
    Ok(wins as f64 / episodes as f64)
}

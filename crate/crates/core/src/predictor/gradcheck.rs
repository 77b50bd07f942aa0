//! Central-difference checks of the hand-written gradients.

use super::train::{predictor_batch, predictor_objective, pretrain_objective, Segment, SegmentTarget};
use super::{init_model, LossWeights, Mlp, MlpGrad, ModelConfig, PredictorModel, Stage};
use crate::geometry::Vec2;
use crate::seed::stream_rng;
use rand::Rng;

const STEP: f64 = 1e-6;

/// Largest relative error per objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientReport {
    pub pretrain_encoder: f64,
    pub pretrain_decoder: f64,
    /// Segment that reaches a subgoal.
    pub predictor_subgoal: f64,
    /// Segment that reaches none and targets its own last state.
    pub predictor_last: f64,
}

impl GradientReport {
    pub fn worst(&self) -> f64 {
        [self.pretrain_encoder, self.pretrain_decoder, self.predictor_subgoal, self.predictor_last]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst() < tol
    }
}

/// Small model with two subgoals. Biases are drawn positive so that no
/// pre-activation sits on a ReLU kink, where differences are meaningless.
pub fn check_model(seed: u64) -> PredictorModel {
    let cfg = ModelConfig { embed_dim: 4, hidden: 6, layers: 2, ..ModelConfig::default() };
    let mut m = init_model(cfg, seed).expect("valid check model config");
    let mut rng = stream_rng(seed.wrapping_add(1), 0);
    for net in [&mut m.encoder, &mut m.decoder, &mut m.predictor] {
        for b in &mut net.biases {
            b.mapv_inplace(|_| rng.random_range(0.05..0.3));
        }
    }
    m.set_subgoals(&[Vec2::new(-0.6, 0.4), Vec2::new(0.5, -0.3)]);
    m.stage = Stage::Pretrained;
    m
}

/// Largest `|fd - analytic| / max(|fd|, |analytic|, 1e-6)` over every
/// parameter of the network selected by `pick`.
pub fn max_relative_error<F, P>(model: &PredictorModel, pick: P, analytic: &MlpGrad, f: F) -> f64
where
    F: Fn(&PredictorModel) -> f64,
    P: Fn(&mut PredictorModel) -> &mut Mlp,
{
    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    let mut compare = |fd: f64, a: f64| worst = worst.max((fd - a).abs() / fd.abs().max(a.abs()).max(1e-6));
    let layers = pick(&mut probe).weights.len();
    for l in 0..layers {
        let (rows, cols) = pick(&mut probe).weights[l].dim();
        for i in 0..rows {
            for j in 0..cols {
                let orig = pick(&mut probe).weights[l][(i, j)];
                pick(&mut probe).weights[l][(i, j)] = orig + STEP;
                let up = f(&probe);
                pick(&mut probe).weights[l][(i, j)] = orig - STEP;
                let down = f(&probe);
                pick(&mut probe).weights[l][(i, j)] = orig;
                compare((up - down) / (2.0 * STEP), analytic.weights[l][(i, j)]);
            }
        }
        for i in 0..pick(&mut probe).biases[l].len() {
            let orig = pick(&mut probe).biases[l][i];
            pick(&mut probe).biases[l][i] = orig + STEP;
            let up = f(&probe);
            pick(&mut probe).biases[l][i] = orig - STEP;
            let down = f(&probe);
            pick(&mut probe).biases[l][i] = orig;
            compare((up - down) / (2.0 * STEP), analytic.biases[l][i]);
        }
    }
    worst
}

fn branch_error(m: &PredictorModel, target: SegmentTarget) -> f64 {
    let seg = Segment { states: vec![Vec2::new(0.1, 0.2), Vec2::new(0.3, -0.1), Vec2::new(-0.5, 0.6)], target };
    // Targets are fixed before differentiating: the self target is a constant.
    let (x, t, w) = predictor_batch(m, std::slice::from_ref(&seg));
    let (_, g) = predictor_objective(m, &x, &t, &w);
    max_relative_error(m, |p| &mut p.predictor, &g, |p| predictor_objective(p, &x, &t, &w).0)
}

/// Checks the pretraining objective (both networks) and both predictor
/// branches on [`check_model`].
pub fn run_gradient_checks(seed: u64) -> GradientReport {
    let m = check_model(seed);
    let states = m.normalizer.matrix(&[Vec2::new(0.2, -0.7), Vec2::new(-0.4, 0.9)]);
    let anchors = m.normalizer.matrix(&m.anchors);
    let w = LossWeights { recon: 1.0, similarity: 0.5 };
    let eval = pretrain_objective(&m, &states, &anchors, w);
    let f = |p: &PredictorModel| pretrain_objective(p, &states, &anchors, w).loss;
    GradientReport {
        pretrain_encoder: max_relative_error(&m, |p| &mut p.encoder, &eval.encoder, f),
        pretrain_decoder: max_relative_error(&m, |p| &mut p.decoder, &eval.decoder, f),
        predictor_subgoal: branch_error(&m, SegmentTarget::Subgoal { id: 1, m: 1 }),
        predictor_last: branch_error(&m, SegmentTarget::Last),
    }
}

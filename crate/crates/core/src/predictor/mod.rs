//! Subgoal prediction model: an encoder/decoder pair pretrained to
//! reconstruct states while pushing subgoal embeddings apart, and a predictor
//! trained on trajectory segments to map each state to the embedding of the
//! subgoal it reaches next. All three are small dense networks trained by
//! plain SGD with hand-written gradients.

mod checkpoint;
pub mod gradcheck;
mod mlp;
mod train;

pub use checkpoint::{decode_model, encode_model, load_model, save_model, MAGIC, VERSION};
pub use mlp::{cosine, cosine_grad, pairwise_similarity, weighted_cosine_loss, Mlp, MlpGrad};
pub use train::{
    build_segments, eval_accuracy, labeled_regions, predictor_batch, predictor_objective, pretrain_encoder,
    pretrain_objective, train_predictor, PretrainConfig, PretrainEval, PretrainReport, Segment, SegmentSampler,
    SegmentTarget, TrainConfig, TrainReport,
};

use crate::geometry::Vec2;
use crate::mdpcore::MazeSpec;
use crate::seed::stream_rng;
use ndarray::Array2;

#[derive(Debug, thiserror::Error)]
pub enum PredictorError {
    #[error("invalid dimensions: {0}")]
    BadDims(String),
    #[error("need at least 2 subgoals, got {0}")]
    TooFewSubgoals(usize),
    #[error("no trajectory segment of length {0}")]
    NoSegments(usize),
    #[error("model has no subgoal table; pretrain it first")]
    Untrained,
    #[error("no labeled states")]
    EmptyLabels,
    #[error("invalid loss weights: {0}")]
    BadWeights(String),
    #[error("predictor must be pretrained before training")]
    NotPretrained,
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub state_dim: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub layers: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { state_dim: 2, embed_dim: 64, hidden: 256, layers: 3 }
    }
}

/// Coefficients of the reconstruction and subgoal-similarity terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub recon: f64,
    pub similarity: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { recon: 1.0, similarity: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), PredictorError> {
        if self.recon < 0.0 || self.similarity < 0.0 || self.recon + self.similarity == 0.0 {
            return Err(PredictorError::BadWeights(format!(
                "need both >= 0 and not both 0, got {} and {}",
                self.recon, self.similarity
            )));
        }
        Ok(())
    }
}

/// Affine map of positions onto `[-1, 1]` per axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalizer {
    pub lo: Vec2,
    pub hi: Vec2,
}

impl Default for Normalizer {
    fn default() -> Self {
        Self { lo: Vec2::new(-1.0, -1.0), hi: Vec2::new(1.0, 1.0) }
    }
}

impl Normalizer {
    pub fn for_maze(maze: &MazeSpec) -> Self {
        Self { lo: Vec2::ZERO, hi: Vec2::new(maze.width() as f64, maze.height() as f64) }
    }

    pub fn apply(&self, p: Vec2) -> [f64; 2] {
        [
            2.0 * (p.x - self.lo.x) / (self.hi.x - self.lo.x) - 1.0,
            2.0 * (p.y - self.lo.y) / (self.hi.y - self.lo.y) - 1.0,
        ]
    }

    pub fn matrix(&self, ps: &[Vec2]) -> Array2<f64> {
        Array2::from_shape_fn((ps.len(), 2), |(i, j)| self.apply(ps[i])[j])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Initialized,
    Pretrained,
    Trained,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorModel {
    pub config: ModelConfig,
    pub normalizer: Normalizer,
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub predictor: Mlp,
    pub anchors: Vec<Vec2>,
    /// Encoder outputs of the anchors, one row per subgoal.
    pub table: Array2<f64>,
    pub stage: Stage,
}

/// Fresh model with `layers` hidden layers of width `hidden` in each network.
/// Positions are two-dimensional, so `state_dim` must be 2.
pub fn init_model(cfg: ModelConfig, seed: u64) -> Result<PredictorModel, PredictorError> {
    if cfg.state_dim != 2 || cfg.embed_dim == 0 || cfg.hidden == 0 || cfg.layers == 0 {
        return Err(PredictorError::BadDims(format!(
            "state_dim {} (must be 2), embed {}, hidden {}, layers {}",
            cfg.state_dim, cfg.embed_dim, cfg.hidden, cfg.layers
        )));
    }
    let sizes = |input: usize, output: usize| {
        let mut s = vec![input];
        s.extend(std::iter::repeat_n(cfg.hidden, cfg.layers));
        s.push(output);
        s
    };
    let encoder = Mlp::new(&sizes(cfg.state_dim, cfg.embed_dim), &mut stream_rng(seed, 0));
    let decoder = Mlp::new(&sizes(cfg.embed_dim, cfg.state_dim), &mut stream_rng(seed, 1));
    let predictor = Mlp::new(&sizes(cfg.state_dim, cfg.embed_dim), &mut stream_rng(seed, 2));
    Ok(PredictorModel {
        config: cfg,
        normalizer: Normalizer::default(),
        encoder,
        decoder,
        predictor,
        anchors: Vec::new(),
        table: Array2::zeros((0, cfg.embed_dim)),
        stage: Stage::Initialized,
    })
}

impl PredictorModel {
    /// Sets the subgoal anchors and recomputes their embeddings.
    pub fn set_subgoals(&mut self, anchors: &[Vec2]) {
        self.anchors = anchors.to_vec();
        self.refresh_table();
    }

    pub fn refresh_table(&mut self) {
        let x = self.normalizer.matrix(&self.anchors);
        self.table = self.encoder.forward(x.view());
    }

    pub fn embed(&self, ps: &[Vec2]) -> Array2<f64> {
        self.encoder.forward(self.normalizer.matrix(ps).view())
    }

    pub fn predict_embedding(&self, ps: &[Vec2]) -> Array2<f64> {
        self.predictor.forward(self.normalizer.matrix(ps).view())
    }

    /// Subgoal whose embedding has the highest cosine with the predictor
    /// output; ties go to the lowest id.
    pub fn predict_subgoal(&self, p: Vec2) -> Result<usize, PredictorError> {
        Ok(self.predict_batch(&[p])?[0])
    }

    pub fn predict_batch(&self, ps: &[Vec2]) -> Result<Vec<usize>, PredictorError> {
        if self.table.nrows() == 0 {
            return Err(PredictorError::Untrained);
        }
        let out = self.predict_embedding(ps);
        Ok(out
            .rows()
            .into_iter()
            .map(|r| {
                let mut best = (f64::NEG_INFINITY, 0);
                for (id, z) in self.table.rows().into_iter().enumerate() {
                    let c = cosine(r, z);
                    if c > best.0 {
                        best = (c, id);
                    }
                }
                best.1
            })
            .collect())
    }
}

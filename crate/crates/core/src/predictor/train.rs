use super::mlp::{pairwise_similarity, weighted_cosine_loss, MlpGrad};
use super::{LossWeights, PredictorError, PredictorModel, Stage};
use crate::geometry::Vec2;
use crate::seed::stream_rng;
use crate::subgoals::{SubgoalGraph, SubgoalSet};
use ndarray::{Array2, Axis};
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PretrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub batch: usize,
    pub weights: LossWeights,
    /// Reconstruction loss the final step should reach.
    pub recon_target: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self { steps: 10_000, lr: 1e-3, batch: 1000, weights: LossWeights::default(), recon_target: 0.01, seed: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PretrainReport {
    /// Mean squared reconstruction error per step.
    pub recon: Vec<f64>,
    /// Mean pairwise cosine similarity of the subgoal embeddings per step.
    pub similarity: Vec<f64>,
    pub reached_target: bool,
}

/// Value and gradients of the pretraining loss
/// `recon * mean ||s - s'||^2 + similarity * mean_{i != j} cos(z_i, z_j)`.
#[derive(Clone, Debug)]
pub struct PretrainEval {
    pub loss: f64,
    pub recon: f64,
    pub similarity: f64,
    pub encoder: MlpGrad,
    pub decoder: MlpGrad,
}

/// `states` and `anchors` are already normalized.
pub fn pretrain_objective(
    model: &PredictorModel,
    states: &Array2<f64>,
    anchors: &Array2<f64>,
    w: LossWeights,
) -> PretrainEval {
    let n = states.nrows() as f64;
    let enc = model.encoder.forward_tape(states.view());
    let dec = model.decoder.forward_tape(enc[enc.len() - 1].view());
    let diff = &dec[dec.len() - 1] - states;
    let recon = diff.mapv(|v| v * v).sum() / n;
    let decoder = model.decoder.backward(&dec, diff * (2.0 * w.recon / n));
    let mut encoder = model.encoder.backward(&enc, decoder.input.clone());

    let enc_g = model.encoder.forward_tape(anchors.view());
    let (similarity, gz) = pairwise_similarity(&enc_g[enc_g.len() - 1]);
    encoder.add(&model.encoder.backward(&enc_g, gz * w.similarity));
    PretrainEval { loss: w.recon * recon + w.similarity * similarity, recon, similarity, encoder, decoder }
}

/// Joint SGD on encoder and decoder over minibatches drawn with replacement
/// from `states`. The subgoal table is refreshed after every step.
pub fn pretrain_encoder(
    model: &mut PredictorModel,
    states: &[Vec2],
    anchors: &[Vec2],
    cfg: &PretrainConfig,
) -> Result<PretrainReport, PredictorError> {
    cfg.weights.validate()?;
    if anchors.len() < 2 {
        return Err(PredictorError::TooFewSubgoals(anchors.len()));
    }
    if states.is_empty() || cfg.batch == 0 {
        return Err(PredictorError::BadDims("empty state sample or zero batch".into()));
    }
    model.set_subgoals(anchors);
    let anchor_x = model.normalizer.matrix(anchors);
    let mut rng = stream_rng(cfg.seed, 3);
    let mut report = PretrainReport::default();
    let mut batch = vec![Vec2::ZERO; cfg.batch];
    for _ in 0..cfg.steps {
        for b in batch.iter_mut() {
            *b = states[rng.random_range(0..states.len())];
        }
        let x = model.normalizer.matrix(&batch);
        let eval = pretrain_objective(model, &x, &anchor_x, cfg.weights);
        report.recon.push(eval.recon);
        report.similarity.push(eval.similarity);
        model.encoder.sgd_step(&eval.encoder, cfg.lr);
        model.decoder.sgd_step(&eval.decoder, cfg.lr);
        model.refresh_table();
    }
    report.reached_target = report.recon.last().is_some_and(|&r| r <= cfg.recon_target);
    if model.stage < Stage::Pretrained {
        model.stage = Stage::Pretrained;
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    /// Segments per minibatch.
    pub batch: usize,
    pub segment_len: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { steps: 10_000, lr: 1e-3, batch: 20, segment_len: 50, seed: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub loss: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegmentTarget {
    /// `states[m]` is the first state achieving subgoal `id`.
    Subgoal { id: usize, m: usize },
    /// No achievement: the prediction at the last state is the target.
    Last,
}

/// A length-T window of one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub states: Vec<Vec2>,
    pub target: SegmentTarget,
}

impl Segment {
    /// States that enter the loss.
    pub fn supervised(&self) -> &[Vec2] {
        match self.target {
            SegmentTarget::Subgoal { m, .. } => &self.states[..=m],
            SegmentTarget::Last => &self.states,
        }
    }
}

/// Every full-length window of every episode, with the first achievement in
/// each window precomputed.
pub struct SegmentSampler<'a> {
    episodes: &'a [Vec<Vec2>],
    starts: Vec<(usize, usize)>,
    next: Vec<Vec<Option<(usize, usize)>>>,
    len: usize,
}

impl<'a> SegmentSampler<'a> {
    pub fn new(episodes: &'a [Vec<Vec2>], set: &SubgoalSet, segment_len: usize) -> Result<Self, PredictorError> {
        if segment_len == 0 {
            return Err(PredictorError::NoSegments(0));
        }
        let mut starts = Vec::new();
        let mut next = Vec::with_capacity(episodes.len());
        for (e, ep) in episodes.iter().enumerate() {
            let mut upcoming = None;
            let mut row = vec![None; ep.len()];
            for t in (0..ep.len()).rev() {
                if let Some(id) = set.achieved_at(ep[t]) {
                    upcoming = Some((t, id));
                }
                row[t] = upcoming;
            }
            next.push(row);
            if ep.len() >= segment_len {
                starts.extend((0..=ep.len() - segment_len).map(|t| (e, t)));
            }
        }
        if starts.is_empty() {
            return Err(PredictorError::NoSegments(segment_len));
        }
        Ok(Self { episodes, starts, next, len: segment_len })
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn segment(&self, i: usize) -> Segment {
        let (e, t) = self.starts[i];
        let states = self.episodes[e][t..t + self.len].to_vec();
        let target = match self.next[e][t] {
            Some((at, id)) if at < t + self.len => SegmentTarget::Subgoal { id, m: at - t },
            _ => SegmentTarget::Last,
        };
        Segment { states, target }
    }
}

/// Convenience wrapper collecting every segment.
pub fn build_segments(
    episodes: &[Vec<Vec2>],
    set: &SubgoalSet,
    segment_len: usize,
) -> Result<Vec<Segment>, PredictorError> {
    let s = SegmentSampler::new(episodes, set, segment_len)?;
    Ok((0..s.len()).map(|i| s.segment(i)).collect())
}

/// Stacks the supervised states of `segments` with their targets and
/// per-row weights `1 / (rows in segment * segments)`. Self targets are
/// evaluated once here and stay constant in the loss.
pub fn predictor_batch(model: &PredictorModel, segments: &[Segment]) -> (Array2<f64>, Array2<f64>, Vec<f64>) {
    let rows: usize = segments.iter().map(|s| s.supervised().len()).sum();
    let dim = model.config.embed_dim;
    let mut states = Vec::with_capacity(rows);
    let mut targets = Array2::zeros((rows, dim));
    let mut weights = Vec::with_capacity(rows);
    let b = segments.len() as f64;
    let mut r = 0;
    for seg in segments {
        let sup = seg.supervised();
        let target = match seg.target {
            SegmentTarget::Subgoal { id, .. } => model.table.row(id).to_owned(),
            SegmentTarget::Last => {
                model.predict_embedding(&seg.states[seg.states.len() - 1..]).index_axis_move(Axis(0), 0)
            }
        };
        for &s in sup {
            states.push(s);
            targets.row_mut(r).assign(&target);
            weights.push(1.0 / (sup.len() as f64 * b));
            r += 1;
        }
    }
    (model.normalizer.matrix(&states), targets, weights)
}

/// `-sum_i w_i cos(rho(x_i), target_i)` and the predictor gradient.
pub fn predictor_objective(
    model: &PredictorModel,
    inputs: &Array2<f64>,
    targets: &Array2<f64>,
    weights: &[f64],
) -> (f64, MlpGrad) {
    let acts = model.predictor.forward_tape(inputs.view());
    let (loss, grad) = weighted_cosine_loss(&acts[acts.len() - 1], targets, weights);
    (loss, model.predictor.backward(&acts, grad))
}

/// SGD on the predictor only; encoder, decoder and subgoal table stay fixed.
pub fn train_predictor(
    model: &mut PredictorModel,
    episodes: &[Vec<Vec2>],
    set: &SubgoalSet,
    cfg: &TrainConfig,
) -> Result<TrainReport, PredictorError> {
    if model.stage < Stage::Pretrained || model.table.nrows() != set.len() {
        return Err(PredictorError::NotPretrained);
    }
    let sampler = SegmentSampler::new(episodes, set, cfg.segment_len)?;
    let mut rng = stream_rng(cfg.seed, 4);
    let mut report = TrainReport::default();
    for _ in 0..cfg.steps {
        let segs: Vec<Segment> =
            (0..cfg.batch.max(1)).map(|_| sampler.segment(rng.random_range(0..sampler.len()))).collect();
        let (x, t, w) = predictor_batch(model, &segs);
        let (loss, g) = predictor_objective(model, &x, &t, &w);
        report.loss.push(loss);
        model.predictor.sgd_step(&g, cfg.lr);
    }
    model.stage = Stage::Trained;
    Ok(report)
}

/// Fraction of states whose predicted subgoal equals the label.
pub fn eval_accuracy(model: &PredictorModel, labeled: &[(Vec2, usize)]) -> Result<f64, PredictorError> {
    if labeled.is_empty() {
        return Err(PredictorError::EmptyLabels);
    }
    let pts: Vec<Vec2> = labeled.iter().map(|l| l.0).collect();
    let pred = model.predict_batch(&pts)?;
    let hits = pred.iter().zip(labeled).filter(|(p, l)| **p == l.1).count();
    Ok(hits as f64 / labeled.len() as f64)
}

/// Region labels of a subgoal graph at bin centers.
pub fn labeled_regions(graph: &SubgoalGraph) -> Vec<(Vec2, usize)> {
    graph.regions.iter().map(|(&k, &id)| (graph.disc.center(k), id)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::gradcheck;
    use crate::subgoals::Subgoal;

    fn tiny() -> PredictorModel {
        gradcheck::check_model(11)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let r = gradcheck::run_gradient_checks(11);
        assert!(r.passes(1e-4), "{r:?}");
    }

    #[test]
    fn single_term_loss_when_first_state_achieves() {
        let m = tiny();
        let seg = Segment { states: vec![m.anchors[0], Vec2::new(0.9, 0.9)], target: SegmentTarget::Subgoal { id: 0, m: 0 } };
        let (x, t, w) = predictor_batch(&m, &[seg]);
        assert_eq!(x.nrows(), 1);
        let (loss, _) = predictor_objective(&m, &x, &t, &w);
        let rho = m.predict_embedding(&[m.anchors[0]]);
        let expected = -crate::predictor::cosine(rho.row(0), m.table.row(0));
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn last_state_term_is_exactly_minus_one_over_t() {
        let m = tiny();
        let states = vec![Vec2::new(0.1, 0.2), Vec2::new(0.3, -0.1), Vec2::new(-0.5, 0.6), Vec2::new(0.7, 0.0)];
        let seg = Segment { states, target: SegmentTarget::Last };
        let (x, t, w) = predictor_batch(&m, &[seg]);
        let (loss_all, _) = predictor_objective(&m, &x, &t, &w);
        let (loss_head, _) = predictor_objective(
            &m,
            &x.slice(ndarray::s![..3, ..]).to_owned(),
            &t.slice(ndarray::s![..3, ..]).to_owned(),
            &w[..3],
        );
        assert!((loss_all - loss_head + 0.25).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&loss_all));
    }

    #[test]
    fn segments_find_first_achievement() {
        let mk = |id, x| Subgoal { id, anchor: Vec2::new(x, 0.5), capacity: 1.1, radius: 0.7 };
        let set = SubgoalSet { subgoals: vec![mk(0, 0.5), mk(1, 4.5)], threshold: 1.0, suppression_radius: 1.0 };
        let ep: Vec<Vec2> = [2.5, 3.5, 4.5, 3.5, 2.5, 1.5, 0.5].iter().map(|&x| Vec2::new(x, 0.5)).collect();
        let segs = build_segments(std::slice::from_ref(&ep), &set, 3).unwrap();
        assert_eq!(segs.len(), 5);
        assert_eq!(segs[0].target, SegmentTarget::Subgoal { id: 1, m: 2 });
        assert_eq!(segs[2].target, SegmentTarget::Subgoal { id: 1, m: 0 });
        assert_eq!(segs[3].target, SegmentTarget::Last);
        assert_eq!(segs[4].target, SegmentTarget::Subgoal { id: 0, m: 2 });
        assert!(matches!(build_segments(&[ep], &set, 8), Err(PredictorError::NoSegments(8))));
    }

    #[test]
    fn autoencoder_loss_decreases_on_fixed_batch() {
        let mut m = tiny();
        let states = m.normalizer.matrix(&[Vec2::new(0.2, -0.7), Vec2::new(-0.4, 0.9), Vec2::new(0.8, 0.1)]);
        let anchors = m.normalizer.matrix(&m.anchors);
        let w = LossWeights { recon: 1.0, similarity: 0.0 };
        let mut prev = f64::INFINITY;
        for _ in 0..100 {
            let e = pretrain_objective(&m, &states, &anchors, w);
            assert!(e.recon < prev);
            prev = e.recon;
            m.encoder.sgd_step(&e.encoder, 1e-3);
            m.decoder.sgd_step(&e.decoder, 1e-3);
        }
    }

    #[test]
    fn similarity_only_drives_two_subgoals_apart() {
        let mut m = tiny();
        let states = vec![Vec2::ZERO];
        let cfg = PretrainConfig {
            steps: 300,
            lr: 0.05,
            batch: 1,
            weights: LossWeights { recon: 0.0, similarity: 1.0 },
            ..PretrainConfig::default()
        };
        let anchors = m.anchors.clone();
        let r = pretrain_encoder(&mut m, &states, &anchors, &cfg).unwrap();
        assert!(r.similarity.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(*r.similarity.last().unwrap() < -0.9);
    }
}

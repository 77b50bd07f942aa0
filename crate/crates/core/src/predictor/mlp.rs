use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

/// Dense feedforward network: ReLU on hidden layers, linear output.
/// `weights[l]` has shape `(in, out)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

/// Gradient of a scalar loss with respect to every parameter and the input.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrad {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub input: Array2<f64>,
}

impl MlpGrad {
    pub fn add(&mut self, other: &MlpGrad) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }
}

impl Mlp {
    /// Layer widths `sizes[0] -> sizes[1] -> ...`, He-uniform weights, zero biases.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in sizes.windows(2) {
            let bound = (6.0 / w[0] as f64).sqrt();
            weights.push(Array2::from_shape_simple_fn((w[0], w[1]), || rng.random_range(-bound..bound)));
            biases.push(Array1::zeros(w[1]));
        }
        Self { weights, biases }
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights[self.weights.len() - 1].ncols()
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let last = self.weights.len() - 1;
        let mut h = x.to_owned();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            h = h.dot(w) + b;
            if l < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        h
    }

    /// Forward pass keeping every layer input; the last entry is the output.
    pub fn forward_tape(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let last = self.weights.len() - 1;
        let mut acts = vec![x.to_owned()];
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut h = acts[l].dot(w) + b;
            if l < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(h);
        }
        acts
    }

    pub fn backward(&self, acts: &[Array2<f64>], grad_out: Array2<f64>) -> MlpGrad {
        let n = self.weights.len();
        let mut gw = vec![Array2::zeros((0, 0)); n];
        let mut gb = vec![Array1::zeros(0); n];
        let mut delta = grad_out;
        for l in (0..n).rev() {
            gw[l] = acts[l].t().dot(&delta);
            gb[l] = delta.sum_axis(Axis(0));
            let mut prev = delta.dot(&self.weights[l].t());
            if l > 0 {
                prev.zip_mut_with(&acts[l], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = prev;
        }
        MlpGrad { weights: gw, biases: gb, input: delta }
    }

    pub fn sgd_step(&mut self, g: &MlpGrad, lr: f64) {
        for (w, gw) in self.weights.iter_mut().zip(&g.weights) {
            w.scaled_add(-lr, gw);
        }
        for (b, gb) in self.biases.iter_mut().zip(&g.biases) {
            b.scaled_add(-lr, gb);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

const NORM_FLOOR: f64 = 1e-12;

pub fn cosine(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let na = a.dot(&a).sqrt().max(NORM_FLOOR);
    let nb = b.dot(&b).sqrt().max(NORM_FLOOR);
    a.dot(&b) / (na * nb)
}

/// `d cos(a, b) / d a`; zero when either vector is (numerically) zero, where
/// the cosine is not differentiable.
pub fn cosine_grad(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na < NORM_FLOOR || nb < NORM_FLOOR {
        return Array1::zeros(a.len());
    }
    let c = a.dot(&b) / (na * nb);
    &b / (na * nb) - &a * (c / (na * na))
}

/// `-sum_i w_i cos(pred_i, target_i)` and its gradient with respect to `pred`.
pub fn weighted_cosine_loss(pred: &Array2<f64>, targets: &Array2<f64>, weights: &[f64]) -> (f64, Array2<f64>) {
    let mut loss = 0.0;
    let mut grad = Array2::zeros(pred.raw_dim());
    for (i, &w) in weights.iter().enumerate() {
        let (p, t) = (pred.row(i), targets.row(i));
        loss -= w * cosine(p, t);
        grad.row_mut(i).assign(&(cosine_grad(p, t) * -w));
    }
    (loss, grad)
}

/// Mean cosine similarity over ordered pairs `i != j` and its gradient.
pub fn pairwise_similarity(z: &Array2<f64>) -> (f64, Array2<f64>) {
    let k = z.nrows();
    let pairs = (k * (k - 1)) as f64;
    let mut total = 0.0;
    let mut grad = Array2::zeros(z.raw_dim());
    for i in 0..k {
        for j in 0..k {
            if i != j {
                total += cosine(z.row(i), z.row(j));
                let g = cosine_grad(z.row(i), z.row(j)) * (2.0 / pairs);
                grad.row_mut(i).scaled_add(1.0, &g);
            }
        }
    }
    (total / pairs, grad)
}

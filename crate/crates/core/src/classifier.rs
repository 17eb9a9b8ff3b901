//! Linear softmax probe trained by deterministic full-batch descent.
//!
//! Features are standardized per column inside the model and parameters
//! start at zero. The ridge penalty is measured on the weights mapped back
//! to centered input coordinates, so an orthogonal change of input basis
//! leaves the optimum unchanged. Two optimizers are available: plain gradient descent and
//! L-BFGS (the default). Both reject any step that would raise the loss and
//! retry it with half the step size, so the recorded loss sequence is
//! non-increasing.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::EmbeddingDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Fixed-direction steepest descent with step halving.
    GradientDescent,
    /// Limited-memory BFGS with a backtracking line search. Reaches the
    /// tolerance in tens of iterations where gradient descent needs
    /// thousands.
    #[default]
    Lbfgs,
}

/// Curvature pairs kept by L-BFGS.
const LBFGS_MEMORY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Step size of gradient descent; also the first step of L-BFGS, taken
    /// before any curvature is known.
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Training stops once an accepted step lowers the loss by less than
    /// this amount.
    pub loss_tolerance: f64,
    /// Ridge penalty λ on the weights (not the biases), applied as
    /// `½·λ·g²·‖W·S⁻¹‖²` where `S` holds the column scales and `g²` is the
    /// mean column variance. For a single column this is `½·λ·w²`. A small
    /// positive value keeps the optimum unique when classes are linearly
    /// separable.
    pub l2_penalty: f64,
    #[serde(default)]
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            max_iterations: 2000,
            loss_tolerance: 1e-8,
            l2_penalty: 1e-4,
            optimizer: Optimizer::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be positive"));
        }
        if self.loss_tolerance.is_nan() || self.loss_tolerance <= 0.0 {
            return Err(Error::invalid("loss tolerance must be positive"));
        }
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return Err(Error::invalid("l2 penalty must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxClassifier {
    /// C×F, acting on standardized features.
    weights: DMatrix<f64>,
    bias: Vec<f64>,
    feature_means: Vec<f64>,
    feature_scales: Vec<f64>,
    iterations_run: usize,
    final_loss: f64,
}

impl SoftmaxClassifier {
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn feature_means(&self) -> &[f64] {
        &self.feature_means
    }

    pub fn feature_scales(&self) -> &[f64] {
        &self.feature_scales
    }

    pub fn iterations_run(&self) -> usize {
        self.iterations_run
    }

    pub fn final_loss(&self) -> f64 {
        self.final_loss
    }

    pub fn n_features(&self) -> usize {
        self.feature_means.len()
    }

    pub fn class_count(&self) -> usize {
        self.bias.len()
    }

    /// A model with all parameters zero and identity standardization.
    pub fn zeros(n_features: usize, class_count: usize) -> Self {
        Self {
            weights: DMatrix::zeros(class_count, n_features),
            bias: vec![0.0; class_count],
            feature_means: vec![0.0; n_features],
            feature_scales: vec![1.0; n_features],
            iterations_run: 0,
            final_loss: (class_count as f64).ln(),
        }
    }

    /// Arg-max class per row; ties go to the smallest class index.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        let f = self.n_features();
        if x.ncols() != f {
            return Err(Error::mismatch(format!(
                "input has {} columns, model expects {f}",
                x.ncols()
            )));
        }
        let c = self.class_count();
        let mut row = vec![0.0; f];
        let mut out = Vec::with_capacity(x.nrows());
        for i in 0..x.nrows() {
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = (x[(i, j)] - self.feature_means[j]) / self.feature_scales[j];
            }
            let mut best = 0;
            let mut best_logit = f64::NEG_INFINITY;
            for class in 0..c {
                let mut z = self.bias[class];
                for (j, v) in row.iter().enumerate() {
                    z += self.weights[(class, j)] * v;
                }
                if z > best_logit {
                    best_logit = z;
                    best = class;
                }
            }
            out.push(best);
        }
        Ok(out)
    }

    /// Fraction of rows whose prediction equals the label.
    pub fn accuracy(&self, data: &EmbeddingDataset) -> Result<f64> {
        let predicted = self.predict(data.embeddings())?;
        let correct = predicted
            .iter()
            .zip(data.labels())
            .filter(|(p, l)| p == l)
            .count();
        Ok(correct as f64 / data.n_rows() as f64)
    }
}

/// Trains a probe on `train`. Fails if the dataset has fewer rows than
/// classes or the loss becomes non-finite.
pub fn train_softmax(train: &EmbeddingDataset, config: &TrainConfig) -> Result<SoftmaxClassifier> {
    fit(train, config, None)
}

/// As [`train_softmax`], also returning the loss after every accepted step
/// (starting with the loss at zero initialization).
pub fn train_softmax_traced(
    train: &EmbeddingDataset,
    config: &TrainConfig,
) -> Result<(SoftmaxClassifier, Vec<f64>)> {
    let mut trace = Vec::new();
    let model = fit(train, config, Some(&mut trace))?;
    Ok((model, trace))
}

/// Trains on `train` and reports accuracy on `test`.
pub fn probe_accuracy(
    train: &EmbeddingDataset,
    test: &EmbeddingDataset,
    config: &TrainConfig,
) -> Result<f64> {
    if train.n_dims() != test.n_dims() {
        return Err(Error::mismatch(format!(
            "train has {} columns, test has {}",
            train.n_dims(),
            test.n_dims()
        )));
    }
    train_softmax(train, config)?.accuracy(test)
}

fn fit(
    train: &EmbeddingDataset,
    config: &TrainConfig,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<SoftmaxClassifier> {
    config.validate()?;
    let n = train.n_rows();
    let f = train.n_dims();
    let c = train.class_count();
    if n < c {
        return Err(Error::invalid(format!(
            "{n} training rows cannot cover {c} classes"
        )));
    }

    let x = train.embeddings();
    let mut means = vec![0.0; f];
    let mut scales = vec![1.0; f];
    let mut total_variance = 0.0;
    for j in 0..f {
        let col = x.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        means[j] = mean;
        total_variance += var;
        // Constant columns (up to rounding in the mean) keep unit scale.
        // Non-finite statistics are kept so the loss check below rejects them.
        if !std.is_finite() || std > 1e-12 * mean.abs().max(1.0) {
            scales[j] = std;
        }
    }
    let mut features = vec![0.0; n * f];
    for i in 0..n {
        for j in 0..f {
            features[i * f + j] = (x[(i, j)] - means[j]) / scales[j];
        }
    }
    let mean_variance = total_variance / f as f64;
    let penalty: Vec<f64> = scales
        .iter()
        .map(|s| {
            if mean_variance > 0.0 && mean_variance.is_finite() {
                config.l2_penalty * mean_variance / (s * s)
            } else {
                config.l2_penalty
            }
        })
        .collect();
    let problem = Objective {
        features: &features,
        labels: train.labels(),
        n_features: f,
        class_count: c,
        penalty: &penalty,
    };

    let n_params = c * f + c;
    let mut params = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let mut loss = problem.evaluate(&params, &mut grad);
    if !loss.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite initial loss on {}",
            train.name()
        )));
    }
    if let Some(t) = trace.as_deref_mut() {
        t.push(loss);
    }

    let mut state = Descent {
        problem: &problem,
        candidate: vec![0.0; n_params],
        candidate_grad: vec![0.0; n_params],
    };
    let mut memory: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut lr = config.learning_rate;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let step = match config.optimizer {
            Optimizer::GradientDescent => {
                let direction: Vec<f64> = grad.iter().map(|g| -g).collect();
                let accepted = state.halving_search(&params, &direction, loss, &mut lr, 0.0);
                if accepted.is_none() {
                    break;
                }
                accepted
            }
            Optimizer::Lbfgs => {
                let direction = lbfgs_direction(&grad, &memory);
                let slope: f64 = direction.iter().zip(&grad).map(|(d, g)| d * g).sum();
                let mut t = if memory.is_empty() {
                    config.learning_rate
                } else {
                    1.0
                };
                let mut accepted = None;
                if slope < 0.0 {
                    accepted =
                        state.halving_search(&params, &direction, loss, &mut t, 1e-4 * slope);
                }
                if accepted.is_none() {
                    // Curvature model failed; restart from steepest descent.
                    memory.clear();
                    let steepest: Vec<f64> = grad.iter().map(|g| -g).collect();
                    let slope: f64 = -grad.iter().map(|g| g * g).sum::<f64>();
                    let mut t = config.learning_rate;
                    accepted = state.halving_search(&params, &steepest, loss, &mut t, 1e-4 * slope);
                }
                accepted
            }
        };
        let Some(new_loss) = step else { break };

        if config.optimizer == Optimizer::Lbfgs {
            let s: Vec<f64> = state
                .candidate
                .iter()
                .zip(&params)
                .map(|(a, b)| a - b)
                .collect();
            let y: Vec<f64> = state
                .candidate_grad
                .iter()
                .zip(&grad)
                .map(|(a, b)| a - b)
                .collect();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            if sy > 1e-12 {
                if memory.len() == LBFGS_MEMORY {
                    memory.remove(0);
                }
                memory.push((s, y, 1.0 / sy));
            }
        }
        let decrease = loss - new_loss;
        std::mem::swap(&mut params, &mut state.candidate);
        std::mem::swap(&mut grad, &mut state.candidate_grad);
        loss = new_loss;
        if let Some(t) = trace.as_deref_mut() {
            t.push(loss);
        }
        if decrease < config.loss_tolerance {
            break;
        }
    }
    if !loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numerical(format!(
            "training diverged on {}",
            train.name()
        )));
    }

    let weights = DMatrix::from_row_slice(c, f, &params[..c * f]);
    Ok(SoftmaxClassifier {
        weights,
        bias: params[c * f..].to_vec(),
        feature_means: means,
        feature_scales: scales,
        iterations_run: iterations,
        final_loss: loss,
    })
}

/// Mean cross-entropy of a softmax probe plus `½·Σᵢⱼ penalty[j]·W[i,j]²`,
/// with its gradient.
///
/// `features` is N×F, `weights` C×F and `penalty` has one entry per
/// feature; the gradient is returned in the same shapes as the parameters.
pub fn loss_and_gradient(
    features: &DMatrix<f64>,
    labels: &[usize],
    class_count: usize,
    weights: &DMatrix<f64>,
    bias: &[f64],
    penalty: &[f64],
) -> Result<(f64, DMatrix<f64>, Vec<f64>)> {
    let (n, f) = features.shape();
    if labels.len() != n
        || weights.shape() != (class_count, f)
        || bias.len() != class_count
        || penalty.len() != f
    {
        return Err(Error::mismatch("objective inputs have inconsistent shapes"));
    }
    let mut flat = vec![0.0; n * f];
    for i in 0..n {
        for j in 0..f {
            flat[i * f + j] = features[(i, j)];
        }
    }
    let mut params: Vec<f64> = Vec::with_capacity(class_count * (f + 1));
    for class in 0..class_count {
        params.extend(weights.row(class).iter());
    }
    params.extend_from_slice(bias);
    let mut grad = vec![0.0; params.len()];
    let objective = Objective {
        features: &flat,
        labels,
        n_features: f,
        class_count,
        penalty,
    };
    let loss = objective.evaluate(&params, &mut grad);
    let grad_w = DMatrix::from_row_slice(class_count, f, &grad[..class_count * f]);
    Ok((loss, grad_w, grad[class_count * f..].to_vec()))
}

/// Scratch buffers for trial steps.
struct Descent<'a> {
    problem: &'a Objective<'a>,
    candidate: Vec<f64>,
    candidate_grad: Vec<f64>,
}

impl Descent<'_> {
    /// Tries `params + t·direction`, halving `t` until the loss drops below
    /// `loss + t·required_slope`. On success the trial point and its
    /// gradient are left in the scratch buffers.
    fn halving_search(
        &mut self,
        params: &[f64],
        direction: &[f64],
        loss: f64,
        t: &mut f64,
        required_slope: f64,
    ) -> Option<f64> {
        for _ in 0..60 {
            for ((c, p), d) in self.candidate.iter_mut().zip(params).zip(direction) {
                *c = p + *t * d;
            }
            let trial = self
                .problem
                .evaluate(&self.candidate, &mut self.candidate_grad);
            if trial <= loss + *t * required_slope {
                return Some(trial);
            }
            *t *= 0.5;
        }
        None
    }
}

/// Two-loop recursion: approximate inverse-Hessian times negative gradient.
fn lbfgs_direction(grad: &[f64], memory: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let mut alphas = vec![0.0; memory.len()];
    for (i, (s, y, rho)) in memory.iter().enumerate().rev() {
        let alpha = rho * dot(s, &q);
        alphas[i] = alpha;
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= alpha * yi;
        }
    }
    if let Some((s, y, _)) = memory.last() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for (i, (s, y, rho)) in memory.iter().enumerate() {
        let beta = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (alphas[i] - beta) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Objective<'a> {
    /// Row-major N×F.
    features: &'a [f64],
    labels: &'a [usize],
    n_features: usize,
    class_count: usize,
    /// Ridge weight per feature.
    penalty: &'a [f64],
}

impl Objective<'_> {
    /// Parameters are laid out as C×F weights (row-major) followed by C
    /// biases. Writes the gradient into `grad` and returns the loss.
    fn evaluate(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let f = self.n_features;
        let c = self.class_count;
        let (weights, bias) = params.split_at(c * f);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (grad_w, grad_b) = grad.split_at_mut(c * f);
        let mut logits = vec![0.0; c];
        let mut total = 0.0;
        for (row, &label) in self.features.chunks_exact(f.max(1)).zip(self.labels) {
            let row = &row[..f];
            let mut max = f64::NEG_INFINITY;
            for (class, z) in logits.iter_mut().enumerate() {
                let w = &weights[class * f..(class + 1) * f];
                *z = bias[class] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
                max = max.max(*z);
            }
            let mut sum = 0.0;
            for z in logits.iter_mut() {
                *z = (*z - max).exp();
                sum += *z;
            }
            total += max + sum.ln() - (max + logits[label].ln());
            for (class, e) in logits.iter().enumerate() {
                let mut delta = e / sum;
                if class == label {
                    delta -= 1.0;
                }
                grad_b[class] += delta;
                let gw = &mut grad_w[class * f..(class + 1) * f];
                for (g, x) in gw.iter_mut().zip(row) {
                    *g += delta * x;
                }
            }
        }
        let n = self.labels.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        let mut loss = total / n;
        let (grad_w, _) = grad.split_at_mut(c * f);
        let mut ridge = 0.0;
        for (class_grad, class_weights) in grad_w
            .chunks_exact_mut(f.max(1))
            .zip(weights.chunks_exact(f.max(1)))
        {
            for ((g, w), lambda) in class_grad.iter_mut().zip(class_weights).zip(self.penalty) {
                *g += lambda * w;
                ridge += lambda * w * w;
            }
        }
        loss += 0.5 * ridge;
        loss
    }
}

//! Two-layer classifier with a rectified hidden layer and a linear softmax
//! head, trained with SGD + momentum under a cosine schedule.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::datagen::LabeledDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::rng_from_seed;

/// Quantity whose gradient with respect to the hidden features is tracked
/// for VOG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientSignal {
    /// Softmax probability of the label, `p_y`.
    Probability,
    /// Log-probability of the label, `log p_y`.
    #[default]
    LogProbability,
}

impl GradientSignal {
    pub fn as_str(self) -> &'static str {
        match self {
            GradientSignal::Probability => "probability",
            GradientSignal::LogProbability => "log_probability",
        }
    }
}

/// Parameter tensors of a [`Model`]; also used for gradients and momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    /// Hidden weights, `hidden x input`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Head weights, `classes x hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Parameters {
    pub fn zeros(input_dim: usize, hidden_dim: usize, class_count: usize) -> Self {
        Parameters {
            w1: vec![0.0; hidden_dim * input_dim],
            b1: vec![0.0; hidden_dim],
            w2: vec![0.0; class_count * hidden_dim],
            b2: vec![0.0; class_count],
        }
    }

    pub fn slices(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn len(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    input_dim: usize,
    hidden_dim: usize,
    class_count: usize,
    pub params: Parameters,
}

/// Result of a forward pass over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    /// Post-activation hidden features, `batch x hidden`.
    pub features: Matrix,
    pub logits: Matrix,
    pub probabilities: Matrix,
    /// Cross-entropy per row; present when labels were supplied.
    pub per_sample_loss: Option<Vec<f64>>,
}

/// Bound of the uniform initializer for the hidden layer (He uniform).
pub fn hidden_init_bound(input_dim: usize) -> f64 {
    libm::sqrt(6.0 / input_dim as f64)
}

/// Bound of the uniform initializer for the head.
pub fn head_init_bound(hidden_dim: usize) -> f64 {
    libm::sqrt(1.0 / hidden_dim as f64)
}

impl Model {
    /// Uniform fan-in initialization, zero biases.
    pub fn init(input_dim: usize, hidden_dim: usize, class_count: usize, seed: u64) -> Result<Self> {
        for (name, v) in [("input_dim", input_dim), ("hidden_dim", hidden_dim), ("class_count", class_count)] {
            if v == 0 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        let mut rng = rng_from_seed(seed);
        let mut params = Parameters::zeros(input_dim, hidden_dim, class_count);
        let b1 = hidden_init_bound(input_dim);
        for w in &mut params.w1 {
            *w = rng.random_range(-b1..b1);
        }
        let b2 = head_init_bound(hidden_dim);
        for w in &mut params.w2 {
            *w = rng.random_range(-b2..b2);
        }
        Ok(Model {
            input_dim,
            hidden_dim,
            class_count,
            params,
        })
    }

    /// Model with explicit parameters. Shapes must match the dimensions.
    pub fn from_parameters(
        input_dim: usize,
        hidden_dim: usize,
        class_count: usize,
        params: Parameters,
    ) -> Result<Self> {
        let expected = Parameters::zeros(input_dim, hidden_dim, class_count);
        for (what, (have, want)) in ["w1", "b1", "w2", "b2"]
            .into_iter()
            .zip(params.slices().iter().zip(expected.slices()))
        {
            if have.len() != want.len() {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: want.len(),
                    found: have.len(),
                });
            }
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("model parameters"));
        }
        Ok(Model {
            input_dim,
            hidden_dim,
            class_count,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                what: "input features",
                expected: self.input_dim,
                found: x.cols(),
            });
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("input features"));
        }
        Ok(())
    }

    fn check_labels(&self, labels: &[usize], rows: usize) -> Result<()> {
        if labels.len() != rows {
            return Err(Error::DimensionMismatch {
                what: "labels",
                expected: rows,
                found: labels.len(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&y| y >= self.class_count) {
            return Err(Error::LabelOutOfRange {
                label,
                class_count: self.class_count,
            });
        }
        Ok(())
    }

    /// Hidden pre-activations and activations plus logits for one row.
    fn forward_row(&self, x: &[f64], pre: &mut [f64], hidden: &mut [f64], logits: &mut [f64]) {
        let p = &self.params;
        for h in 0..self.hidden_dim {
            let w = &p.w1[h * self.input_dim..(h + 1) * self.input_dim];
            let z = p.b1[h] + dot(w, x);
            pre[h] = z;
            hidden[h] = if z > 0.0 { z } else { 0.0 };
        }
        self.head(hidden, logits);
    }

    fn head(&self, hidden: &[f64], logits: &mut [f64]) {
        let p = &self.params;
        for c in 0..self.class_count {
            let w = &p.w2[c * self.hidden_dim..(c + 1) * self.hidden_dim];
            logits[c] = p.b2[c] + dot(w, hidden);
        }
    }

    pub fn forward(&self, x: &Matrix, labels: Option<&[usize]>) -> Result<BatchOutput> {
        self.check_input(x)?;
        if let Some(labels) = labels {
            self.check_labels(labels, x.rows())?;
        }
        let n = x.rows();
        let mut features = Matrix::zeros(n, self.hidden_dim);
        let mut logits = Matrix::zeros(n, self.class_count);
        let mut probabilities = Matrix::zeros(n, self.class_count);
        let mut pre = vec![0.0; self.hidden_dim];
        for i in 0..n {
            self.forward_row(x.row(i), &mut pre, features.row_mut(i), logits.row_mut(i));
            softmax_into(logits.row(i), probabilities.row_mut(i));
        }
        let per_sample_loss = labels.map(|labels| {
            (0..n)
                .map(|i| cross_entropy(logits.row(i), labels[i]))
                .collect()
        });
        Ok(BatchOutput {
            features,
            logits,
            probabilities,
            per_sample_loss,
        })
    }

    /// Hidden-layer features for every row of `x`.
    pub fn hidden_features(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.forward(x, None)?.features)
    }

    /// Per-sample cross-entropy against `labels`.
    pub fn losses(&self, x: &Matrix, labels: &[usize]) -> Result<Vec<f64>> {
        Ok(self.forward(x, Some(labels))?.per_sample_loss.unwrap_or_default())
    }

    /// Argmax predictions, ties to the smaller class id.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let out = self.forward(x, None)?;
        Ok(out.logits.iter_rows().map(argmax).collect())
    }

    /// Gradient of the mean cross-entropy over the `selected` rows of `x`.
    /// Rows outside `selected` are never read.
    pub fn loss_gradients(&self, x: &Matrix, labels: &[usize], selected: &[usize]) -> Result<(Parameters, f64)> {
        if selected.is_empty() {
            return Err(Error::EmptySelection);
        }
        if x.cols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                what: "input features",
                expected: self.input_dim,
                found: x.cols(),
            });
        }
        if labels.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                what: "labels",
                expected: x.rows(),
                found: labels.len(),
            });
        }
        let (f, hd, cc) = (self.input_dim, self.hidden_dim, self.class_count);
        let mut grads = Parameters::zeros(f, hd, cc);
        let mut pre = vec![0.0; hd];
        let mut hidden = vec![0.0; hd];
        let mut logits = vec![0.0; cc];
        let mut delta = vec![0.0; cc];
        let mut dhidden = vec![0.0; hd];
        let scale = 1.0 / selected.len() as f64;
        let mut total_loss = 0.0;

        for &i in selected {
            if i >= x.rows() {
                return Err(Error::invalid("selected", "index outside the batch"));
            }
            let (row, y) = (x.row(i), labels[i]);
            if y >= cc {
                return Err(Error::LabelOutOfRange { label: y, class_count: cc });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("input features"));
            }
            self.forward_row(row, &mut pre, &mut hidden, &mut logits);
            total_loss += cross_entropy(&logits, y);
            softmax_into(&logits, &mut delta);
            delta[y] -= 1.0;
            for d in &mut delta {
                *d *= scale;
            }
            dhidden.iter_mut().for_each(|v| *v = 0.0);
            for c in 0..cc {
                let dc = delta[c];
                grads.b2[c] += dc;
                let w = &self.params.w2[c * hd..(c + 1) * hd];
                let g = &mut grads.w2[c * hd..(c + 1) * hd];
                for h in 0..hd {
                    g[h] += dc * hidden[h];
                    dhidden[h] += dc * w[h];
                }
            }
            for h in 0..hd {
                if pre[h] <= 0.0 {
                    continue;
                }
                let dh = dhidden[h];
                grads.b1[h] += dh;
                let g = &mut grads.w1[h * f..(h + 1) * f];
                for (gv, &xv) in g.iter_mut().zip(row) {
                    *gv += dh * xv;
                }
            }
        }
        Ok((grads, total_loss * scale))
    }

    /// Gradient of the labeled-class softmax probability with respect to the
    /// post-activation hidden features: `p_y * (e_y - p)^T W2`.
    pub fn feature_gradient(&self, x: &[f64], y: usize) -> Result<Vec<f64>> {
        let probs = self.row_probabilities(x, y)?;
        Ok(self.softmax_feature_gradient(&probs, y))
    }

    fn row_probabilities(&self, x: &[f64], y: usize) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                what: "input features",
                expected: self.input_dim,
                found: x.len(),
            });
        }
        if y >= self.class_count {
            return Err(Error::LabelOutOfRange {
                label: y,
                class_count: self.class_count,
            });
        }
        let hd = self.hidden_dim;
        let mut pre = vec![0.0; hd];
        let mut hidden = vec![0.0; hd];
        let mut logits = vec![0.0; self.class_count];
        self.forward_row(x, &mut pre, &mut hidden, &mut logits);
        let mut probs = vec![0.0; self.class_count];
        softmax_into(&logits, &mut probs);
        Ok(probs)
    }

    fn softmax_feature_gradient(&self, probs: &[f64], y: usize) -> Vec<f64> {
        let hd = self.hidden_dim;
        let py = probs[y];
        let mut grad = vec![0.0; hd];
        for (c, &pc) in probs.iter().enumerate() {
            let coeff = py * (if c == y { 1.0 } else { 0.0 } - pc);
            if coeff == 0.0 {
                continue;
            }
            let w = &self.params.w2[c * hd..(c + 1) * hd];
            for (g, &wv) in grad.iter_mut().zip(w) {
                *g += coeff * wv;
            }
        }
        grad
    }

    /// Gradient of the log-probability of `y` with respect to the hidden
    /// features: `(e_y - p)^T W2`.
    pub fn feature_log_gradient(&self, x: &[f64], y: usize) -> Result<Vec<f64>> {
        let probs = self.row_probabilities(x, y)?;
        Ok(self.log_feature_gradient(&probs, y))
    }

    fn log_feature_gradient(&self, probs: &[f64], y: usize) -> Vec<f64> {
        let hd = self.hidden_dim;
        let mut grad = vec![0.0; hd];
        for (c, &pc) in probs.iter().enumerate() {
            let coeff = if c == y { 1.0 } else { 0.0 } - pc;
            let w = &self.params.w2[c * hd..(c + 1) * hd];
            for (g, &wv) in grad.iter_mut().zip(w) {
                *g += coeff * wv;
            }
        }
        grad
    }

    /// Feature gradients of the chosen `signal` for every row of `x`.
    pub fn feature_gradients(
        &self,
        x: &Matrix,
        labels: &[usize],
        signal: GradientSignal,
    ) -> Result<Vec<Vec<f64>>> {
        let out = self.forward(x, Some(labels))?;
        Ok(out
            .probabilities
            .iter_rows()
            .zip(labels)
            .map(|(p, &y)| match signal {
                GradientSignal::Probability => self.softmax_feature_gradient(p, y),
                GradientSignal::LogProbability => self.log_feature_gradient(p, y),
            })
            .collect())
    }

    /// Softmax of the head applied directly to hidden features `h`.
    pub fn head_probabilities(&self, hidden: &[f64]) -> Vec<f64> {
        let mut logits = vec![0.0; self.class_count];
        self.head(hidden, &mut logits);
        let mut probs = vec![0.0; self.class_count];
        softmax_into(&logits, &mut probs);
        probs
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax (max subtraction).
pub fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = libm::exp(z - max);
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// `logsumexp(z) - z_y`, natural log.
pub fn cross_entropy(logits: &[f64], y: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| libm::exp(z - max)).sum();
    let loss = max + libm::log(sum) - logits[y];
    loss.max(0.0)
}

/// Cosine-annealed learning rate `lr0 * (1 + cos(pi * epoch / total)) / 2`.
pub fn cosine_lr(epoch: usize, total_epochs: usize, lr0: f64) -> Result<f64> {
    if total_epochs == 0 {
        return Err(Error::invalid("total_epochs", "must be at least 1"));
    }
    if epoch > total_epochs {
        return Err(Error::invalid("epoch", "must not exceed total_epochs"));
    }
    let phase = core::f64::consts::PI * epoch as f64 / total_epochs as f64;
    Ok(lr0 * (1.0 + libm::cos(phase)) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Constant,
    Cosine { total_epochs: usize },
}

/// SGD with heavy-ball momentum and weight decay folded into the gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub schedule: LrSchedule,
    epoch: usize,
    velocity: Option<Parameters>,
}

impl Sgd {
    pub fn new(lr0: f64, momentum: f64, weight_decay: f64, schedule: LrSchedule) -> Result<Self> {
        if !(lr0 >= 0.0 && lr0.is_finite()) {
            return Err(Error::invalid("lr0", "learning rate must be non-negative"));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::invalid("momentum", "must lie in [0, 1)"));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(Error::invalid("weight_decay", "must be non-negative"));
        }
        if let LrSchedule::Cosine { total_epochs: 0 } = schedule {
            return Err(Error::invalid("total_epochs", "must be at least 1"));
        }
        Ok(Sgd {
            lr0,
            momentum,
            weight_decay,
            schedule,
            epoch: 0,
            velocity: None,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn set_epoch(&mut self, epoch: usize) {
        self.epoch = epoch;
    }

    pub fn learning_rate(&self) -> f64 {
        match self.schedule {
            LrSchedule::Constant => self.lr0,
            LrSchedule::Cosine { total_epochs } => {
                cosine_lr(self.epoch.min(total_epochs), total_epochs, self.lr0).unwrap_or(0.0)
            }
        }
    }

    pub fn velocity(&self) -> Option<&Parameters> {
        self.velocity.as_ref()
    }

    /// Applies one update with gradient `grads` (before weight decay).
    pub fn step(&mut self, model: &mut Model, grads: &Parameters) -> Result<()> {
        let lr = self.learning_rate();
        let velocity = self
            .velocity
            .get_or_insert_with(|| Parameters::zeros(model.input_dim, model.hidden_dim, model.class_count));
        let (momentum, decay) = (self.momentum, self.weight_decay);
        for ((w, g), v) in model
            .params
            .slices_mut()
            .into_iter()
            .zip(grads.slices())
            .zip(velocity.slices_mut())
        {
            for ((wi, &gi), vi) in w.iter_mut().zip(g).zip(v.iter_mut()) {
                let d = gi + decay * *wi;
                *vi = momentum * *vi + d;
                *wi -= lr * *vi;
            }
        }
        if !model.params.is_finite() {
            return Err(Error::NonFinite("model parameters after update"));
        }
        Ok(())
    }
}

/// Gradient of the mean loss over `selected` followed by one optimizer step.
/// Returns the mean loss before the update.
pub fn backward_step(
    model: &mut Model,
    x: &Matrix,
    labels: &[usize],
    selected: &[usize],
    opt: &mut Sgd,
) -> Result<f64> {
    let (grads, loss) = model.loss_gradients(x, labels, selected)?;
    opt.step(model, &grads)?;
    Ok(loss)
}

/// Predicted class for every sample of `dataset`.
pub fn evaluate(model: &Model, dataset: &LabeledDataset) -> Result<Vec<usize>> {
    model.predict(dataset.features())
}

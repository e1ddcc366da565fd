//! Backprop baseline: ReLU MLP with a linear head, softmax cross-entropy.
//!
//! With `h₀ = x`, `zₗ = hₗ₋₁ Wₗᵀ + bₗ`, `hₗ = ReLU(zₗ)` and logits `z_L`,
//! the mean loss over a batch of `n` gives
//!
//! ```text
//! δ_L = (softmax(z_L) − onehot(y)) / n
//! ∂W_l = δ_lᵀ h_{l−1},   ∂b_l = Σ_rows δ_l
//! δ_{l−1} = (δ_l W_l) ⊙ 1[z_{l−1} > 0]
//! ```
//!
//! The inputs are raw pixels; no labeling or length normalization.

use std::time::Instant;

use log::info;

use super::{check_datasets, epoch_batch, should_evaluate, Checkpoint, MetricsRecord, Model, TrainConfig, TrainOutcome};
use super::{STREAM_AUGMENT, STREAM_INIT, STREAM_SHUFFLE};
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::inference;
use crate::labeling::ImageShape;
use crate::layer::LayerState;
use crate::numerics::{adam_step, matmul, matmul_at, matmul_bt, AdamConfig, Matrix, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// Hidden layers followed by the output head.
    pub layers: Vec<LayerState>,
    pub shape: ImageShape,
    pub num_classes: usize,
}

#[derive(Debug, Clone)]
pub struct MlpGradient {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Matrix>,
}

struct Trace {
    /// `inputs[l]` is the input to layer `l`.
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
}

fn affine(layer: &LayerState, x: &Matrix) -> Result<Matrix> {
    let mut z = matmul_bt(x, &layer.weights)?;
    let b = layer.bias.data();
    for r in 0..z.rows() {
        for (v, &bj) in z.row_mut(r).iter_mut().zip(b) {
            *v += bj;
        }
    }
    Ok(z)
}

fn log_softmax_row(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    z.iter().map(|&v| v - lse).collect()
}

impl Mlp {
    pub fn new(
        hidden: &[usize],
        shape: ImageShape,
        num_classes: usize,
        adam: AdamConfig,
        rng: &mut Rng,
    ) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut inputs = shape.len();
        for &w in hidden.iter().chain(std::iter::once(&num_classes)) {
            layers.push(LayerState::new(inputs, w, adam.clone(), rng));
            inputs = w;
        }
        Self {
            layers,
            shape,
            num_classes,
        }
    }

    fn trace(&self, x: &Matrix) -> Result<(Trace, Matrix)> {
        if x.cols() != self.shape.len() {
            return Err(Error::dim(
                "Mlp::forward",
                format!("input has {} columns, network expects {}", x.cols(), self.shape.len()),
            ));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = affine(layer, &h)?;
            let next = if l == last { z.clone() } else { z.map(|v| v.max(0.0)) };
            inputs.push(h);
            pre.push(z);
            h = next;
        }
        Ok((Trace { inputs, pre }, h))
    }

    /// Output logits, one row per sample.
    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.trace(x)?.1)
    }

    /// Mean softmax cross-entropy.
    pub fn loss(&self, x: &Matrix, labels: &[usize]) -> Result<f64> {
        let logits = self.logits(x)?;
        let mut total = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            total -= log_softmax_row(logits.row(r))[y];
        }
        Ok(total / labels.len().max(1) as f64)
    }

    /// Mean loss and its gradient for every parameter.
    pub fn gradient(&self, x: &Matrix, labels: &[usize]) -> Result<(f64, MlpGradient)> {
        if labels.len() != x.rows() {
            return Err(Error::dim("Mlp::gradient", "one label per input row required"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= self.num_classes) {
            return Err(Error::param(format!("label {bad} out of range")));
        }
        let (trace, logits) = self.trace(x)?;
        let n = labels.len().max(1) as f64;
        let mut delta = Matrix::zeros(logits.rows(), logits.cols());
        let mut loss = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let lsm = log_softmax_row(logits.row(r));
            loss -= lsm[y];
            for (c, d) in delta.row_mut(r).iter_mut().enumerate() {
                let p = lsm[c].exp();
                *d = (p - if c == y { 1.0 } else { 0.0 }) / n;
            }
        }

        let depth = self.layers.len();
        let mut weights = vec![Matrix::zeros(0, 0); depth];
        let mut biases = vec![Matrix::zeros(0, 0); depth];
        for l in (0..depth).rev() {
            weights[l] = matmul_at(&delta, &trace.inputs[l])?;
            biases[l] = Matrix::from_vec(1, delta.cols(), delta.column_sums())?;
            if l > 0 {
                let mut back = matmul(&delta, &self.layers[l].weights)?;
                let z = &trace.pre[l - 1];
                for (b, &zv) in back.data_mut().iter_mut().zip(z.data()) {
                    if zv <= 0.0 {
                        *b = 0.0;
                    }
                }
                delta = back;
            }
        }
        Ok((loss / n, MlpGradient { weights, biases }))
    }

    pub fn apply(&mut self, grad: &MlpGradient) -> Result<()> {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            adam_step(&mut layer.weights, &grad.weights[l], &mut layer.adam_w)?;
            adam_step(&mut layer.bias, &grad.biases[l], &mut layer.adam_b)?;
        }
        Ok(())
    }
}

pub(super) fn train_bp_observed(
    config: &TrainConfig,
    train: &Dataset,
    test: &Dataset,
    mut observe: impl FnMut(&MetricsRecord),
) -> Result<TrainOutcome> {
    if config.algorithm != super::Algorithm::Bp {
        return Err(Error::Config(vec![format!(
            "train_bp called with algorithm = {}",
            config.algorithm
        )]));
    }
    check_datasets(config, train, test)?;
    let mut init_rng = Rng::with_stream(config.seed, STREAM_INIT);
    let mut net = Mlp::new(
        &config.layers,
        train.meta.shape,
        train.meta.num_classes,
        AdamConfig::with_lr(config.lr),
        &mut init_rng,
    );
    let mut shuffle_rng = Rng::with_stream(config.seed, STREAM_SHUFFLE);
    let mut aug_rng = Rng::with_stream(config.seed, STREAM_AUGMENT);
    let train_eval = train.head(config.train_eval_samples);

    let start = Instant::now();
    let mut metrics = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let order = shuffle_rng.permutation(train.len());
        let mut loss_sum = 0.0;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let (images, labels) = epoch_batch(config, train, chunk, &mut aug_rng)?;
            let (loss, grad) = net.gradient(&images, &labels)?;
            let finite = loss.is_finite()
                && grad.weights.iter().chain(&grad.biases).all(Matrix::is_finite);
            if !finite {
                return Err(Error::NonFinite {
                    layer: net.layers.len() - 1,
                    epoch,
                    batch,
                });
            }
            net.apply(&grad)?;
            loss_sum += loss * chunk.len() as f64;
        }

        let (train_accuracy, test_error) = if should_evaluate(config, epoch) {
            let train_accuracy = if train_eval.is_empty() {
                None
            } else {
                let p = inference::classify_mlp(&net, &train_eval.images)?;
                Some(100.0 - inference::test_error(&p, &train_eval.labels)?)
            };
            let test_error = if test.is_empty() {
                None
            } else {
                let p = inference::classify_mlp(&net, &test.images)?;
                Some(inference::test_error(&p, &test.labels)?)
            };
            (train_accuracy, test_error)
        } else {
            (None, None)
        };
        let record = MetricsRecord {
            epoch,
            layer_losses: vec![loss_sum / train.len() as f64],
            train_accuracy,
            test_error,
            seconds: start.elapsed().as_secs_f64(),
        };
        info!("bp epoch {epoch}/{}: loss {:?} test error {:?}", config.epochs, record.layer_losses, record.test_error);
        observe(&record);
        metrics.push(record);
    }

    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config: config.clone(),
            model: Model::Backprop(net),
            seed: config.seed,
            epoch: config.epochs as u64,
        },
        metrics,
    })
}

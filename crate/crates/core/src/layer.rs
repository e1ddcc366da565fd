//! A single fully-connected layer trained on its own objective.
//!
//! Forward: each input row is divided by its L2 norm (plus `norm_epsilon`),
//! then `y = ReLU(x̂ Wᵀ + b)`. Goodness is `Σ_j y_j²`, so for one sample
//!
//! ```text
//! ∂G/∂W_jk = 2 y_j x̂_k,   ∂G/∂b_j = 2 y_j
//! ```
//!
//! (`y_j` is already zero wherever the ReLU is inactive). The loss gradient
//! with respect to goodness comes from [`crate::losses`]; nothing here ever
//! looks at another layer's parameters.

use crate::error::{Error, Result};
use crate::losses::{self, GoodnessPair, LossConfig, LossGrad};
use crate::numerics::{adam_step, matmul_at, matmul_bt, AdamConfig, AdamState, Matrix, Rng};

pub const DEFAULT_NORM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    /// `out × in`.
    pub weights: Matrix,
    /// `1 × out`.
    pub bias: Matrix,
    pub adam_w: AdamState,
    pub adam_b: AdamState,
    pub norm_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivations {
    pub normalized_input: Matrix,
    pub pre_activation: Matrix,
    pub output: Matrix,
}

#[derive(Debug, Clone)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub bias: Matrix,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub loss: f64,
    pub mean_goodness_pos: f64,
    pub mean_goodness_neg: f64,
    /// False when the loss or gradient was non-finite; the parameters were
    /// then left untouched.
    pub updated: bool,
    /// Post-ReLU outputs for the next layer, computed before the update.
    pub pos_output: Matrix,
    pub neg_output: Matrix,
}

impl LayerState {
    /// Weights uniform in `±1/√in`, zero bias.
    pub fn new(inputs: usize, outputs: usize, adam: AdamConfig, rng: &mut Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Self {
            weights: rng.uniform_range(outputs, inputs, -bound, bound),
            bias: Matrix::zeros(1, outputs),
            adam_w: AdamState::new(outputs, inputs, adam.clone()),
            adam_b: AdamState::new(1, outputs, adam),
            norm_epsilon: DEFAULT_NORM_EPSILON,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, input: &Matrix) -> Result<LayerActivations> {
        layer_forward(self, input)
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.adam_w.config.lr = lr;
        self.adam_b.config.lr = lr;
    }
}

/// Divides every row by `‖row‖₂ + eps`.
pub fn normalize_rows(input: &Matrix, eps: f64) -> Matrix {
    let mut out = input.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        let inv = 1.0 / (norm + eps);
        for x in row {
            *x *= inv;
        }
    }
    out
}

pub fn layer_forward(state: &LayerState, input: &Matrix) -> Result<LayerActivations> {
    if input.cols() != state.inputs() {
        return Err(Error::dim(
            "layer_forward",
            format!("input has {} columns, layer expects {}", input.cols(), state.inputs()),
        ));
    }
    let normalized_input = normalize_rows(input, state.norm_epsilon);
    let mut pre_activation = matmul_bt(&normalized_input, &state.weights)?;
    let bias = state.bias.data();
    for r in 0..pre_activation.rows() {
        for (z, &b) in pre_activation.row_mut(r).iter_mut().zip(bias) {
            *z += b;
        }
    }
    let output = pre_activation.map(|z| z.max(0.0));
    Ok(LayerActivations {
        normalized_input,
        pre_activation,
        output,
    })
}

/// Gradient of the batch-mean loss with respect to this layer's own
/// parameters, given `dL/dG` for each positive/negative pair.
pub fn layer_local_gradient(
    state: &LayerState,
    acts_pos: &LayerActivations,
    acts_neg: &LayerActivations,
    loss_grad: &LossGrad,
) -> Result<LayerGradient> {
    let n = acts_pos.output.rows();
    if acts_neg.output.rows() != n || loss_grad.d_gpos.len() != n || loss_grad.d_gneg.len() != n
    {
        return Err(Error::dim(
            "layer_local_gradient",
            format!(
                "{} positive rows, {} negative rows, {}/{} goodness gradients",
                n,
                acts_neg.output.rows(),
                loss_grad.d_gpos.len(),
                loss_grad.d_gneg.len()
            ),
        ));
    }
    let (out, inp) = state.weights.shape();
    if acts_pos.output.cols() != out || acts_pos.normalized_input.cols() != inp {
        return Err(Error::dim(
            "layer_local_gradient",
            "activations were not produced by this layer",
        ));
    }
    if n == 0 {
        return Ok(LayerGradient {
            weights: Matrix::zeros(out, inp),
            bias: Matrix::zeros(1, out),
        });
    }

    let scale = 2.0 / n as f64;
    let branch = |acts: &LayerActivations, dg: &[f64]| -> Result<(Matrix, Vec<f64>)> {
        // δ_ij = (2/n) · dL/dG_i · y_ij · 1[z_ij > 0]
        let mut delta = acts.output.clone();
        for (i, &d) in dg.iter().enumerate() {
            let z = acts.pre_activation.row(i);
            for (y, &zj) in delta.row_mut(i).iter_mut().zip(z) {
                *y = if zj > 0.0 { *y * d * scale } else { 0.0 };
            }
        }
        let gw = matmul_at(&delta, &acts.normalized_input)?;
        Ok((gw, delta.column_sums()))
    };
    let (mut gw, mut gb) = branch(acts_pos, &loss_grad.d_gpos)?;
    let (gw_neg, gb_neg) = branch(acts_neg, &loss_grad.d_gneg)?;
    for (a, b) in gw.data_mut().iter_mut().zip(gw_neg.data()) {
        *a += b;
    }
    for (a, b) in gb.iter_mut().zip(&gb_neg) {
        *a += b;
    }
    Ok(LayerGradient {
        weights: gw,
        bias: Matrix::from_vec(1, out, gb)?,
    })
}

/// Forward on both branches, loss, local gradient and one Adam update.
pub fn layer_train_step(
    state: &mut LayerState,
    batch_pos: &Matrix,
    batch_neg: &Matrix,
    config: &LossConfig,
) -> Result<StepOutput> {
    if batch_pos.shape() != batch_neg.shape() {
        return Err(Error::dim(
            "layer_train_step",
            format!(
                "positive batch {:?} vs negative batch {:?}",
                batch_pos.shape(),
                batch_neg.shape()
            ),
        ));
    }
    let acts_pos = layer_forward(state, batch_pos)?;
    let acts_neg = layer_forward(state, batch_neg)?;
    let g_pos = losses::goodness_unchecked(&acts_pos.output);
    let g_neg = losses::goodness_unchecked(&acts_neg.output);
    let n = g_pos.len().max(1) as f64;
    let mean_goodness_pos = g_pos.iter().sum::<f64>() / n;
    let mean_goodness_neg = g_neg.iter().sum::<f64>() / n;

    let finite = g_pos.iter().chain(&g_neg).all(|g| g.is_finite());
    let (loss, updated) = if finite {
        let pair = GoodnessPair {
            g_pos,
            g_neg,
        };
        let loss = config.mean_loss(&pair);
        let grad = layer_local_gradient(
            state,
            &acts_pos,
            &acts_neg,
            &losses::loss_grad_wrt_goodness(&pair, config),
        )?;
        if loss.is_finite() && grad.weights.is_finite() && grad.bias.is_finite() {
            adam_step(&mut state.weights, &grad.weights, &mut state.adam_w)?;
            adam_step(&mut state.bias, &grad.bias, &mut state.adam_b)?;
            (loss, true)
        } else {
            (loss, false)
        }
    } else {
        (f64::NAN, false)
    };

    Ok(StepOutput {
        loss,
        mean_goodness_pos,
        mean_goodness_neg,
        updated,
        pos_output: acts_pos.output,
        neg_output: acts_neg.output,
    })
}

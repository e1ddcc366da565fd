//! Training loops.
//!
//! [`train_ff`] runs layer-local training (FF or SymBa objective): every
//! batch is turned into a positive and a negative copy, layer 1 takes one
//! optimizer step on them, and its outputs are handed to layer 2 as plain
//! matrices, and so on. [`train_bp`] trains the same widths plus a softmax
//! head end to end with hand-written backpropagation, as the baseline.
//!
//! Random streams derived from `TrainConfig::seed`:
//!
//! | stream | consumer                         |
//! |--------|----------------------------------|
//! | 0      | ICP pattern generation           |
//! | 1      | weight initialization            |
//! | 2      | per-epoch shuffling              |
//! | 3      | negative-label sampling          |
//! | 4      | augmentation                     |

mod backprop;
mod checkpoint;
mod config;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use log::info;

pub use backprop::{Mlp, MlpGradient};
pub use checkpoint::{checkpoint_load, checkpoint_save, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{Algorithm, LabelingKind, TrainConfig};

use crate::dataio::{augment, Dataset};
use crate::error::{Error, Result};
use crate::inference;
use crate::labeling::{icp_generate, make_pos_neg, ImageShape, Labeling};
use crate::layer::{layer_train_step, LayerState};
use crate::losses::LossConfig;
use crate::numerics::{AdamConfig, Matrix, Rng};

pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_SHUFFLE: u64 = 2;
pub(crate) const STREAM_NEGATIVES: u64 = 3;
pub(crate) const STREAM_AUGMENT: u64 = 4;

/// A stack of independently trained layers plus the labeling used to build
/// their inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FfNetwork {
    pub layers: Vec<LayerState>,
    pub labeling: Labeling,
    pub shape: ImageShape,
    pub num_classes: usize,
    pub loss: LossConfig,
}

impl FfNetwork {
    pub fn new(config: &TrainConfig, shape: ImageShape, num_classes: usize) -> Result<Self> {
        let labeling = match config.labeling {
            LabelingKind::Overlay => Labeling::Overlay {
                on_value: config.overlay_value,
            },
            LabelingKind::Icp => Labeling::Icp(icp_generate(
                num_classes,
                shape.height,
                shape.width,
                config.icp_rate,
                config.seed,
            )?),
            LabelingKind::None => {
                return Err(Error::Config(vec![format!(
                    "{} training needs a labeling scheme",
                    config.algorithm
                )]))
            }
        };
        labeling.validate(shape, num_classes)?;
        let loss = config.loss_config()?;
        let mut rng = Rng::with_stream(config.seed, STREAM_INIT);
        let mut inputs = labeling.encoded_len(shape);
        let mut layers = Vec::with_capacity(config.layers.len());
        for &width in &config.layers {
            layers.push(LayerState::new(inputs, width, AdamConfig::with_lr(config.lr), &mut rng));
            inputs = width;
        }
        Ok(Self {
            layers,
            labeling,
            shape,
            num_classes,
            loss,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    LayerLocal(FfNetwork),
    Backprop(Mlp),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    /// Mean training loss per layer (one entry, the cross-entropy, for BP).
    pub layer_losses: Vec<f64>,
    /// Percent, on the first `train_eval_samples` training samples.
    pub train_accuracy: Option<f64>,
    /// Percent; `None` on epochs without evaluation.
    pub test_error: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub metrics: Vec<MetricsRecord>,
}

impl TrainOutcome {
    pub fn final_test_error(&self) -> Option<f64> {
        self.metrics.iter().rev().find_map(|m| m.test_error)
    }
}

/// Dispatches on `config.algorithm`.
pub fn train(config: &TrainConfig, train: &Dataset, test: &Dataset) -> Result<TrainOutcome> {
    train_observed(config, train, test, |_| {})
}

/// As [`train`], calling `observe` after every epoch.
pub fn train_observed(
    config: &TrainConfig,
    train: &Dataset,
    test: &Dataset,
    observe: impl FnMut(&MetricsRecord),
) -> Result<TrainOutcome> {
    match config.algorithm {
        Algorithm::Bp => backprop::train_bp_observed(config, train, test, observe),
        Algorithm::Ff | Algorithm::Symba => train_ff_observed(config, train, test, observe),
    }
}

pub fn train_ff(config: &TrainConfig, train: &Dataset, test: &Dataset) -> Result<TrainOutcome> {
    train_ff_observed(config, train, test, |_| {})
}

pub fn train_bp(config: &TrainConfig, train: &Dataset, test: &Dataset) -> Result<TrainOutcome> {
    backprop::train_bp_observed(config, train, test, |_| {})
}

fn check_datasets(config: &TrainConfig, train: &Dataset, test: &Dataset) -> Result<()> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::param("training set is empty"));
    }
    if train.meta.shape != test.meta.shape || train.meta.num_classes != test.meta.num_classes {
        return Err(Error::param("train and test sets have different image shapes or class counts"));
    }
    Ok(())
}

pub(crate) fn epoch_batch(
    config: &TrainConfig,
    train: &Dataset,
    chunk: &[usize],
    aug_rng: &mut Rng,
) -> Result<(Matrix, Vec<usize>)> {
    let mut images = train.images.select_rows(chunk);
    if let Some(aug) = &config.augment {
        images = augment(&images, train.meta.shape, aug, aug_rng)?;
    }
    let labels = chunk.iter().map(|&i| train.labels[i]).collect();
    Ok((images, labels))
}

pub(crate) fn should_evaluate(config: &TrainConfig, epoch: usize) -> bool {
    epoch.is_multiple_of(config.eval_every) || epoch == config.epochs
}

fn train_ff_observed(
    config: &TrainConfig,
    train: &Dataset,
    test: &Dataset,
    mut observe: impl FnMut(&MetricsRecord),
) -> Result<TrainOutcome> {
    if config.algorithm == Algorithm::Bp {
        return Err(Error::Config(vec!["train_ff called with algorithm = bp".into()]));
    }
    check_datasets(config, train, test)?;
    let shape = train.meta.shape;
    let num_classes = train.meta.num_classes;
    let mut net = FfNetwork::new(config, shape, num_classes)?;
    let loss = net.loss;

    let mut shuffle_rng = Rng::with_stream(config.seed, STREAM_SHUFFLE);
    let mut neg_rng = Rng::with_stream(config.seed, STREAM_NEGATIVES);
    let mut aug_rng = Rng::with_stream(config.seed, STREAM_AUGMENT);
    let train_eval = train.head(config.train_eval_samples);

    let start = Instant::now();
    let mut metrics = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let order = shuffle_rng.permutation(train.len());
        let mut loss_sums = vec![0.0; net.layers.len()];
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let (images, labels) = epoch_batch(config, train, chunk, &mut aug_rng)?;
            let (pos, neg) =
                make_pos_neg(&images, &labels, shape, num_classes, &net.labeling, &mut neg_rng)?;
            let mut x_pos = pos.inputs;
            let mut x_neg = neg.inputs;
            for (li, layer) in net.layers.iter_mut().enumerate() {
                let step = layer_train_step(layer, &x_pos, &x_neg, &loss)?;
                if !step.updated || !step.loss.is_finite() {
                    return Err(Error::NonFinite {
                        layer: li,
                        epoch,
                        batch,
                    });
                }
                loss_sums[li] += step.loss * chunk.len() as f64;
                x_pos = step.pos_output;
                x_neg = step.neg_output;
            }
        }
        let layer_losses = loss_sums.iter().map(|s| s / train.len() as f64).collect();

        let (train_accuracy, test_error) = if should_evaluate(config, epoch) {
            let train_accuracy = if train_eval.is_empty() {
                None
            } else {
                let (p, _) = inference::classify_network(&net, &train_eval.images, config.include_first_layer)?;
                Some(100.0 - inference::test_error(&p, &train_eval.labels)?)
            };
            let test_error = if test.is_empty() {
                None
            } else {
                let (p, _) = inference::classify_network(&net, &test.images, config.include_first_layer)?;
                Some(inference::test_error(&p, &test.labels)?)
            };
            (train_accuracy, test_error)
        } else {
            (None, None)
        };

        let record = MetricsRecord {
            epoch,
            layer_losses,
            train_accuracy,
            test_error,
            seconds: start.elapsed().as_secs_f64(),
        };
        info!(
            "{} epoch {epoch}/{}: losses {:?} test error {:?}",
            config.algorithm, config.epochs, record.layer_losses, record.test_error
        );
        observe(&record);
        metrics.push(record);
    }

    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config: config.clone(),
            model: Model::LayerLocal(net),
            seed: config.seed,
            epoch: config.epochs as u64,
        },
        metrics,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Metrics CSV: `epoch,test_error,train_accuracy,loss_1..loss_L`.
///
/// Wall-clock time is left out so that reruns produce identical bytes; see
/// [`write_timing_csv`].
pub fn write_metrics_csv(path: &Path, metrics: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let n_losses = metrics.first().map_or(0, |m| m.layer_losses.len());
    let mut header = vec!["epoch".to_string(), "test_error".into(), "train_accuracy".into()];
    header.extend((1..=n_losses).map(|i| format!("loss_{i}")));
    w.write_record(&header)?;
    for m in metrics {
        let mut row = vec![m.epoch.to_string(), fmt_opt(m.test_error), fmt_opt(m.train_accuracy)];
        row.extend(m.layer_losses.iter().map(|l| l.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// `epoch,seconds`.
pub fn write_timing_csv(path: &Path, metrics: &[MetricsRecord]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut s = String::from("epoch,seconds\n");
    for m in metrics {
        s.push_str(&format!("{},{:.3}\n", m.epoch, m.seconds));
    }
    f.write_all(s.as_bytes()).map_err(|e| Error::io(path, e))
}

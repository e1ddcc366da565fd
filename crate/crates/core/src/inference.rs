//! Classification with trained models.
//!
//! Layer-local models predict `argmax_y G(x, y)`: the image is encoded once
//! per candidate class, pushed through every layer, and the per-layer
//! goodness values are summed. Ties go to the lowest class index. The
//! backprop baseline predicts the largest logit.

use std::path::Path;

use crate::error::{Error, Result};
use crate::losses::goodness_unchecked;
use crate::numerics::Matrix;
use crate::trainer::{Checkpoint, FfNetwork, LabelingKind, Mlp, Model};

/// Rows per forward pass during evaluation; bounds peak memory.
const EVAL_CHUNK: usize = 2048;

/// Accumulated goodness, `samples × classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodnessTable {
    pub values: Matrix,
}

impl GoodnessTable {
    pub fn num_classes(&self) -> usize {
        self.values.cols()
    }

    pub fn argmax(&self) -> Vec<usize> {
        self.values.row_iter().map(argmax_first).collect()
    }
}

fn argmax_first(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Goodness of every sample under every candidate label, summed over layers
/// (layer 1 skipped unless `include_first_layer`).
pub fn goodness_table(net: &FfNetwork, images: &Matrix, include_first_layer: bool) -> Result<GoodnessTable> {
    if images.cols() != net.shape.len() {
        return Err(Error::dim(
            "goodness_table",
            format!("images have {} entries, model expects {}", images.cols(), net.shape.len()),
        ));
    }
    let n = images.rows();
    let mut values = Matrix::zeros(n, net.num_classes);
    let skip = usize::from(!include_first_layer && net.layers.len() > 1);
    for start in (0..n).step_by(EVAL_CHUNK) {
        let idx: Vec<usize> = (start..(start + EVAL_CHUNK).min(n)).collect();
        let chunk = images.select_rows(&idx);
        for class in 0..net.num_classes {
            let labels = vec![class; idx.len()];
            let mut x = net
                .labeling
                .encode_batch(&chunk, &labels, net.shape, net.num_classes)?;
            for (li, layer) in net.layers.iter().enumerate() {
                x = layer.forward(&x)?.output;
                if li >= skip {
                    for (k, g) in goodness_unchecked(&x).into_iter().enumerate() {
                        let cell = &mut values.row_mut(start + k)[class];
                        *cell += g;
                    }
                }
            }
        }
    }
    Ok(GoodnessTable { values })
}

pub fn classify_network(
    net: &FfNetwork,
    images: &Matrix,
    include_first_layer: bool,
) -> Result<(Vec<usize>, GoodnessTable)> {
    let table = goodness_table(net, images, include_first_layer)?;
    Ok((table.argmax(), table))
}

pub fn classify_mlp(net: &Mlp, images: &Matrix) -> Result<Vec<usize>> {
    let n = images.rows();
    let mut preds = Vec::with_capacity(n);
    for start in (0..n).step_by(EVAL_CHUNK) {
        let idx: Vec<usize> = (start..(start + EVAL_CHUNK).min(n)).collect();
        let logits = net.logits(&images.select_rows(&idx))?;
        preds.extend(logits.row_iter().map(argmax_first));
    }
    Ok(preds)
}

pub fn classify_goodness(checkpoint: &Checkpoint, images: &Matrix) -> Result<(Vec<usize>, GoodnessTable)> {
    match &checkpoint.model {
        Model::LayerLocal(net) => classify_network(net, images, checkpoint.config.include_first_layer),
        Model::Backprop(_) => Err(Error::Config(vec![
            "goodness classification needs a layer-local checkpoint, got backprop".into(),
        ])),
    }
}

pub fn classify_softmax(checkpoint: &Checkpoint, images: &Matrix) -> Result<Vec<usize>> {
    match &checkpoint.model {
        Model::Backprop(net) => classify_mlp(net, images),
        Model::LayerLocal(_) => Err(Error::Config(vec![
            "softmax classification needs a backprop checkpoint".into(),
        ])),
    }
}

/// Routes to the classifier matching the checkpoint's model. When `expected`
/// is given it must match the labeling the checkpoint was trained with.
pub fn classify(checkpoint: &Checkpoint, images: &Matrix, expected: Option<LabelingKind>) -> Result<Vec<usize>> {
    if let Some(want) = expected {
        if want != checkpoint.config.labeling {
            return Err(Error::Config(vec![format!(
                "labeling {want} requested, checkpoint was trained with {}",
                checkpoint.config.labeling
            )]));
        }
    }
    match &checkpoint.model {
        Model::LayerLocal(_) => Ok(classify_goodness(checkpoint, images)?.0),
        Model::Backprop(_) => classify_softmax(checkpoint, images),
    }
}

/// `100 · (1 − accuracy)`.
pub fn test_error(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::dim(
            "test_error",
            format!("{} predictions for {} labels", preds.len(), labels.len()),
        ));
    }
    if preds.is_empty() {
        return Err(Error::param("test error of an empty set is undefined"));
    }
    let wrong = preds.iter().zip(labels).filter(|(p, l)| p != l).count();
    Ok(100.0 * wrong as f64 / preds.len() as f64)
}

/// `index,predicted,true`.
pub fn write_predictions_csv(path: &Path, preds: &[usize], labels: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "predicted", "true"])?;
    for (i, (p, t)) in preds.iter().zip(labels).enumerate() {
        w.write_record(&[i.to_string(), p.to_string(), t.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

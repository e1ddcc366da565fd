#![allow(dead_code)]

use std::fs;
use std::path::Path;

use symba::dataio::{encode_idx_images, encode_idx_labels, Dataset, DatasetMeta, Split};
use symba::labeling::ImageShape;
use symba::{Algorithm, LabelingKind, Matrix, Rng, TrainConfig};

/// Class `c` lights up pixels whose index is `c` mod `classes`, plus noise.
pub fn striped_dataset(n: usize, shape: ImageShape, classes: usize, seed: u64, split: Split) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut images = Matrix::zeros(n, shape.len());
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = (i * 7 + seed as usize) % classes;
        labels.push(class);
        for (k, x) in images.row_mut(i).iter_mut().enumerate() {
            *x = if k % classes == class {
                0.6 + 0.4 * rng.next_f64()
            } else {
                0.2 * rng.next_f64()
            };
        }
    }
    let meta = DatasetMeta {
        name: "striped".into(),
        shape,
        num_classes: classes,
        split,
    };
    Dataset::new(images, labels, meta).unwrap()
}

/// Writes a tiny MNIST-layout data root (`mnist/*-ubyte`), 10 classes of
/// 28×28 images.
pub fn write_mnist_root(root: &Path, n_train: usize, n_test: usize) {
    let dir = root.join("mnist");
    fs::create_dir_all(&dir).unwrap();
    let shape = ImageShape::new(1, 28, 28);
    for (prefix, n, seed) in [("train", n_train, 1), ("t10k", n_test, 2)] {
        let ds = striped_dataset(n, shape, 10, seed, Split::Train);
        let labels: Vec<u8> = ds.labels.iter().map(|&l| l as u8).collect();
        fs::write(
            dir.join(format!("{prefix}-images-idx3-ubyte")),
            encode_idx_images(&ds.images, 28, 28).unwrap(),
        )
        .unwrap();
        fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), encode_idx_labels(&labels)).unwrap();
    }
}

pub fn small_config(algorithm: Algorithm, labeling: LabelingKind) -> TrainConfig {
    TrainConfig {
        algorithm,
        labeling,
        layers: vec![12, 10],
        epochs: 3,
        batch_size: 16,
        lr: 0.01,
        ..TrainConfig::default()
    }
}

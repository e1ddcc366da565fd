//! Train a small model on synthetic data, save it, load it back and check
//! that the predictions agree.
//!
//! `cargo run --example checkpoint_roundtrip`

use symba::dataio::{Dataset, DatasetMeta, Split};
use symba::inference::{classify, test_error};
use symba::labeling::ImageShape;
use symba::trainer::{checkpoint_load, checkpoint_save, train};
use symba::{Matrix, Rng, TrainConfig};

/// Class `c` brightens every pixel whose index is `c` mod 3.
fn stripes(n: usize, seed: u64) -> symba::Result<Dataset> {
    let shape = ImageShape::new(1, 6, 6);
    let mut rng = Rng::new(seed);
    let mut images = Matrix::zeros(n, shape.len());
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    for (i, &c) in labels.iter().enumerate() {
        for (k, x) in images.row_mut(i).iter_mut().enumerate() {
            *x = if k % 3 == c { 0.5 + 0.5 * rng.next_f64() } else { 0.3 * rng.next_f64() };
        }
    }
    let meta = DatasetMeta {
        name: "stripes".into(),
        shape,
        num_classes: 3,
        split: Split::Train,
    };
    Dataset::new(images, labels, meta)
}

fn main() -> symba::Result<()> {
    let (tr, te) = (stripes(300, 1)?, stripes(90, 2)?);
    let cfg = TrainConfig {
        layers: vec![32, 32],
        epochs: 20,
        batch_size: 30,
        lr: 0.01,
        ..TrainConfig::default()
    };
    let ck = train(&cfg, &tr, &te)?.checkpoint;
    let path = std::env::temp_dir().join("symba_example.bin");
    checkpoint_save(&ck, &path)?;
    let back = checkpoint_load(&path)?;
    let a = classify(&ck, &te.images, None)?;
    let b = classify(&back, &te.images, None)?;
    println!("{} bytes written to {}", std::fs::metadata(&path).map_or(0, |m| m.len()), path.display());
    println!("test error {:.2}%, predictions identical after reload: {}", test_error(&a, &te.labels)?, a == b);
    Ok(())
}

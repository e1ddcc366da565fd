//! The end-to-end backprop baseline: same widths plus a softmax head.
//!
//! `SYMBA_DATA_ROOT=/data cargo run --release --example bp_baseline -- [epochs]`

use symba::dataio::{load, resolve_data_root, DatasetKind, Split};
use symba::trainer::train_observed;
use symba::{Algorithm, LabelingKind, TrainConfig};

fn main() -> symba::Result<()> {
    let Some(root) = resolve_data_root(None) else {
        eprintln!("set SYMBA_DATA_ROOT to the directory holding mnist/");
        std::process::exit(2);
    };
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10);
    let train = load(&root, DatasetKind::Mnist, Split::Train)?;
    let test = load(&root, DatasetKind::Mnist, Split::Test)?;
    let cfg = TrainConfig {
        algorithm: Algorithm::Bp,
        labeling: LabelingKind::None,
        epochs,
        batch_size: 256,
        ..TrainConfig::default()
    };
    train_observed(&cfg, &train, &test, |m| {
        println!("epoch {:3}  loss {:.4}  test error {:.2}%", m.epoch, m.layer_losses[0], m.test_error.unwrap_or(f64::NAN));
    })?;
    Ok(())
}

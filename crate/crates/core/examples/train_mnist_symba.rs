//! Trains SymBa with intrinsic class patterns on MNIST and saves a checkpoint.
//!
//! `SYMBA_DATA_ROOT=/data cargo run --release --example train_mnist_symba -- [epochs]`

use symba::dataio::{load, resolve_data_root, DatasetKind, Split};
use symba::trainer::{checkpoint_save, train_observed};
use symba::TrainConfig;

fn main() -> symba::Result<()> {
    let Some(root) = resolve_data_root(None) else {
        eprintln!("set SYMBA_DATA_ROOT to the directory holding mnist/");
        std::process::exit(2);
    };
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10);
    let train = load(&root, DatasetKind::Mnist, Split::Train)?;
    let test = load(&root, DatasetKind::Mnist, Split::Test)?;

    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let outcome = train_observed(&cfg, &train, &test, |m| {
        println!(
            "epoch {:3}  losses {:?}  test error {}",
            m.epoch,
            m.layer_losses.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>(),
            m.test_error.map_or("-".into(), |e| format!("{e:.2}%"))
        );
    })?;
    let path = std::env::temp_dir().join("symba_mnist.bin");
    checkpoint_save(&outcome.checkpoint, &path)?;
    println!("checkpoint written to {}", path.display());
    Ok(())
}

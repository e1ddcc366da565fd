//! Test error of SymBa as a function of the ICP rate, on an MNIST subset.
//!
//! `SYMBA_DATA_ROOT=/data cargo run --release --example icp_rate_ablation`

use symba::dataio::{load, resolve_data_root, DatasetKind, Split};
use symba::trainer::train;
use symba::TrainConfig;

fn main() -> symba::Result<()> {
    let Some(root) = resolve_data_root(None) else {
        eprintln!("set SYMBA_DATA_ROOT to the directory holding mnist/");
        std::process::exit(2);
    };
    let train_set = load(&root, DatasetKind::Mnist, Split::Train)?.head(10_000);
    let test = load(&root, DatasetKind::Mnist, Split::Test)?.head(2_000);
    println!("rate  test error");
    for rate in [0.05, 0.1, 0.2, 0.4, 0.8] {
        let cfg = TrainConfig {
            icp_rate: rate,
            layers: vec![200, 200],
            epochs: 5,
            batch_size: 512,
            ..TrainConfig::default()
        };
        let err = train(&cfg, &train_set, &test)?.final_test_error().unwrap_or(f64::NAN);
        println!("{rate:4}  {err:.2}%");
    }
    Ok(())
}

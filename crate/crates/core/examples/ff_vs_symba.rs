//! Per-epoch test accuracy of FF (overlay) and SymBa (ICP) on the same
//! MNIST subset, seed and budget.
//!
//! `SYMBA_DATA_ROOT=/data cargo run --release --example ff_vs_symba -- [epochs] [train samples]`

use symba::dataio::{load, resolve_data_root, DatasetKind, Split};
use symba::trainer::train;
use symba::{Algorithm, LabelingKind, TrainConfig};

fn main() -> symba::Result<()> {
    let Some(root) = resolve_data_root(None) else {
        eprintln!("set SYMBA_DATA_ROOT to the directory holding mnist/");
        std::process::exit(2);
    };
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().ok());
    let epochs = args.next().flatten().unwrap_or(5);
    let n = args.next().flatten().unwrap_or(20_000);
    let train_set = load(&root, DatasetKind::Mnist, Split::Train)?.head(n);
    let test = load(&root, DatasetKind::Mnist, Split::Test)?.head(5_000);

    let mut curves = Vec::new();
    for (algorithm, labeling) in [(Algorithm::Ff, LabelingKind::Overlay), (Algorithm::Symba, LabelingKind::Icp)] {
        let cfg = TrainConfig {
            algorithm,
            labeling,
            epochs,
            batch_size: 1024,
            ..TrainConfig::default()
        };
        let out = train(&cfg, &train_set, &test)?;
        curves.push(out.metrics.iter().map(|m| 100.0 - m.test_error.unwrap_or(f64::NAN)).collect::<Vec<_>>());
    }
    println!("epoch  FF+overlay  SymBa+ICP");
    for e in 0..epochs {
        println!("{:5}  {:9.2}%  {:8.2}%", e + 1, curves[0][e], curves[1][e]);
    }
    Ok(())
}

//! Loads every dataset found under the data root and prints record counts and
//! label histograms.
//!
//! `SYMBA_DATA_ROOT=/data cargo run --release --example inspect_datasets`

use symba::dataio::{load, resolve_data_root, DatasetKind, Split};

fn main() {
    let Some(root) = resolve_data_root(None) else {
        eprintln!("set SYMBA_DATA_ROOT");
        std::process::exit(2);
    };
    for kind in [DatasetKind::Mnist, DatasetKind::Cifar10, DatasetKind::Cifar100] {
        for split in [Split::Train, Split::Test] {
            match load(&root, kind, split) {
                Ok(ds) => {
                    let mut hist = vec![0usize; kind.num_classes()];
                    for &l in &ds.labels {
                        hist[l] += 1;
                    }
                    let mean = ds.images.data().iter().sum::<f64>() / ds.images.data().len() as f64;
                    println!("{kind} {split:?}: {} records, mean pixel {mean:.4}", ds.len());
                    if hist.len() <= 10 {
                        println!("  labels {hist:?}");
                    }
                }
                Err(e) => println!("{kind} {split:?}: {e}"),
            }
        }
    }
}

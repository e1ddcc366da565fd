//! Overlay and intrinsic-class-pattern labeling side by side.
//!
//! `cargo run --example labeling`

use symba::labeling::{icp_generate, ImageShape, Labeling};
use symba::Rng;

fn show_plane(values: &[f64], width: usize) {
    for row in values.chunks(width) {
        let line: String = row.iter().map(|&v| if v >= 0.5 { '#' } else { '.' }).collect();
        println!("  {line}");
    }
}

fn main() -> symba::Result<()> {
    let shape = ImageShape::new(1, 8, 8);
    let classes = 4;
    let images = Rng::new(1).uniform(1, shape.len()).scale(0.3);

    let overlay = Labeling::Overlay { on_value: 1.0 };
    let x = overlay.encode_batch(&images, &[2], shape, classes)?;
    println!("overlay, class 2 ({} entries, first {classes} replaced):", x.cols());
    show_plane(x.row(0), 8);

    let bank = icp_generate(classes, 8, 8, 0.25, 0)?;
    println!("\nICP bank: {} ones per pattern", bank.ones_per_pattern());
    let icp = Labeling::Icp(bank);
    for class in 0..classes {
        let x = icp.encode_batch(&images, &[class], shape, classes)?;
        println!("class {class} pattern channel ({} entries total):", x.cols());
        show_plane(&x.row(0)[shape.len()..], 8);
    }

    for (name, shape, k) in [
        ("MNIST", ImageShape::new(1, 28, 28), 10),
        ("CIFAR-10", ImageShape::new(3, 32, 32), 10),
        ("CIFAR-100", ImageShape::new(3, 32, 32), 100),
    ] {
        println!(
            "{name}: overlay hides {k} of {} plane pixels ({:.2}%)",
            shape.plane(),
            100.0 * k as f64 / shape.plane() as f64
        );
    }
    Ok(())
}

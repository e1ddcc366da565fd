//! FF and SymBa losses over a small goodness grid, and the gradient imbalance
//! of FF near convergence.
//!
//! `cargo run --example loss_surface`

use symba::losses::{loss_grad_wrt_goodness, loss_surface, GoodnessPair, LossConfig};

fn main() -> symba::Result<()> {
    let ff = LossConfig::Ff { theta: 2.0 };
    let sb = LossConfig::Symba { alpha: 4.0 };

    for (name, cfg) in [("FF (theta = 2)", ff), ("SymBa (alpha = 4)", sb)] {
        println!("{name}: rows G_pos = 0..8, columns G_neg = 0..8");
        let grid = loss_surface(&cfg, 0.0, 8.0, 5)?;
        for row in grid.chunks(5) {
            let cells: Vec<String> = row.iter().map(|p| format!("{:7.4}", p.loss)).collect();
            println!("  G_pos = {:3}: {}", row[0].g_pos, cells.join(" "));
        }
    }

    println!("\ngradients with G_neg = 0 as G_pos grows:");
    println!("{:>6} {:>12} {:>12} {:>12} {:>12}", "G_pos", "FF d/dGpos", "FF d/dGneg", "SymBa d/dGpos", "SymBa d/dGneg");
    for g in [2.0, 5.0, 10.0, 20.0, 50.0] {
        let pair = GoodnessPair::new(vec![g], vec![0.0])?;
        let a = loss_grad_wrt_goodness(&pair, &ff);
        let b = loss_grad_wrt_goodness(&pair, &sb);
        println!(
            "{g:>6} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e}",
            a.d_gpos[0], a.d_gneg[0], b.d_gpos[0], b.d_gneg[0]
        );
    }
    Ok(())
}

//! Compares one layer's closed-form local gradient with central differences.
//!
//! `cargo run --example gradient_check`

use symba::layer::{layer_forward, layer_local_gradient, LayerState};
use symba::losses::{goodness, loss_grad_wrt_goodness, GoodnessPair, LossConfig};
use symba::numerics::AdamConfig;
use symba::{Matrix, Rng};

fn loss(layer: &LayerState, pos: &Matrix, neg: &Matrix, cfg: &LossConfig) -> symba::Result<f64> {
    let gp = goodness(&layer_forward(layer, pos)?.output)?;
    let gn = goodness(&layer_forward(layer, neg)?.output)?;
    Ok(cfg.mean_loss(&GoodnessPair::new(gp, gn)?))
}

fn main() -> symba::Result<()> {
    let mut rng = Rng::new(3);
    let mut layer = LayerState::new(6, 4, AdamConfig::default(), &mut rng);
    layer.bias = rng.uniform_range(1, 4, 0.0, 0.2);
    let pos = rng.uniform(5, 6);
    let neg = rng.uniform(5, 6);
    let h = 1e-6;

    for cfg in [LossConfig::Ff { theta: 2.0 }, LossConfig::Symba { alpha: 4.0 }] {
        let ap = layer_forward(&layer, &pos)?;
        let an = layer_forward(&layer, &neg)?;
        let pair = GoodnessPair::new(goodness(&ap.output)?, goodness(&an.output)?)?;
        let grad = layer_local_gradient(&layer, &ap, &an, &loss_grad_wrt_goodness(&pair, &cfg))?;
        let mut worst: f64 = 0.0;
        for i in 0..layer.weights.data().len() {
            let mut plus = layer.clone();
            plus.weights.data_mut()[i] += h;
            let mut minus = layer.clone();
            minus.weights.data_mut()[i] -= h;
            let fd = (loss(&plus, &pos, &neg, &cfg)? - loss(&minus, &pos, &neg, &cfg)?) / (2.0 * h);
            let an = grad.weights.data()[i];
            worst = worst.max((an - fd).abs() / an.abs().max(fd.abs()).max(1e-4));
        }
        println!("{cfg:?}: worst relative error over {} weights = {worst:.2e}", layer.weights.data().len());
    }
    Ok(())
}

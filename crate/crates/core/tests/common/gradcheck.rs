//! Central finite differences against the closed-form gradients.
//!
//! A coordinate whose ±h perturbation flips any ReLU gate is skipped: the
//! loss is not differentiable there and the difference quotient means nothing.

use symba::labeling::ImageShape;
use symba::layer::{layer_forward, layer_local_gradient, LayerState};
use symba::losses::{goodness, loss_grad_wrt_goodness, GoodnessPair, LossConfig};
use symba::numerics::AdamConfig;
use symba::trainer::Mlp;
use symba::{Matrix, Rng};

pub const H: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-5;
/// Relative error is measured against `max(|analytic|, |fd|, FLOOR)`.
pub const FLOOR: f64 = 1e-4;

#[derive(Debug, Default, Clone, Copy)]
pub struct Report {
    pub checked: usize,
    pub skipped: usize,
    pub worst: f64,
}

impl Report {
    fn absorb(&mut self, other: Report) {
        self.checked += other.checked;
        self.skipped += other.skipped;
        self.worst = self.worst.max(other.worst);
    }
}

pub fn relative_error(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(FLOOR)
}

fn gates(layer: &LayerState, x: &Matrix) -> Vec<bool> {
    layer_forward(layer, x)
        .unwrap()
        .pre_activation
        .data()
        .iter()
        .map(|&z| z > 0.0)
        .collect()
}

fn local_loss(layer: &LayerState, pos: &Matrix, neg: &Matrix, loss: &LossConfig) -> f64 {
    let gp = goodness(&layer_forward(layer, pos).unwrap().output).unwrap();
    let gn = goodness(&layer_forward(layer, neg).unwrap().output).unwrap();
    loss.mean_loss(&GoodnessPair::new(gp, gn).unwrap())
}

/// One random layer, batch and loss; every weight and bias checked.
pub fn check_layer(seed: u64) -> Report {
    let mut rng = Rng::new(seed);
    let n = 1 + rng.below(5);
    let inputs = 2 + rng.below(7);
    let outputs = 1 + rng.below(6);
    let loss = if rng.coin() {
        LossConfig::Ff { theta: 4.0 * rng.next_f64() }
    } else {
        LossConfig::Symba { alpha: 0.5 + 5.5 * rng.next_f64() }
    };
    let mut layer = LayerState::new(inputs, outputs, AdamConfig::default(), &mut rng);
    layer.weights = rng.uniform_range(outputs, inputs, -1.5, 1.5);
    layer.bias = rng.uniform_range(1, outputs, -0.3, 0.3);
    let pos = rng.uniform_range(n, inputs, -1.0, 1.0);
    let neg = rng.uniform_range(n, inputs, -1.0, 1.0);

    let ap = layer_forward(&layer, &pos).unwrap();
    let an = layer_forward(&layer, &neg).unwrap();
    let pair = GoodnessPair::new(goodness(&ap.output).unwrap(), goodness(&an.output).unwrap()).unwrap();
    let grad = layer_local_gradient(&layer, &ap, &an, &loss_grad_wrt_goodness(&pair, &loss)).unwrap();
    let base_gates = [gates(&layer, &pos), gates(&layer, &neg)];

    let mut report = Report::default();
    let n_w = layer.weights.data().len();
    for idx in 0..n_w + outputs {
        let perturb = |l: &mut LayerState, d: f64| {
            if idx < n_w {
                l.weights.data_mut()[idx] += d;
            } else {
                l.bias.data_mut()[idx - n_w] += d;
            }
        };
        let mut plus = layer.clone();
        perturb(&mut plus, H);
        let mut minus = layer.clone();
        perturb(&mut minus, -H);
        let flips = [&plus, &minus]
            .iter()
            .any(|l| gates(l, &pos) != base_gates[0] || gates(l, &neg) != base_gates[1]);
        if flips {
            report.skipped += 1;
            continue;
        }
        let fd = (local_loss(&plus, &pos, &neg, &loss) - local_loss(&minus, &pos, &neg, &loss)) / (2.0 * H);
        let analytic = if idx < n_w {
            grad.weights.data()[idx]
        } else {
            grad.bias.data()[idx - n_w]
        };
        report.checked += 1;
        report.worst = report.worst.max(relative_error(analytic, fd));
    }
    report
}

fn mlp_gates(net: &Mlp, x: &Matrix) -> Vec<bool> {
    let mut h = x.clone();
    let mut out = Vec::new();
    let last = net.layers.len() - 1;
    for (l, layer) in net.layers.iter().enumerate() {
        let mut z = symba::numerics::matmul_bt(&h, &layer.weights).unwrap();
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(layer.bias.data()) {
                *v += b;
            }
        }
        if l < last {
            out.extend(z.data().iter().map(|&v| v > 0.0));
            h = z.map(|v| v.max(0.0));
        }
    }
    out
}

/// One random backprop network; every parameter checked.
pub fn check_mlp(seed: u64) -> Report {
    let mut rng = Rng::new(seed ^ 0x5eed);
    let n = 1 + rng.below(6);
    let side = 2 + rng.below(2);
    let shape = ImageShape::new(1, side, side);
    let classes = 2 + rng.below(3);
    let hidden: Vec<usize> = (0..rng.below(3)).map(|_| 2 + rng.below(5)).collect();
    let net = Mlp::new(&hidden, shape, classes, AdamConfig::default(), &mut rng);
    let x = rng.uniform(n, shape.len());
    let y: Vec<usize> = (0..n).map(|_| rng.below(classes)).collect();
    let (_, grad) = net.gradient(&x, &y).unwrap();
    let base = mlp_gates(&net, &x);

    let mut report = Report::default();
    for l in 0..net.layers.len() {
        let n_w = net.layers[l].weights.data().len();
        for idx in 0..n_w + net.layers[l].outputs() {
            let perturb = |m: &mut Mlp, d: f64| {
                if idx < n_w {
                    m.layers[l].weights.data_mut()[idx] += d;
                } else {
                    m.layers[l].bias.data_mut()[idx - n_w] += d;
                }
            };
            let mut plus = net.clone();
            perturb(&mut plus, H);
            let mut minus = net.clone();
            perturb(&mut minus, -H);
            if mlp_gates(&plus, &x) != base || mlp_gates(&minus, &x) != base {
                report.skipped += 1;
                continue;
            }
            let fd = (plus.loss(&x, &y).unwrap() - minus.loss(&x, &y).unwrap()) / (2.0 * H);
            let analytic = if idx < n_w {
                grad.weights[l].data()[idx]
            } else {
                grad.biases[l].data()[idx - n_w]
            };
            report.checked += 1;
            report.worst = report.worst.max(relative_error(analytic, fd));
        }
    }
    report
}

/// `configs` layer checks and `configs` backprop checks.
pub fn check_many(configs: u64) -> (Report, Report) {
    let mut layers = Report::default();
    let mut mlps = Report::default();
    for seed in 0..configs {
        layers.absorb(check_layer(seed));
        mlps.absorb(check_mlp(seed));
    }
    (layers, mlps)
}

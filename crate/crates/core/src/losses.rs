//! Goodness and the two layer-local objectives.
//!
//! Goodness of a sample is the sum of its squared activations. Both losses
//! are softplus functions of goodness:
//!
//! - FF: `L = softplus(θ − G_pos) + softplus(G_neg − θ)`
//! - SymBa: `L = softplus(−α (G_pos − G_neg))`
//!
//! Positive and negative samples are paired by row index. Batch losses are
//! arithmetic means over pairs.
//!
//! The gradients returned here are derivatives of the *per-pair* loss with
//! respect to each goodness value. Callers average over the batch.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// `log(1 + eˣ)` without overflow for large `|x|`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function, evaluated on the branch that cannot overflow.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossConfig {
    Ff { theta: f64 },
    Symba { alpha: f64 },
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossConfig::Ff { theta } if !theta.is_finite() => {
                Err(Error::param(format!("threshold must be finite, got {theta}")))
            }
            LossConfig::Symba { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::param(format!("scale factor must be > 0, got {alpha}")))
            }
            _ => Ok(()),
        }
    }

    /// Per-pair loss.
    pub fn pair_loss(&self, g_pos: f64, g_neg: f64) -> f64 {
        match *self {
            LossConfig::Ff { theta } => softplus(theta - g_pos) + softplus(g_neg - theta),
            LossConfig::Symba { alpha } => softplus(-alpha * (g_pos - g_neg)),
        }
    }

    /// Mean loss over the pairs.
    pub fn mean_loss(&self, pair: &GoodnessPair) -> f64 {
        let n = pair.len();
        if n == 0 {
            return 0.0;
        }
        pair.g_pos
            .iter()
            .zip(&pair.g_neg)
            .map(|(&p, &q)| self.pair_loss(p, q))
            .sum::<f64>()
            / n as f64
    }
}

/// Per-sample goodness of the positive and negative branches, paired by index.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodnessPair {
    pub g_pos: Vec<f64>,
    pub g_neg: Vec<f64>,
}

impl GoodnessPair {
    pub fn new(g_pos: Vec<f64>, g_neg: Vec<f64>) -> Result<Self> {
        if g_pos.len() != g_neg.len() {
            return Err(Error::dim(
                "GoodnessPair::new",
                format!("{} positive vs {} negative samples", g_pos.len(), g_neg.len()),
            ));
        }
        if let Some(bad) = g_pos.iter().chain(&g_neg).find(|g| !(**g >= 0.0)) {
            return Err(Error::param(format!("goodness must be >= 0, got {bad}")));
        }
        Ok(Self { g_pos, g_neg })
    }

    pub fn len(&self) -> usize {
        self.g_pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g_pos.is_empty()
    }
}

/// Derivatives of the per-pair loss with respect to each goodness value.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub d_gpos: Vec<f64>,
    pub d_gneg: Vec<f64>,
}

/// Row-wise sum of squares.
pub fn goodness(activations: &Matrix) -> Result<Vec<f64>> {
    activations.ensure_finite("goodness")?;
    Ok(goodness_unchecked(activations))
}

pub(crate) fn goodness_unchecked(activations: &Matrix) -> Vec<f64> {
    activations
        .row_iter()
        .map(|row| row.iter().map(|y| y * y).sum())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfLoss {
    pub l_pos: Vec<f64>,
    pub l_neg: Vec<f64>,
    /// Mean of `l_pos + l_neg` over pairs.
    pub mean: f64,
}

pub fn ff_loss(pair: &GoodnessPair, theta: f64) -> FfLoss {
    let l_pos: Vec<f64> = pair.g_pos.iter().map(|&g| softplus(theta - g)).collect();
    let l_neg: Vec<f64> = pair.g_neg.iter().map(|&g| softplus(g - theta)).collect();
    let n = pair.len().max(1) as f64;
    let mean = l_pos.iter().zip(&l_neg).map(|(a, b)| a + b).sum::<f64>() / n;
    FfLoss { l_pos, l_neg, mean }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbaLoss {
    pub per_pair: Vec<f64>,
    pub mean: f64,
}

pub fn symba_loss(pair: &GoodnessPair, alpha: f64) -> SymbaLoss {
    let per_pair: Vec<f64> = pair
        .g_pos
        .iter()
        .zip(&pair.g_neg)
        .map(|(&p, &q)| softplus(-alpha * (p - q)))
        .collect();
    let mean = per_pair.iter().sum::<f64>() / pair.len().max(1) as f64;
    SymbaLoss { per_pair, mean }
}

pub fn loss_grad_wrt_goodness(pair: &GoodnessPair, config: &LossConfig) -> LossGrad {
    match *config {
        LossConfig::Ff { theta } => LossGrad {
            d_gpos: pair.g_pos.iter().map(|&g| -sigmoid(theta - g)).collect(),
            d_gneg: pair.g_neg.iter().map(|&g| sigmoid(g - theta)).collect(),
        },
        LossConfig::Symba { alpha } => {
            let s: Vec<f64> = pair
                .g_pos
                .iter()
                .zip(&pair.g_neg)
                .map(|(&p, &q)| alpha * sigmoid(-alpha * (p - q)))
                .collect();
            LossGrad {
                d_gpos: s.iter().map(|&x| -x).collect(),
                d_gneg: s,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub g_pos: f64,
    pub g_neg: f64,
    pub loss: f64,
}

/// Loss over a `resolution × resolution` grid of `[lo, hi]²`, G_pos-major.
pub fn loss_surface(
    config: &LossConfig,
    lo: f64,
    hi: f64,
    resolution: usize,
) -> Result<Vec<SurfacePoint>> {
    config.validate()?;
    if !(lo >= 0.0) || !hi.is_finite() || hi <= lo {
        return Err(Error::param(format!(
            "goodness range must satisfy 0 <= lo < hi, got [{lo}, {hi}]"
        )));
    }
    if resolution < 2 {
        return Err(Error::param("surface resolution must be >= 2"));
    }
    let axis: Vec<f64> = (0..resolution)
        .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64)
        .collect();
    let mut out = Vec::with_capacity(resolution * resolution);
    for &gp in &axis {
        for &gn in &axis {
            out.push(SurfacePoint {
                g_pos: gp,
                g_neg: gn,
                loss: config.pair_loss(gp, gn),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn pair(p: &[f64], n: &[f64]) -> GoodnessPair {
        GoodnessPair::new(p.to_vec(), n.to_vec()).unwrap()
    }

    #[test]
    fn goodness_hand_cases() {
        let m = Matrix::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(goodness(&m).unwrap(), vec![0.0, 25.0]);
    }

    #[test]
    fn goodness_matches_scalar_loop() {
        let m = Rng::new(5).uniform_range(8, 16, -2.0, 2.0);
        let g = goodness(&m).unwrap();
        for (r, &gr) in g.iter().enumerate() {
            let mut s = 0.0;
            for c in 0..16 {
                s += m.get(r, c).powi(2);
            }
            assert!((gr - s).abs() < 1e-12);
        }
    }

    #[test]
    fn goodness_rejects_non_finite() {
        let m = Matrix::from_rows(&[[f64::NAN]]).unwrap();
        assert!(goodness(&m).is_err());
    }

    #[test]
    fn ff_loss_reference_values() {
        let l = ff_loss(&pair(&[2.0], &[0.0]), 2.0);
        assert!((l.l_pos[0] - LN2).abs() < 1e-15);
        // log(1 + e^-2) from a 30-digit evaluation.
        assert!((l.l_neg[0] - 0.126_928_011_042_972_6).abs() < 1e-12);
        let far = ff_loss(&pair(&[1000.0], &[0.0]), 2.0);
        assert!(far.l_pos[0].is_finite() && far.l_pos[0] < 1e-300);
    }

    #[test]
    fn symba_loss_reference_values() {
        assert!((symba_loss(&pair(&[3.0], &[3.0]), 0.7).mean - LN2).abs() < 1e-15);
        // log(1 + e^-4) = 0.018149927917809...
        let l = symba_loss(&pair(&[1.0], &[0.0]), 4.0).mean;
        assert!((l - 0.018_149_927_917_809_8).abs() < 1e-12, "{l}");
        let big = symba_loss(&pair(&[0.0], &[1000.0]), 4.0).mean;
        assert!(big.is_finite() && (big - 4000.0).abs() < 1e-9);
    }

    #[test]
    fn ff_gradient_asymmetry_near_convergence() {
        let g = loss_grad_wrt_goodness(&pair(&[50.0], &[0.0]), &LossConfig::Ff { theta: 2.0 });
        assert!(g.d_gpos[0].abs() < 1e-20);
        // σ(-2) = 0.11920292202211755...
        assert!((g.d_gneg[0] - 0.119_202_922_022_117_55).abs() < 1e-12);
    }

    #[test]
    fn symba_gradients_are_exactly_antisymmetric() {
        let mut rng = Rng::new(11);
        for _ in 0..1000 {
            let p = 20.0 * rng.next_f64();
            let n = 20.0 * rng.next_f64();
            let a = 0.1 + 8.0 * rng.next_f64();
            let g = loss_grad_wrt_goodness(&pair(&[p], &[n]), &LossConfig::Symba { alpha: a });
            assert_eq!(g.d_gpos[0] + g.d_gneg[0], 0.0);
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        // Each goodness derivative is compared with a central difference of the
        // loss term that depends on it, so the other term adds no round-off.
        let mut rng = Rng::new(12);
        let h = 1e-6;
        let rel = |an: f64, fd: f64| (an - fd).abs() / an.abs().max(fd.abs()).max(1e-300);
        for _ in 0..500 {
            let p = 20.0 * rng.next_f64() + h;
            let n = 20.0 * rng.next_f64() + h;
            let theta = 2.0;
            let g = loss_grad_wrt_goodness(&pair(&[p], &[n]), &LossConfig::Ff { theta });
            let lp = |x: f64| ff_loss(&pair(&[x], &[n]), theta).l_pos[0];
            let ln = |x: f64| ff_loss(&pair(&[p], &[x]), theta).l_neg[0];
            let fd_p = (lp(p + h) - lp(p - h)) / (2.0 * h);
            let fd_n = (ln(n + h) - ln(n - h)) / (2.0 * h);
            assert!(rel(g.d_gpos[0], fd_p) < 1e-7, "ff pos p={p}: {} vs {fd_p}", g.d_gpos[0]);
            assert!(rel(g.d_gneg[0], fd_n) < 1e-7, "ff neg n={n}: {} vs {fd_n}", g.d_gneg[0]);

            let alpha = 0.5 + 4.0 * rng.next_f64();
            let g = loss_grad_wrt_goodness(&pair(&[p], &[n]), &LossConfig::Symba { alpha });
            let l = |a: f64, b: f64| symba_loss(&pair(&[a], &[b]), alpha).mean;
            let fd_p = (l(p + h, n) - l(p - h, n)) / (2.0 * h);
            let fd_n = (l(p, n + h) - l(p, n - h)) / (2.0 * h);
            assert!(rel(g.d_gpos[0], fd_p) < 1e-7, "symba pos p={p} n={n} a={alpha}");
            assert!(rel(g.d_gneg[0], fd_n) < 1e-7, "symba neg p={p} n={n} a={alpha}");
        }
    }

    #[test]
    fn surface_properties() {
        let ff = LossConfig::Ff { theta: 2.0 };
        let grid = loss_surface(&ff, 0.0, 8.0, 81).unwrap();
        assert_eq!(grid.len(), 81 * 81);
        let at = grid
            .iter()
            .find(|p| (p.g_pos - 2.0).abs() < 1e-12 && (p.g_neg - 2.0).abs() < 1e-12)
            .unwrap();
        assert!((at.loss - 2.0 * LN2).abs() < 1e-15);
        for p in &grid {
            let direct = softplus(2.0 - p.g_pos) + softplus(p.g_neg - 2.0);
            assert_eq!(p.loss, direct);
        }
        let sym = loss_surface(&LossConfig::Symba { alpha: 4.0 }, 0.0, 8.0, 81).unwrap();
        // Constant along diagonals: compare (i, j) with (i + 1, j + 1).
        for i in 0..80 {
            for j in 0..80 {
                let a = sym[i * 81 + j].loss;
                let b = sym[(i + 1) * 81 + j + 1].loss;
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn surface_rejects_bad_ranges() {
        let cfg = LossConfig::Symba { alpha: 4.0 };
        assert!(loss_surface(&cfg, -1.0, 8.0, 10).is_err());
        assert!(loss_surface(&cfg, 0.0, 8.0, 1).is_err());
        assert!(loss_surface(&cfg, 3.0, 3.0, 10).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::Symba { alpha: 0.0 }.validate().is_err());
        assert!(LossConfig::Ff { theta: f64::INFINITY }.validate().is_err());
        assert!(LossConfig::Ff { theta: -1.0 }.validate().is_ok());
    }
}

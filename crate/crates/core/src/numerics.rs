//! Dense matrices, the deterministic random stream and Adam.
//!
//! Everything numeric in the crate is `f64`. A [`Matrix`] is row-major with
//! one sample per row. Products go through `matrixmultiply::dgemm`, which
//! takes arbitrary strides, so transposed operands are never materialized.
//!
//! # Random stream
//!
//! [`Rng`] is ChaCha8 (`rand_chacha` 0.3) keyed by a 64-bit seed plus a
//! 64-bit stream id. Reals are drawn with `rand`'s `Standard` distribution
//! for `f64` (53 random mantissa bits, uniform on `[0, 1)`), bounded integers
//! with `gen_range` (widening-multiply rejection). None of these depend on
//! the platform, so a seed reproduces the same bits on every machine.

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "Matrix::from_vec",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::dim(
                    "Matrix::from_rows",
                    format!("row {i} has {} entries, expected {cols}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact(0) panics; a 0-column matrix still has `rows` empty rows.
        (0..self.rows).map(move |r| self.row(r))
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|x| x * k)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub(crate) fn ensure_finite(&self, op: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::param(format!("{op}: non-finite entry in input")))
        }
    }

    /// Column sums, i.e. the sum over samples.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for row in self.row_iter() {
            for (o, &x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy)]
enum Op {
    N,
    T,
}

fn gemm(a: &Matrix, ta: Op, b: &Matrix, tb: Op, op: &'static str) -> Result<Matrix> {
    let (m, k, rsa, csa) = match ta {
        Op::N => (a.rows, a.cols, a.cols, 1),
        Op::T => (a.cols, a.rows, 1, a.cols),
    };
    let (kb, n, rsb, csb) = match tb {
        Op::N => (b.rows, b.cols, b.cols, 1),
        Op::T => (b.cols, b.rows, 1, b.cols),
    };
    if k != kb {
        return Err(Error::dim(
            op,
            format!(
                "inner dimensions differ: {}x{} by {}x{}",
                a.rows, a.cols, b.rows, b.cols
            ),
        ));
    }
    let mut out = Matrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return Ok(out);
    }
    // SAFETY: the strides above describe exactly the allocated extents of
    // `a`, `b` (m*k and k*n values) and `out` (m*n values, row-major).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa as isize,
            csa as isize,
            b.data.as_ptr(),
            rsb as isize,
            csb as isize,
            0.0,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Ok(out)
}

/// `a · b`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    gemm(a, Op::N, b, Op::N, "matmul")
}

/// `a · bᵀ`.
pub fn matmul_bt(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    gemm(a, Op::N, b, Op::T, "matmul_bt")
}

/// `aᵀ · b`.
pub fn matmul_at(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    gemm(a, Op::T, b, Op::N, "matmul_at")
}

/// Seeded ChaCha8 stream. See the module docs for the exact algorithm.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// An independent stream under the same seed, e.g. one per consumer
    /// (initialization, shuffling, negative labels) so that adding draws to
    /// one consumer never shifts another.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform integer in `[0, n)`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    #[inline]
    pub fn coin(&mut self) -> bool {
        self.next_f64() < 0.5
    }

    pub fn uniform(&mut self, rows: usize, cols: usize) -> Matrix {
        self.uniform_range(rows, cols, 0.0, 1.0)
    }

    pub fn uniform_range(&mut self, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
        let data = (0..rows * cols)
            .map(|_| lo + (hi - lo) * self.next_f64())
            .collect();
        Matrix { rows, cols, data }
    }

    pub fn bernoulli(&mut self, rows: usize, cols: usize, p: f64) -> Result<Matrix> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param(format!("bernoulli p = {p} outside [0, 1]")));
        }
        let data = (0..rows * cols)
            .map(|_| if self.next_f64() < p { 1.0 } else { 0.0 })
            .collect();
        Ok(Matrix { rows, cols, data })
    }

    /// A uniformly random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut self.inner);
        idx
    }

    /// `k` distinct indices from `0..n`, in random order.
    pub fn sample_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.inner, n, k).into_vec()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Matrix,
    pub v: Matrix,
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize, config: AdamConfig) -> Self {
        Self {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            t: 0,
            config,
        }
    }
}

/// One bias-corrected Adam update of `param` in place.
pub fn adam_step(param: &mut Matrix, grad: &Matrix, state: &mut AdamState) -> Result<()> {
    if param.shape() != grad.shape() || param.shape() != state.m.shape() {
        return Err(Error::dim(
            "adam_step",
            format!(
                "param {:?}, grad {:?}, moments {:?}",
                param.shape(),
                grad.shape(),
                state.m.shape()
            ),
        ));
    }
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for (((p, &g), m), v) in param
        .data
        .iter_mut()
        .zip(&grad.data)
        .zip(state.m.data.iter_mut())
        .zip(state.v.data.iter_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn matmul_identity_and_hand_cases() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(matmul(&Matrix::identity(2), &a).unwrap(), a);
        let r = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let c = Matrix::from_rows(&[[3.0], [4.0]]).unwrap();
        assert_eq!(matmul(&r, &c).unwrap().data(), &[11.0]);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = Rng::new(7);
        let a = rng.uniform_range(5, 7, -1.0, 1.0);
        let b = rng.uniform_range(7, 3, -1.0, 1.0);
        let got = matmul(&a, &b).unwrap();
        assert!(got.max_abs_diff(&naive(&a, &b)) < 1e-12);
    }

    #[test]
    fn transposed_products_match_explicit_transpose() {
        let mut rng = Rng::new(8);
        let a = rng.uniform_range(4, 6, -1.0, 1.0);
        let b = rng.uniform_range(5, 6, -1.0, 1.0);
        let c = rng.uniform_range(4, 3, -1.0, 1.0);
        let abt = matmul_bt(&a, &b).unwrap();
        assert!(abt.max_abs_diff(&naive(&a, &b.transpose())) < 1e-12);
        let atc = matmul_at(&a, &c).unwrap();
        assert!(atc.max_abs_diff(&naive(&a.transpose(), &c)) < 1e-12);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        assert!(matches!(matmul(&a, &b), Err(Error::Dimension { .. })));
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let mut p = Matrix::from_rows(&[[1.0, -2.0, 3.5]]).unwrap();
        let before = p.clone();
        let mut st = AdamState::new(1, 3, AdamConfig::default());
        adam_step(&mut p, &Matrix::zeros(1, 3), &mut st).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn adam_first_step_closed_form() {
        // At t = 1 the bias corrections cancel: m̂ = g, v̂ = g².
        let lr = 0.01;
        let eps = 1e-8;
        let g = [0.5, -3.0, 1e-3];
        let mut p = Matrix::from_rows(&[[1.0, 1.0, 1.0]]).unwrap();
        let grad = Matrix::from_rows(&[g]).unwrap();
        let mut st = AdamState::new(1, 3, AdamConfig::with_lr(lr));
        adam_step(&mut p, &grad, &mut st).unwrap();
        for (i, &gi) in g.iter().enumerate() {
            let want = 1.0 - lr * gi / (gi.abs() + eps);
            assert!((p.get(0, i) - want).abs() < 1e-12, "{i}");
        }
    }

    #[test]
    fn adam_minimizes_square() {
        let mut x = Matrix::from_rows(&[[1.0]]).unwrap();
        let mut st = AdamState::new(1, 1, AdamConfig::with_lr(0.1));
        for _ in 0..100 {
            let g = x.scale(2.0);
            adam_step(&mut x, &g, &mut st).unwrap();
        }
        assert!(x.get(0, 0).abs() < 0.5, "{}", x.get(0, 0));
    }

    #[test]
    fn rng_is_deterministic_and_streams_differ() {
        let a = Rng::new(42).uniform(3, 4);
        let b = Rng::new(42).uniform(3, 4);
        assert_eq!(a.data(), b.data());
        let c = Rng::with_stream(42, 1).uniform(3, 4);
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn bernoulli_edges_and_mean() {
        let mut rng = Rng::new(3);
        assert!(rng.bernoulli(4, 5, 0.0).unwrap().data().iter().all(|&x| x == 0.0));
        assert!(rng.bernoulli(4, 5, 1.0).unwrap().data().iter().all(|&x| x == 1.0));
        let m = rng.bernoulli(1, 10_000, 0.1).unwrap();
        let mean = m.data().iter().sum::<f64>() / 10_000.0;
        assert!((0.08..=0.12).contains(&mean), "{mean}");
        assert!(rng.bernoulli(1, 1, 1.5).is_err());
        assert!(rng.bernoulli(1, 1, -0.1).is_err());
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut p = Rng::new(1).permutation(100);
        p.sort_unstable();
        assert_eq!(p, (0..100).collect::<Vec<_>>());
    }
}

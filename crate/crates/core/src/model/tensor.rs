//! Dense row-major f64 matrices and the handful of kernels the encoder needs.

use rand::Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape {rows}x{cols} vs {} values", data.len());
        Matrix { rows, cols, data }
    }

    pub fn random_normal<R: Rng>(rows: usize, cols: usize, std: f64, rng: &mut R) -> Self {
        let dist = Normal::new(0.0, std).expect("std is finite and positive");
        Matrix { rows, cols, data: (0..rows * cols).map(|_| dist.sample(rng)).collect() }
    }

    pub fn zeros_like(other: &Matrix) -> Self {
        Matrix::zeros(other.rows, other.cols)
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }
}

/// `x (n x k) * w (k x m) + b (1 x m)`.
pub fn affine(x: &Matrix, w: &Matrix, b: &Matrix) -> Matrix {
    debug_assert_eq!(x.cols, w.rows);
    debug_assert_eq!(b.cols, w.cols);
    let mut out = Matrix::zeros(x.rows, w.cols);
    for i in 0..x.rows {
        let orow = &mut out.data[i * w.cols..(i + 1) * w.cols];
        orow.copy_from_slice(&b.data);
        for (k, &xv) in x.row(i).iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wrow = w.row(k);
            for (o, &wv) in orow.iter_mut().zip(wrow) {
                *o += xv * wv;
            }
        }
    }
    out
}

/// Backward of [`affine`]: accumulates `dw += x^T dy`, `db += colsum(dy)` and
/// returns `dx = dy w^T`.
pub fn affine_backward(x: &Matrix, w: &Matrix, dy: &Matrix, dw: &mut Matrix, db: &mut Matrix) -> Matrix {
    debug_assert_eq!(dy.cols, w.cols);
    let mut dx = Matrix::zeros(x.rows, w.rows);
    for i in 0..x.rows {
        let dyrow = dy.row(i);
        for (b, &g) in db.data.iter_mut().zip(dyrow) {
            *b += g;
        }
        let xrow = x.row(i);
        for (k, &xv) in xrow.iter().enumerate() {
            let wrow = w.row(k);
            let dwrow = &mut dw.data[k * w.cols..(k + 1) * w.cols];
            let mut acc = 0.0;
            for ((dwv, &wv), &g) in dwrow.iter_mut().zip(wrow).zip(dyrow) {
                *dwv += xv * g;
                acc += wv * g;
            }
            dx.data[i * w.rows + k] = acc;
        }
    }
    dx
}

/// Per-row layer normalization cache.
#[derive(Debug, Clone)]
pub struct LayerNormCache {
    pub xhat: Matrix,
    pub inv_std: Vec<f64>,
}

pub fn layer_norm(x: &Matrix, gamma: &Matrix, beta: &Matrix, eps: f64) -> (Matrix, LayerNormCache) {
    let n = x.cols as f64;
    let mut out = Matrix::zeros(x.rows, x.cols);
    let mut xhat = Matrix::zeros(x.rows, x.cols);
    let mut inv_std = Vec::with_capacity(x.rows);
    for r in 0..x.rows {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let is = 1.0 / (var + eps).sqrt();
        inv_std.push(is);
        for (c, &v) in row.iter().enumerate() {
            let h = (v - mean) * is;
            xhat.data[r * x.cols + c] = h;
            out.data[r * x.cols + c] = h * gamma.data[c] + beta.data[c];
        }
    }
    (out, LayerNormCache { xhat, inv_std })
}

pub fn layer_norm_backward(
    cache: &LayerNormCache,
    gamma: &Matrix,
    dy: &Matrix,
    dgamma: &mut Matrix,
    dbeta: &mut Matrix,
) -> Matrix {
    let cols = dy.cols;
    let n = cols as f64;
    let mut dx = Matrix::zeros(dy.rows, cols);
    let mut dxhat = vec![0.0; cols];
    for r in 0..dy.rows {
        let dyrow = dy.row(r);
        let xh = cache.xhat.row(r);
        let mut sum_d = 0.0;
        let mut sum_dx = 0.0;
        for c in 0..cols {
            dgamma.data[c] += dyrow[c] * xh[c];
            dbeta.data[c] += dyrow[c];
            dxhat[c] = dyrow[c] * gamma.data[c];
            sum_d += dxhat[c];
            sum_dx += dxhat[c] * xh[c];
        }
        let is = cache.inv_std[r];
        let out = dx.row_mut(r);
        for c in 0..cols {
            out[c] = is / n * (n * dxhat[c] - sum_d - xh[c] * sum_dx);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

/// Tanh-approximated GELU.
#[inline]
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

#[inline]
pub fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Numerically stable softmax of a slice, in place.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

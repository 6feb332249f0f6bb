//! Dense kernel shared by both grounder families.
//!
//! Storage is row-major and contiguous. Reductions run in a fixed order so the
//! same inputs always produce the same bits.

mod spectral;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub use spectral::{spectral_radius, PowerIteration};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
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

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("Matrix::from_vec", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim("Matrix::from_rows", cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn nonzero_count(&self) -> usize {
        self.data.iter().filter(|&&x| x != 0.0).count()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `k` square `d x d` slices stored back to back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    slices: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(slices: usize, dim: usize) -> Self {
        Self {
            slices,
            dim,
            data: vec![0.0; slices * dim * dim],
        }
    }

    pub fn from_slices(slices: &[Matrix]) -> Result<Self> {
        let dim = slices.first().map_or(0, Matrix::rows);
        let mut data = Vec::with_capacity(slices.len() * dim * dim);
        for s in slices {
            check_dim("Tensor3 slice rows", dim, s.rows())?;
            check_dim("Tensor3 slice cols", dim, s.cols())?;
            data.extend_from_slice(s.as_slice());
        }
        Ok(Self {
            slices: slices.len(),
            dim,
            data,
        })
    }

    pub fn slices(&self) -> usize {
        self.slices
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slice(&self, i: usize) -> &[f64] {
        let s = self.dim * self.dim;
        &self.data[i * s..(i + 1) * s]
    }

    pub fn slice_mut(&mut self, i: usize) -> &mut [f64] {
        let s = self.dim * self.dim;
        &mut self.data[i * s..(i + 1) * s]
    }

    pub fn slice_matrix(&self, i: usize) -> Matrix {
        Matrix {
            rows: self.dim,
            cols: self.dim,
            data: self.slice(i).to_vec(),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `out[i] = vᵀ W_i v` for every slice of `w`.
pub fn bilinear_form(v: &[f64], w: &Tensor3) -> Result<Vec<f64>> {
    check_dim("bilinear_form", w.dim(), v.len())?;
    let d = w.dim();
    let mut out = Vec::with_capacity(w.slices());
    for i in 0..w.slices() {
        let s = w.slice(i);
        let mut acc = 0.0;
        for r in 0..d {
            acc += v[r] * dot(&s[r * d..(r + 1) * d], v);
        }
        out.push(acc);
    }
    Ok(out)
}

pub fn matvec(m: &Matrix, v: &[f64]) -> Result<Vec<f64>> {
    check_dim("matvec", m.cols(), v.len())?;
    Ok((0..m.rows()).map(|r| dot(m.row(r), v)).collect())
}

/// `M v + b`.
pub fn affine(m: &Matrix, v: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    check_dim("affine bias", m.rows(), b.len())?;
    let mut out = matvec(m, v)?;
    for (o, bi) in out.iter_mut().zip(b) {
        *o += bi;
    }
    Ok(out)
}

/// Hyperbolic tangent through one `exp`, with a Taylor branch near zero.
/// Absolute error stays within a few ulps of 1; about three times faster
/// than `f64::tanh`, which dominates reservoir training.
#[inline]
pub fn tanh(x: f64) -> f64 {
    if x.abs() < 0.02 {
        let x2 = x * x;
        x * (1.0 - x2 * (1.0 / 3.0 - x2 * (2.0 / 15.0 - x2 * 17.0 / 315.0)))
    } else {
        1.0 - 2.0 / ((2.0 * x).exp() + 1.0)
    }
}

pub fn tanh_map(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| tanh(x)).collect()
}

const SIGMOID_LO: f64 = f64::MIN_POSITIVE;
const SIGMOID_HI: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic function, clamped so the result never rounds to exactly 0 or 1.
pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(SIGMOID_LO, SIGMOID_HI)
}

/// Row-major `C = alpha * op(A) op(B) + beta * C` with `op` an optional transpose.
///
/// `op(A)` is `m x k`, `op(B)` is `k x n`, `C` is `m x n`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k, "gemm: A has wrong length");
    assert_eq!(b.len(), k * n, "gemm: B has wrong length");
    assert_eq!(c.len(), m * n, "gemm: C has wrong length");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for x in c.iter_mut() {
            *x *= beta;
        }
        return;
    }
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: lengths checked above; strides describe in-bounds row-major layouts.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_dim("matmul", a.cols(), b.rows())?;
    let mut c = Matrix::zeros(a.rows(), b.cols());
    gemm(
        a.rows(),
        a.cols(),
        b.cols(),
        1.0,
        a.as_slice(),
        false,
        b.as_slice(),
        false,
        0.0,
        c.as_mut_slice(),
    );
    Ok(c)
}

/// Solves `A x = B` for symmetric positive definite `A` by Cholesky.
/// `b` holds one right-hand side per column.
pub fn cholesky_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::NonSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    check_dim("cholesky_solve", a.rows(), b.rows())?;
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    let scale = a
        .as_slice()
        .iter()
        .fold(0.0_f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut d = a.get(j, j);
        for p in 0..j {
            d -= l.get(j, p) * l.get(j, p);
        }
        if d <= scale * 1e-14 {
            return Err(Error::Singular);
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for p in 0..j {
                s -= l.get(i, p) * l.get(j, p);
            }
            l.set(i, j, s / d);
        }
    }
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x.get(i, c);
            for p in 0..i {
                s -= l.get(i, p) * x.get(p, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
        for i in (0..n).rev() {
            let mut s = x.get(i, c);
            for p in i + 1..n {
                s -= l.get(p, i) * x.get(p, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
    }
    Ok(x)
}

//! Reservoir recipe: sparse random weights scaled to a target spectral radius,
//! sign-randomized input weights, and a plain echo state network with a
//! closed-form ridge readout.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{cholesky_solve, dot, gemm, spectral_radius, Matrix};
use crate::rng;

/// Tolerance used whenever a reservoir is rescaled.
pub const SCALING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservoirConfig {
    /// Target spectral radius.
    pub rho: f64,
    /// Fraction of nonzero connections.
    pub beta: f64,
    /// Number of reservoir units (R).
    pub units: usize,
    /// Input weights are drawn with magnitude in `[0, omega]`.
    pub omega: f64,
    /// Standard deviation of the state noise.
    pub xi: f64,
    pub seed: u64,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self {
            rho: 0.6,
            beta: 0.25,
            units: 200,
            omega: 0.5,
            xi: 0.01,
            seed: 0,
        }
    }
}

impl ReservoirConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::Config(format!("rho must be > 0, got {}", self.rho)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta must be in (0, 1], got {}", self.beta)));
        }
        if self.units == 0 {
            return Err(Error::Config("reservoir needs at least one unit".into()));
        }
        if !(self.omega >= 0.0) || !(self.xi >= 0.0) {
            return Err(Error::Config("omega and xi must be >= 0".into()));
        }
        Ok(())
    }
}

pub(crate) fn sparse_matrix_from<R: Rng>(rng: &mut R, rows: usize, cols: usize, beta: f64) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for x in m.as_mut_slice() {
        // Both draws happen for every entry so the value stream does not depend on beta.
        let keep: f64 = rng.gen();
        let value: f64 = rng.gen_range(-1.0..=1.0);
        if keep < beta {
            *x = value;
        }
    }
    m
}

/// Each entry is nonzero with probability `beta`, nonzero values uniform on `[-1, 1]`.
pub fn gen_sparse_matrix(rows: usize, cols: usize, beta: f64, seed: u64) -> Matrix {
    sparse_matrix_from(&mut rng::stream(seed, "sparse", &[]), rows, cols, beta)
}

/// Rescales `m` so its spectral radius equals `rho`.
pub fn scale_to_spectral_radius(m: &Matrix, rho: f64) -> Result<Matrix> {
    let current = spectral_radius(m, SCALING_TOL)?;
    if current == 0.0 {
        return Err(Error::ZeroSpectralRadius);
    }
    Ok(m.scaled(rho / current))
}

pub(crate) fn input_weights_from<R: Rng>(rng: &mut R, rows: usize, cols: usize, omega: f64) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for x in m.as_mut_slice() {
        let magnitude: f64 = rng.gen::<f64>() * omega;
        let negative: bool = rng.gen_bool(0.5);
        *x = if negative { -magnitude } else { magnitude };
    }
    m
}

/// Magnitudes uniform on `[0, omega]` with independent fair random signs.
pub fn gen_input_weights(rows: usize, cols: usize, omega: f64, seed: u64) -> Matrix {
    input_weights_from(&mut rng::stream(seed, "input-weights", &[]), rows, cols, omega)
}

/// Echo state network: frozen input and recurrent weights plus a linear readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsnParams {
    /// `R x d_in`.
    pub input: Matrix,
    /// `R x R`.
    pub recurrent: Matrix,
    /// `d_out x R`.
    pub readout: Matrix,
    pub readout_bias: Vec<f64>,
}

impl EsnParams {
    pub fn generate(config: &ReservoirConfig, d_in: usize, d_out: usize) -> Result<Self> {
        config.validate()?;
        let r = config.units;
        let mut rng_rec = rng::stream(config.seed, "esn-recurrent", &[]);
        let recurrent = sparse_matrix_from(&mut rng_rec, r, r, config.beta);
        let recurrent = scale_to_spectral_radius(&recurrent, config.rho)?;
        let mut rng_in = rng::stream(config.seed, "esn-input", &[]);
        let input = input_weights_from(&mut rng_in, r, d_in, config.omega);
        Ok(Self {
            input,
            recurrent,
            readout: Matrix::zeros(d_out, r),
            readout_bias: vec![0.0; d_out],
        })
    }

    pub fn units(&self) -> usize {
        self.recurrent.rows()
    }

    /// Readout applied to one state.
    pub fn predict(&self, state: &[f64]) -> Vec<f64> {
        (0..self.readout.rows())
            .map(|o| dot(self.readout.row(o), state) + self.readout_bias[o])
            .collect()
    }
}

/// Runs the reservoir from a zero state; row `t` of the result is `h(t+1)`.
pub fn esn_run(params: &EsnParams, inputs: &[Vec<f64>], xi: f64, seed: u64) -> Result<Matrix> {
    let r = params.units();
    check_dim("esn_run recurrent", r, params.recurrent.cols())?;
    check_dim("esn_run input rows", r, params.input.rows())?;
    let mut noise = rng::stream(seed, "esn-noise", &[]);
    let mut states = Matrix::zeros(inputs.len(), r);
    let mut h = vec![0.0; r];
    for (t, x) in inputs.iter().enumerate() {
        check_dim("esn_run input", params.input.cols(), x.len())?;
        let mut next = vec![0.0; r];
        for (i, n) in next.iter_mut().enumerate() {
            let mut a = dot(params.input.row(i), x) + dot(params.recurrent.row(i), &h);
            if xi > 0.0 {
                let e: f64 = StandardNormal.sample(&mut noise);
                a += xi * e;
            }
            *n = a.tanh();
        }
        states.row_mut(t).copy_from_slice(&next);
        h = next;
    }
    Ok(states)
}

/// Closed-form minimizer of `½‖V r + v − y‖² + λ‖V‖²` summed over rows.
///
/// Solved through the normal equations of the bias-augmented states; the
/// bias column is not penalized.
pub fn ridge_readout(states: &Matrix, targets: &Matrix, lambda: f64) -> Result<(Matrix, Vec<f64>)> {
    check_dim("ridge_readout rows", states.rows(), targets.rows())?;
    if !(lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be >= 0, got {lambda}")));
    }
    let (n, r) = (states.rows(), states.cols());
    let d_out = targets.cols();
    let mut aug = Matrix::zeros(n, r + 1);
    for i in 0..n {
        aug.row_mut(i)[..r].copy_from_slice(states.row(i));
        aug.row_mut(i)[r] = 1.0;
    }
    let mut gram = Matrix::zeros(r + 1, r + 1);
    gemm(
        r + 1,
        n,
        r + 1,
        1.0,
        aug.as_slice(),
        true,
        aug.as_slice(),
        false,
        0.0,
        gram.as_mut_slice(),
    );
    for i in 0..r {
        let d = gram.get(i, i);
        gram.set(i, i, d + 2.0 * lambda);
    }
    let mut rhs = Matrix::zeros(r + 1, d_out);
    gemm(
        r + 1,
        n,
        d_out,
        1.0,
        aug.as_slice(),
        true,
        targets.as_slice(),
        false,
        0.0,
        rhs.as_mut_slice(),
    );
    let sol = cholesky_solve(&gram, &rhs)?;
    let mut readout = Matrix::zeros(d_out, r);
    let mut bias = vec![0.0; d_out];
    for o in 0..d_out {
        for i in 0..r {
            readout.set(o, i, sol.get(i, o));
        }
        bias[o] = sol.get(r, o);
    }
    Ok((readout, bias))
}

/// Value of the ridge objective for a given readout.
pub fn ridge_objective(states: &Matrix, targets: &Matrix, readout: &Matrix, bias: &[f64], lambda: f64) -> f64 {
    let mut loss = 0.0;
    for i in 0..states.rows() {
        for o in 0..targets.cols() {
            let e = dot(readout.row(o), states.row(i)) + bias[o] - targets.get(i, o);
            loss += 0.5 * e * e;
        }
    }
    loss + lambda * readout.as_slice().iter().map(|w| w * w).sum::<f64>()
}

use rand_distr::{Distribution, StandardNormal};

use super::{dot, norm, Matrix};
use crate::error::{Error, Result};
use crate::rng;

/// Power iteration for the largest eigenvalue magnitude.
///
/// Each step projects `M` onto the Krylov pair `span{v, Mv}` and reads the
/// Ritz values of the 2x2 projection. A real dominant eigenvalue shows up as
/// the Rayleigh quotient; a dominant complex-conjugate pair (including
/// `±λ`) shows up as the complex root of the projected quadratic. Convergence
/// is declared from the Ritz residual, not from successive differences.
///
/// When a start vector stagnates the run is restarted from a fresh draw. If
/// every restart stagnates (more than two eigenvalues share the top modulus,
/// e.g. a pure cycle) the estimate falls back to Gelfand's formula evaluated
/// by repeated normalized squaring, which converges for any spectrum.
#[derive(Debug, Clone)]
pub struct PowerIteration {
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    pub squaring_fallback: bool,
}

impl PowerIteration {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            max_iter: 20_000,
            restarts: 2,
            seed: 0x5eed,
            squaring_fallback: true,
        }
    }

    pub fn run(&self, m: &Matrix) -> Result<f64> {
        if !m.is_square() {
            return Err(Error::NonSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        let n = m.rows();
        if n == 0 || m.as_slice().iter().all(|&x| x == 0.0) {
            return Ok(0.0);
        }
        if n == 1 {
            return Ok(m.get(0, 0).abs());
        }
        let mut last = f64::NAN;
        for attempt in 0..=self.restarts {
            match self.attempt(m, attempt as u64) {
                Ok(rho) => return Ok(rho),
                Err(est) => last = est,
            }
        }
        if self.squaring_fallback {
            return Ok(gelfand_squaring(m));
        }
        Err(Error::NotConverged {
            iterations: self.max_iter * (self.restarts + 1),
            estimate: last,
        })
    }

    fn attempt(&self, m: &Matrix, attempt: u64) -> std::result::Result<f64, f64> {
        let n = m.rows();
        let mut rng = rng::stream(self.seed, "power-iteration", &[attempt]);
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);

        let mut w = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut q2 = vec![0.0; n];
        let mut estimate = f64::NAN;

        for _ in 0..self.max_iter {
            mul(m, &v, &mut w);
            let nw = norm(&w);
            if nw == 0.0 {
                // M^j v = 0 for a generic v means M is nilpotent.
                return Ok(0.0);
            }
            let h11 = dot(&v, &w);
            for i in 0..n {
                q2[i] = w[i] - h11 * v[i];
            }
            let beta = norm(&q2);

            if beta <= 1e-13 * nw {
                estimate = h11.abs();
                if beta <= self.tol * estimate.max(f64::MIN_POSITIVE) {
                    return Ok(estimate);
                }
            } else {
                q2.iter_mut().for_each(|x| *x /= beta);
                mul(m, &q2, &mut z);
                let h12 = dot(&v, &z);
                let h22 = dot(&q2, &z);
                // Residual of the projection lives entirely in the second column.
                let mut s2 = 0.0;
                for i in 0..n {
                    let r = z[i] - h12 * v[i] - h22 * q2[i];
                    s2 += r * r;
                }
                let s = s2.sqrt();

                let half_tr = 0.5 * (h11 + h22);
                let det = h11 * h22 - h12 * beta;
                let disc = half_tr * half_tr - det;
                let (theta, resid) = if disc < 0.0 {
                    (det.sqrt(), s)
                } else {
                    let root = disc.sqrt();
                    let l1 = half_tr + root;
                    let l2 = half_tr - root;
                    let theta = if l1.abs() >= l2.abs() { l1 } else { l2 };
                    // Eigenvector of [[h11, h12], [beta, h22]] for theta.
                    let (y1, y2) = if (theta - h22).abs() + beta.abs() > 0.0 {
                        (theta - h22, beta)
                    } else {
                        (h12, theta - h11)
                    };
                    let ny = (y1 * y1 + y2 * y2).sqrt();
                    let y2 = if ny > 0.0 { y2 / ny } else { 1.0 };
                    (theta.abs(), (y2 * s).abs())
                };
                estimate = theta;
                if resid <= self.tol * theta.max(f64::MIN_POSITIVE) {
                    return Ok(theta);
                }
            }
            for i in 0..n {
                v[i] = w[i] / nw;
            }
        }
        Err(estimate)
    }
}

fn mul(m: &Matrix, v: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        *o = dot(m.row(r), v);
    }
}

/// `ρ(M) = lim ‖M^(2^j)‖^(1/2^j)`, tracked in log space.
fn gelfand_squaring(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut cur = m.clone();
    let mut log_scale = 0.0_f64;
    let mut next = Matrix::zeros(n, n);
    let mut estimate = 0.0;
    for j in 0..40 {
        let fro = norm(cur.as_slice());
        if fro == 0.0 {
            return 0.0;
        }
        cur.as_mut_slice().iter_mut().for_each(|x| *x /= fro);
        // cur * 2^... carries log_scale + ln(fro) per 2^j powers of M
        log_scale += fro.ln() / f64::powi(2.0, j);
        estimate = log_scale.exp();
        super::gemm(
            n,
            n,
            n,
            1.0,
            cur.as_slice(),
            false,
            cur.as_slice(),
            false,
            0.0,
            next.as_mut_slice(),
        );
        std::mem::swap(&mut cur, &mut next);
    }
    estimate
}

/// Spectral radius of a square matrix to relative accuracy `tol`.
pub fn spectral_radius(m: &Matrix, tol: f64) -> Result<f64> {
    PowerIteration::new(tol).run(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_oracle(m: &Matrix) -> f64 {
        let n = m.rows();
        if m.as_slice().iter().all(|&x| x == 0.0) {
            // nalgebra's Schur never terminates on the zero matrix
            return 0.0;
        }
        let dm = nalgebra::DMatrix::from_row_slice(n, n, m.as_slice());
        dm.try_schur(1e-13, 1_000_000)
            .expect("oracle Schur decomposition converges")
            .complex_eigenvalues()
            .iter()
            .map(|c| c.re.hypot(c.im))
            .fold(0.0, f64::max)
    }

    #[test]
    fn diagonal() {
        let r = spectral_radius(&Matrix::diag(&[0.6, 0.1]), 1e-12).unwrap();
        assert!((r - 0.6).abs() < 1e-12);
    }

    #[test]
    fn rotation_by_ninety_degrees() {
        let m = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let r = spectral_radius(&m, 1e-12).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plus_minus_pair() {
        let m = Matrix::diag(&[0.9, -0.9, 0.3]);
        let r = spectral_radius(&m, 1e-12).unwrap();
        assert!((r - 0.9).abs() < 1e-12);
    }

    #[test]
    fn three_cycle_uses_fallback() {
        let mut m = Matrix::zeros(3, 3);
        m.set(0, 1, 2.0);
        m.set(1, 2, 2.0);
        m.set(2, 0, 2.0);
        let r = spectral_radius(&m, 1e-10).unwrap();
        assert!((r - 2.0).abs() < 1e-6, "{r}");
    }

    #[test]
    fn three_cycle_without_fallback_reports_failure() {
        let mut m = Matrix::zeros(3, 3);
        m.set(0, 1, 1.0);
        m.set(1, 2, 1.0);
        m.set(2, 0, 1.0);
        let mut pi = PowerIteration::new(1e-10);
        pi.max_iter = 500;
        pi.squaring_fallback = false;
        assert!(matches!(pi.run(&m), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn nilpotent_and_zero() {
        let mut m = Matrix::zeros(3, 3);
        m.set(0, 1, 1.0);
        m.set(1, 2, 1.0);
        assert_eq!(spectral_radius(&m, 1e-10).unwrap(), 0.0);
        assert_eq!(spectral_radius(&Matrix::zeros(2, 2), 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn non_square_rejected() {
        assert!(matches!(
            spectral_radius(&Matrix::zeros(2, 3), 1e-6),
            Err(Error::NonSquare { .. })
        ));
    }

    #[test]
    fn random_sparse_matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..10 {
            let n = 50;
            let mut m = Matrix::zeros(n, n);
            for x in m.as_mut_slice() {
                if rng.gen_bool(0.25) {
                    *x = rng.gen_range(-1.0..1.0);
                }
            }
            let got = spectral_radius(&m, 1e-12).unwrap();
            let want = dense_oracle(&m);
            assert!((got - want).abs() < 1e-6, "trial {trial}: {got} vs {want}");
        }
    }

    #[test]
    fn small_sparse_slices_match_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..300 {
            let n = rng.gen_range(2..=12);
            let mut m = Matrix::zeros(n, n);
            for x in m.as_mut_slice() {
                if rng.gen_bool(0.25) {
                    *x = rng.gen_range(-1.0..1.0);
                }
            }
            let got = spectral_radius(&m, 1e-12).unwrap();
            let want = dense_oracle(&m);
            assert!((got - want).abs() < 1e-6, "{got} vs {want} for {m:?}");
        }
    }
}

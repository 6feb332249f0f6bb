//! Batched forward and backward passes for the trainable grounders.

use std::sync::Arc;

use crate::error::Result;
use crate::grounders::{fill_noise, Grounder, RwtnEncoderParams};
use crate::linalg::{gemm, sigmoid, tanh, Matrix};
use crate::semantics::{predicate_noise_rng, Mode};

/// Encoder pre-activations shared between predicates that read the same
/// encoder on the same inputs.
#[derive(Default)]
pub(super) struct EncoderCache {
    entries: Vec<(usize, Matrix, Arc<Matrix>, Arc<Matrix>)>,
}

impl EncoderCache {
    fn get(&mut self, enc: &Arc<RwtnEncoderParams>, x: &Matrix) -> (Arc<Matrix>, Arc<Matrix>) {
        let key = Arc::as_ptr(enc) as usize;
        if let Some((_, _, a, z)) = self.entries.iter().find(|(k, m, _, _)| *k == key && m == x) {
            return (Arc::clone(a), Arc::clone(z));
        }
        let a = pre_activations(enc, x);
        let mut z = a.clone();
        z.as_mut_slice().iter_mut().for_each(|v| *v = tanh(*v));
        let (a, z) = (Arc::new(a), Arc::new(z));
        self.entries.push((key, x.clone(), Arc::clone(&a), Arc::clone(&z)));
        (a, z)
    }
}

/// Row `n` of the result is `x_nᵀ W_i x_n + (V_in x_n)_i` over units `i`.
fn pre_activations(enc: &RwtnEncoderParams, x: &Matrix) -> Matrix {
    let (n, d, r) = (x.rows(), x.cols(), enc.units());
    let mut a = Matrix::zeros(n, r);
    gemm(n, d, r, 1.0, x.as_slice(), false, enc.input.as_slice(), true, 0.0, a.as_mut_slice());
    let mut xw = vec![0.0; n * d];
    for i in 0..r {
        gemm(n, d, d, 1.0, x.as_slice(), false, enc.tensor.slice(i), false, 0.0, &mut xw);
        for row in 0..n {
            let q: f64 = xw[row * d..(row + 1) * d].iter().zip(x.row(row)).map(|(p, q)| p * q).sum();
            a.set(row, i, a.get(row, i) + q);
        }
    }
    a
}

pub(super) enum Head {
    Ltn(LtnHead),
    Rwtn(RwtnHead),
}

impl Head {
    pub(super) fn new(
        name: &str,
        grounder: &Grounder,
        slots: Vec<u32>,
        inputs: Matrix,
        cache: &mut EncoderCache,
    ) -> Result<Self> {
        match grounder {
            Grounder::Ltn(p) => {
                crate::error::check_dim("ltn inputs", p.dim(), inputs.cols())?;
                Ok(Head::Ltn(LtnHead {
                    name: name.to_string(),
                    slots,
                    x: inputs,
                    k: p.k(),
                    theta: grounder.params_flat(),
                    hidden: Vec::new(),
                    out: Vec::new(),
                }))
            }
            Grounder::Rwtn { encoder, decoder } => {
                crate::error::check_dim("rwtn inputs", encoder.dim(), inputs.cols())?;
                crate::error::check_dim("rwtn units", encoder.units(), decoder.units())?;
                let (pre, z0) = cache.get(encoder, &inputs);
                Ok(Head::Rwtn(RwtnHead {
                    name: name.to_string(),
                    slots,
                    units: encoder.units(),
                    t: decoder.t(),
                    xi: encoder.xi,
                    pre,
                    z0,
                    z_train: None,
                    used_train: false,
                    theta: grounder.params_flat(),
                    hidden: Vec::new(),
                    out: Vec::new(),
                }))
            }
            _ => unreachable!("only learnable grounders get a head"),
        }
    }

    pub(super) fn name(&self) -> &str {
        match self {
            Head::Ltn(h) => &h.name,
            Head::Rwtn(h) => &h.name,
        }
    }

    pub(super) fn params(&self) -> &[f64] {
        match self {
            Head::Ltn(h) => &h.theta,
            Head::Rwtn(h) => &h.theta,
        }
    }

    pub(super) fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Head::Ltn(h) => &mut h.theta,
            Head::Rwtn(h) => &mut h.theta,
        }
    }

    /// Drops cached activations after an update.
    pub(super) fn params_changed(&mut self) {
        match self {
            Head::Ltn(h) => h.out.clear(),
            Head::Rwtn(h) => h.out.clear(),
        }
    }

    pub(super) fn penalty(&self) -> f64 {
        self.params().iter().map(|x| x * x).sum()
    }

    pub(super) fn is_noisy(&self) -> bool {
        matches!(self, Head::Rwtn(h) if h.xi > 0.0)
    }

    pub(super) fn forward(&mut self, mode: Mode, atoms: &mut [f64]) {
        let (slots, out) = match self {
            Head::Ltn(h) => {
                h.forward();
                (&h.slots, &h.out)
            }
            Head::Rwtn(h) => {
                h.forward(mode);
                (&h.slots, &h.out)
            }
        };
        for (&s, &v) in slots.iter().zip(out) {
            atoms[s as usize] = v;
        }
    }

    /// Parameter gradient given the loss derivative with respect to every atom.
    pub(super) fn backward(&self, atom_adj: &[f64]) -> Vec<f64> {
        match self {
            Head::Ltn(h) => h.backward(&h.output_adj(atom_adj)),
            Head::Rwtn(h) => h.backward(&h.output_adj(atom_adj)),
        }
    }
}

fn sigmoid_adj(slots: &[u32], out: &[f64], atom_adj: &[f64]) -> Vec<f64> {
    slots
        .iter()
        .zip(out)
        .map(|(&s, &o)| atom_adj[s as usize] * o * (1.0 - o))
        .collect()
}

/// Flat layout: tensor (`k*d*d`), linear (`k*d`), bias (`k`), output (`k`).
pub(super) struct LtnHead {
    name: String,
    slots: Vec<u32>,
    x: Matrix,
    k: usize,
    theta: Vec<f64>,
    hidden: Vec<f64>,
    out: Vec<f64>,
}

impl LtnHead {
    fn offsets(&self) -> (usize, usize, usize) {
        let d = self.x.cols();
        let t = self.k * d * d;
        (t, t + self.k * d, t + self.k * d + self.k)
    }

    fn forward(&mut self) {
        if !self.out.is_empty() {
            return;
        }
        let (n, d, k) = (self.x.rows(), self.x.cols(), self.k);
        let (lin_at, bias_at, out_at) = self.offsets();
        let mut pre = vec![0.0; n * k];
        gemm(n, d, k, 1.0, self.x.as_slice(), false, &self.theta[lin_at..bias_at], true, 0.0, &mut pre);
        let mut xw = vec![0.0; n * d];
        for i in 0..k {
            gemm(n, d, d, 1.0, self.x.as_slice(), false, &self.theta[i * d * d..(i + 1) * d * d], false, 0.0, &mut xw);
            for row in 0..n {
                let q: f64 = xw[row * d..(row + 1) * d].iter().zip(self.x.row(row)).map(|(a, b)| a * b).sum();
                pre[row * k + i] += q + self.theta[bias_at + i];
            }
        }
        pre.iter_mut().for_each(|v| *v = tanh(*v));
        let u = &self.theta[out_at..];
        self.out = pre
            .chunks(k)
            .map(|h| sigmoid(h.iter().zip(u).map(|(a, b)| a * b).sum()))
            .collect();
        self.hidden = pre;
    }

    fn output_adj(&self, atom_adj: &[f64]) -> Vec<f64> {
        sigmoid_adj(&self.slots, &self.out, atom_adj)
    }

    fn backward(&self, g: &[f64]) -> Vec<f64> {
        let (n, d, k) = (self.x.rows(), self.x.cols(), self.k);
        let (lin_at, bias_at, out_at) = self.offsets();
        let mut grad = vec![0.0; self.theta.len()];
        let mut delta = vec![0.0; n * k];
        for row in 0..n {
            let h = &self.hidden[row * k..(row + 1) * k];
            for i in 0..k {
                grad[out_at + i] += g[row] * h[i];
                delta[row * k + i] = g[row] * self.theta[out_at + i] * (1.0 - h[i] * h[i]);
            }
        }
        for i in 0..k {
            grad[bias_at + i] = (0..n).map(|row| delta[row * k + i]).sum();
        }
        gemm(k, n, d, 1.0, &delta, true, self.x.as_slice(), false, 0.0, &mut grad[lin_at..bias_at]);
        let mut scaled = vec![0.0; n * d];
        for i in 0..k {
            for row in 0..n {
                let s = delta[row * k + i];
                for (o, x) in scaled[row * d..(row + 1) * d].iter_mut().zip(self.x.row(row)) {
                    *o = s * x;
                }
            }
            gemm(d, n, d, 1.0, &scaled, true, self.x.as_slice(), false, 0.0, &mut grad[i * d * d..(i + 1) * d * d]);
        }
        grad
    }
}

/// Flat layout: hidden (`R*t`), output (`t`).
pub(super) struct RwtnHead {
    name: String,
    slots: Vec<u32>,
    units: usize,
    t: usize,
    xi: f64,
    pre: Arc<Matrix>,
    z0: Arc<Matrix>,
    z_train: Option<Matrix>,
    used_train: bool,
    theta: Vec<f64>,
    hidden: Vec<f64>,
    out: Vec<f64>,
}

impl RwtnHead {
    fn z(&self) -> &Matrix {
        match (&self.z_train, self.used_train) {
            (Some(z), true) => z,
            _ => &self.z0,
        }
    }

    fn decode(&self, z: &Matrix) -> (Vec<f64>, Vec<f64>) {
        let (n, r, t) = (z.rows(), self.units, self.t);
        let mut h = vec![0.0; n * t];
        gemm(n, r, t, 1.0, z.as_slice(), false, &self.theta[..r * t], false, 0.0, &mut h);
        h.iter_mut().for_each(|v| *v = tanh(*v));
        let k = &self.theta[r * t..];
        let out = h
            .chunks(t)
            .map(|row| sigmoid(row.iter().zip(k).map(|(a, b)| a * b).sum()))
            .collect();
        (h, out)
    }

    fn forward(&mut self, mode: Mode) {
        match mode {
            Mode::Train { seed, epoch } if self.xi > 0.0 => {
                let mut rng = predicate_noise_rng(seed, &self.name, epoch);
                let mut z = self.z_train.take().unwrap_or_else(|| (*self.pre).clone());
                let mut noise = vec![0.0; self.units];
                for row in 0..self.pre.rows() {
                    fill_noise(&mut rng, self.xi, &mut noise);
                    for ((o, a), e) in z.row_mut(row).iter_mut().zip(self.pre.row(row)).zip(&noise) {
                        *o = tanh(a + e);
                    }
                }
                self.z_train = Some(z);
                self.used_train = true;
            }
            _ => {
                if !self.used_train && !self.out.is_empty() {
                    return;
                }
                self.used_train = false;
            }
        }
        let (h, out) = self.decode(self.z());
        self.hidden = h;
        self.out = out;
    }

    fn output_adj(&self, atom_adj: &[f64]) -> Vec<f64> {
        sigmoid_adj(&self.slots, &self.out, atom_adj)
    }

    fn backward(&self, g: &[f64]) -> Vec<f64> {
        let (n, r, t) = (self.pre.rows(), self.units, self.t);
        let mut grad = vec![0.0; self.theta.len()];
        let k = &self.theta[r * t..];
        let mut delta = vec![0.0; n * t];
        for row in 0..n {
            let h = &self.hidden[row * t..(row + 1) * t];
            for j in 0..t {
                grad[r * t + j] += g[row] * h[j];
                delta[row * t + j] = g[row] * k[j] * (1.0 - h[j] * h[j]);
            }
        }
        gemm(r, n, t, 1.0, self.z().as_slice(), true, &delta, false, 0.0, &mut grad[..r * t]);
        grad
    }

    /// Row of `slot` in this head's batch.
    pub(super) fn row_of(&self, slot: u32) -> Option<usize> {
        self.slots.binary_search(&slot).ok()
    }

    /// `tanh(Z0 U)` for the current hidden weights.
    pub(super) fn eval_hidden(&self) -> Matrix {
        let (h, _) = self.decode(&self.z0);
        Matrix::from_vec(self.z0.rows(), self.t, h).expect("sized")
    }

    pub(super) fn set_output(&mut self, k: &[f64]) {
        let at = self.units * self.t;
        self.theta[at..].copy_from_slice(k);
        self.out.clear();
    }
}

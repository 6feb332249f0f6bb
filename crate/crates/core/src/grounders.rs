//! Predicate and function groundings.
//!
//! * LTN predicate: `σ(uᵀ tanh(vᵀW[1:k]v + V v + b))`, every weight trained.
//! * RWTN predicate: `σ(kᵀ tanh(uᵀ tanh(vᵀW_res[1:R]v + V_in v + ξ)))`, where
//!   the encoder (`W_res`, `V_in`) is random and frozen and only the decoder
//!   (`u`, `k`) is trained.
//! * Crisp type and part-of groundings computed directly from box features.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{bilinear_form, dot, matvec, sigmoid, tanh, tanh_map, Matrix, Tensor3};
use crate::reservoir::{input_weights_from, scale_to_spectral_radius, sparse_matrix_from, ReservoirConfig};
use crate::rng;
use crate::scenes::{inclusion_ratio, BoxGeom};

/// Standard deviation of the initial learnable weights.
pub const INIT_STD: f64 = 0.1;

fn normal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Matrix {
    let dist = Normal::new(0.0, std).expect("finite std");
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtnPredicateParams {
    /// `k` slices of `mn x mn`.
    pub tensor: Tensor3,
    /// `k x mn`.
    pub linear: Matrix,
    pub bias: Vec<f64>,
    pub output: Vec<f64>,
}

impl LtnPredicateParams {
    pub fn zeros(dim: usize, k: usize) -> Self {
        Self {
            tensor: Tensor3::zeros(k, dim),
            linear: Matrix::zeros(k, dim),
            bias: vec![0.0; k],
            output: vec![0.0; k],
        }
    }

    /// Every weight drawn from `N(0, std²)`.
    pub fn random<R: Rng>(rng: &mut R, dim: usize, k: usize, std: f64) -> Self {
        let dist = Normal::new(0.0, std).expect("finite std");
        let mut p = Self::zeros(dim, k);
        for x in p.tensor.as_mut_slice() {
            *x = dist.sample(rng);
        }
        p.linear = normal_matrix(rng, k, dim, std);
        p.bias.iter_mut().for_each(|x| *x = dist.sample(rng));
        p.output.iter_mut().for_each(|x| *x = dist.sample(rng));
        p
    }

    pub fn dim(&self) -> usize {
        self.tensor.dim()
    }

    pub fn k(&self) -> usize {
        self.tensor.slices()
    }

    pub fn param_count(&self) -> usize {
        self.tensor.as_slice().len() + self.linear.as_slice().len() + self.bias.len() + self.output.len()
    }

    pub(crate) fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(self.tensor.as_slice());
        out.extend_from_slice(self.linear.as_slice());
        out.extend_from_slice(&self.bias);
        out.extend_from_slice(&self.output);
        out
    }

    pub(crate) fn set_flat(&mut self, theta: &[f64]) {
        let (a, rest) = theta.split_at(self.tensor.as_slice().len());
        let (b, rest) = rest.split_at(self.linear.as_slice().len());
        let (c, d) = rest.split_at(self.bias.len());
        self.tensor.as_mut_slice().copy_from_slice(a);
        self.linear.as_mut_slice().copy_from_slice(b);
        self.bias.copy_from_slice(c);
        self.output.copy_from_slice(d);
    }
}

/// LTN truth value of the argument vector `v`.
pub fn ltn_predicate(params: &LtnPredicateParams, v: &[f64]) -> Result<f64> {
    check_dim("ltn_predicate output", params.k(), params.output.len())?;
    let quad = bilinear_form(v, &params.tensor)?;
    let lin = matvec(&params.linear, v)?;
    let hidden: Vec<f64> = (0..params.k())
        .map(|i| tanh(quad[i] + lin[i] + params.bias[i]))
        .collect();
    Ok(sigmoid(dot(&params.output, &hidden)))
}

/// Frozen half of an RWTN predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwtnEncoderParams {
    /// `R` slices of `mn x mn`, each scaled to spectral radius `rho`.
    pub tensor: Tensor3,
    /// `R x mn`.
    pub input: Matrix,
    /// Standard deviation of the training-time noise.
    pub xi: f64,
    pub seed: u64,
}

impl RwtnEncoderParams {
    /// Draws a reservoir encoder for `dim`-long inputs. `name` selects the
    /// random stream, so encoders with different names are independent.
    pub fn generate(config: &ReservoirConfig, dim: usize, name: &str) -> Result<Self> {
        config.validate()?;
        if dim == 0 {
            return Err(Error::Config("encoder input dimension must be >= 1".into()));
        }
        let mut slices = Vec::with_capacity(config.units);
        let mut w_rng = rng::named_stream(config.seed, "encoder-tensor", name, &[]);
        for _ in 0..config.units {
            // A draw with no nonzero eigenvalue cannot be scaled; redraw it.
            let mut attempt = 0;
            let slice = loop {
                let m = sparse_matrix_from(&mut w_rng, dim, dim, config.beta);
                match scale_to_spectral_radius(&m, config.rho) {
                    Ok(s) => break s,
                    Err(Error::ZeroSpectralRadius) if attempt < 100 => attempt += 1,
                    Err(e) => return Err(e),
                }
            };
            slices.push(slice);
        }
        let mut in_rng = rng::named_stream(config.seed, "encoder-input", name, &[]);
        Ok(Self {
            tensor: Tensor3::from_slices(&slices)?,
            input: input_weights_from(&mut in_rng, config.units, dim, config.omega),
            xi: config.xi,
            seed: config.seed,
        })
    }

    pub fn units(&self) -> usize {
        self.tensor.slices()
    }

    pub fn dim(&self) -> usize {
        self.tensor.dim()
    }

    /// Noise-free inner pre-activation `vᵀW_res v + V_in v`.
    pub fn pre_activation(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut a = bilinear_form(v, &self.tensor)?;
        for (ai, li) in a.iter_mut().zip(matvec(&self.input, v)?) {
            *ai += li;
        }
        Ok(a)
    }

    /// SHA-256 over the stored weights, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.units() as u64).to_le_bytes());
        h.update((self.dim() as u64).to_le_bytes());
        for x in self.tensor.as_slice().iter().chain(self.input.as_slice()) {
            h.update(x.to_le_bytes());
        }
        h.update(self.xi.to_le_bytes());
        h.update(self.seed.to_le_bytes());
        hex::encode(h.finalize())
    }

    pub fn stored_count(&self) -> usize {
        self.tensor.as_slice().len() + self.input.as_slice().len()
    }
}

/// Trained half of an RWTN predicate. No biases anywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwtnDecoderParams {
    /// `R x t`.
    pub hidden: Matrix,
    pub output: Vec<f64>,
}

impl RwtnDecoderParams {
    pub fn zeros(units: usize, t: usize) -> Self {
        Self {
            hidden: Matrix::zeros(units, t),
            output: vec![0.0; t],
        }
    }

    pub fn random<R: Rng>(rng: &mut R, units: usize, t: usize, std: f64) -> Self {
        let hidden = normal_matrix(rng, units, t, std);
        let output = normal_matrix(rng, 1, t, std).into_vec();
        Self { hidden, output }
    }

    pub fn units(&self) -> usize {
        self.hidden.rows()
    }

    pub fn t(&self) -> usize {
        self.hidden.cols()
    }

    pub fn param_count(&self) -> usize {
        self.hidden.as_slice().len() + self.output.len()
    }

    pub(crate) fn flat(&self) -> Vec<f64> {
        let mut out = self.hidden.as_slice().to_vec();
        out.extend_from_slice(&self.output);
        out
    }

    pub(crate) fn set_flat(&mut self, theta: &[f64]) {
        let (a, b) = theta.split_at(self.hidden.as_slice().len());
        self.hidden.as_mut_slice().copy_from_slice(a);
        self.output.copy_from_slice(b);
    }

    /// Decoder applied to a noise-included pre-activation.
    pub fn decode(&self, pre: &[f64]) -> Result<f64> {
        check_dim("rwtn decoder", self.units(), pre.len())?;
        let z = tanh_map(pre);
        let mut h = vec![0.0; self.t()];
        for (r, zr) in z.iter().enumerate() {
            for (hj, uj) in h.iter_mut().zip(self.hidden.row(r)) {
                *hj += zr * uj;
            }
        }
        h.iter_mut().for_each(|x| *x = tanh(*x));
        Ok(sigmoid(dot(&self.output, &h)))
    }
}

/// RWTN truth value of `v`; `noise` is added to the inner pre-activation
/// (pass `None` for a deterministic evaluation).
pub fn rwtn_predicate(
    enc: &RwtnEncoderParams,
    dec: &RwtnDecoderParams,
    v: &[f64],
    noise: Option<&[f64]>,
) -> Result<f64> {
    check_dim("rwtn_predicate units", enc.units(), dec.units())?;
    let mut pre = enc.pre_activation(v)?;
    if let Some(noise) = noise {
        check_dim("rwtn_predicate noise", pre.len(), noise.len())?;
        for (p, e) in pre.iter_mut().zip(noise) {
            *p += e;
        }
    }
    dec.decode(&pre)
}

/// Draws the `ξ`-scaled noise vector for one RWTN evaluation.
pub fn draw_noise<R: Rng>(rng: &mut R, units: usize, xi: f64) -> Vec<f64> {
    let mut out = vec![0.0; units];
    fill_noise(rng, xi, &mut out);
    out
}

/// In-place form of [`draw_noise`]; consumes the same draws.
pub fn fill_noise<R: Rng>(rng: &mut R, xi: f64, out: &mut [f64]) {
    for o in out {
        let e: f64 = StandardNormal.sample(rng);
        *o = xi * e;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFunctionParams {
    /// `n x mn`.
    pub matrix: Matrix,
    pub offset: Vec<f64>,
}

pub fn ground_function(params: &LinearFunctionParams, args: &[f64]) -> Result<Vec<f64>> {
    check_dim("ground_function offset", params.matrix.rows(), params.offset.len())?;
    let mut out = matvec(&params.matrix, args)?;
    for (o, b) in out.iter_mut().zip(&params.offset) {
        *o += b;
    }
    Ok(out)
}

/// Which class is a part of which. Classes are ordered wholes first, then
/// parts; `is_part_of(i, j)` reads entry `w[i][j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartWholeTable {
    n_wholes: usize,
    n_parts: usize,
    /// `(part offset, whole index)` pairs with `w = 1`, sorted.
    links: Vec<(usize, usize)>,
}

impl PartWholeTable {
    pub fn empty(n_wholes: usize, n_parts: usize) -> Self {
        Self {
            n_wholes,
            n_parts,
            links: Vec::new(),
        }
    }

    /// Part `j` belongs to wholes `j mod W` and `(j+1) mod W`.
    pub fn cyclic(n_wholes: usize, n_parts: usize) -> Self {
        let mut t = Self::empty(n_wholes, n_parts);
        if n_wholes > 0 {
            for j in 0..n_parts {
                t.link(j, j % n_wholes).expect("in range");
                t.link(j, (j + 1) % n_wholes).expect("in range");
            }
        }
        t
    }

    /// Every part is compatible with every whole.
    pub fn full(n_wholes: usize, n_parts: usize) -> Self {
        let mut t = Self::empty(n_wholes, n_parts);
        for p in 0..n_parts {
            for w in 0..n_wholes {
                t.link(p, w).expect("in range");
            }
        }
        t
    }

    /// Marks part number `part` (counted among parts) as a part of whole `whole`.
    pub fn link(&mut self, part: usize, whole: usize) -> Result<()> {
        if part >= self.n_parts {
            return Err(Error::IndexOutOfRange {
                index: part,
                len: self.n_parts,
            });
        }
        if whole >= self.n_wholes {
            return Err(Error::IndexOutOfRange {
                index: whole,
                len: self.n_wholes,
            });
        }
        if let Err(pos) = self.links.binary_search(&(part, whole)) {
            self.links.insert(pos, (part, whole));
        }
        Ok(())
    }

    pub fn n_wholes(&self) -> usize {
        self.n_wholes
    }

    pub fn n_parts(&self) -> usize {
        self.n_parts
    }

    pub fn n_classes(&self) -> usize {
        self.n_wholes + self.n_parts
    }

    pub fn is_whole(&self, class: usize) -> bool {
        class < self.n_wholes
    }

    /// Class index of part number `part`.
    pub fn part_class(&self, part: usize) -> usize {
        self.n_wholes + part
    }

    pub fn compatible(&self, part: usize, whole: usize) -> bool {
        self.links.binary_search(&(part, whole)).is_ok()
    }

    /// `w[i][j]` over class indices.
    pub fn is_part_of(&self, i: usize, j: usize) -> bool {
        i >= self.n_wholes && j < self.n_wholes && self.compatible(i - self.n_wholes, j)
    }

    /// Wholes a part may belong to.
    pub fn wholes_of(&self, part: usize) -> Vec<usize> {
        self.links.iter().filter(|l| l.0 == part).map(|l| l.1).collect()
    }

    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    /// Dense `|P1| x |P1|` 0/1 view.
    pub fn matrix(&self) -> Vec<Vec<u8>> {
        let n = self.n_classes();
        (0..n)
            .map(|i| (0..n).map(|j| u8::from(self.is_part_of(i, j))).collect())
            .collect()
    }
}

/// Crisp typing: 1 iff `class` is the argmax of the first
/// `n_classes` entries of `x` (ties go to the lowest index).
pub fn crisp_type(x: &[f64], n_classes: usize, class: usize) -> Result<f64> {
    if class >= n_classes {
        return Err(Error::IndexOutOfRange {
            index: class,
            len: n_classes,
        });
    }
    if x.len() < n_classes {
        return Err(Error::DimensionMismatch {
            context: "crisp_type",
            expected: n_classes,
            actual: x.len(),
        });
    }
    let mut best = 0;
    for l in 1..n_classes {
        if x[l] > x[best] {
            best = l;
        }
    }
    Ok(if best == class { 1.0 } else { 0.0 })
}

/// Crisp part-of on two grounding vectors (scores then corners).
pub fn crisp_part_of_vectors(
    child: &[f64],
    parent: &[f64],
    table: &PartWholeTable,
    th_ir: f64,
) -> Result<f64> {
    let n = table.n_classes();
    check_dim("crisp_part_of child", n + 4, child.len())?;
    check_dim("crisp_part_of parent", n + 4, parent.len())?;
    let b = BoxGeom::from_slice(&child[n..])?;
    let b2 = BoxGeom::from_slice(&parent[n..])?;
    let ir = inclusion_ratio(&b, &b2)?;
    let mut best = 0.0_f64;
    for &(p, w) in table.links() {
        best = best.max(child[table.part_class(p)] * parent[w]);
    }
    Ok(if ir * best >= th_ir { 1.0 } else { 0.0 })
}

pub fn crisp_part_of(
    b: &crate::scenes::BoxRecord,
    b2: &crate::scenes::BoxRecord,
    table: &PartWholeTable,
    th_ir: f64,
) -> Result<f64> {
    crisp_part_of_vectors(&b.grounding_vector(), &b2.grounding_vector(), table, th_ir)
}

/// Learnable parameters of one LTN predicate: `((mn)² + mn + 2)·k`.
pub fn ltn_param_count(n: usize, m: usize, k: usize) -> usize {
    let d = n * m;
    (d * d + d + 2) * k
}

/// Learnable parameters of one RWTN decoder: `(R + 1)·t`.
pub fn rwtn_param_count(r: usize, t: usize) -> usize {
    (r + 1) * t
}

/// Stored weights for `i` classifiers: one encoder each vs. one shared encoder.
pub fn shared_space(n: usize, m: usize, r: usize, t: usize, i: usize) -> (usize, usize) {
    let d = n * m;
    let encoder = (d * d + d) * r;
    let decoder = rwtn_param_count(r, t);
    ((encoder + decoder) * i, encoder + decoder * i)
}

/// A user supplied truth function, e.g. a fixed baseline.
#[derive(Clone)]
pub struct CustomGrounder {
    pub name: String,
    pub arity_dim: usize,
    pub f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl fmt::Debug for CustomGrounder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomGrounder")
            .field("name", &self.name)
            .field("arity_dim", &self.arity_dim)
            .finish()
    }
}

/// Grounding of one predicate symbol.
#[derive(Debug, Clone)]
pub enum Grounder {
    Ltn(LtnPredicateParams),
    Rwtn {
        encoder: Arc<RwtnEncoderParams>,
        decoder: RwtnDecoderParams,
    },
    CrispType {
        class: usize,
        n_classes: usize,
    },
    CrispPartOf {
        table: PartWholeTable,
        th_ir: f64,
    },
    Custom(CustomGrounder),
}

impl Grounder {
    pub fn custom(
        name: impl Into<String>,
        arity_dim: usize,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Grounder::Custom(CustomGrounder {
            name: name.into(),
            arity_dim,
            f: Arc::new(f),
        })
    }

    pub fn is_learnable(&self) -> bool {
        matches!(self, Grounder::Ltn(_) | Grounder::Rwtn { .. })
    }

    /// Expected argument-vector length, if fixed by the grounder.
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            Grounder::Ltn(p) => Some(p.dim()),
            Grounder::Rwtn { encoder, .. } => Some(encoder.dim()),
            Grounder::CrispType { .. } => None,
            Grounder::CrispPartOf { table, .. } => Some(2 * (table.n_classes() + 4)),
            Grounder::Custom(c) => Some(c.arity_dim),
        }
    }

    /// Trainable weights as one flat vector (empty for fixed grounders).
    pub fn params_flat(&self) -> Vec<f64> {
        match self {
            Grounder::Ltn(p) => p.flat(),
            Grounder::Rwtn { decoder, .. } => decoder.flat(),
            _ => Vec::new(),
        }
    }

    /// Inverse of [`Grounder::params_flat`].
    pub fn set_params_flat(&mut self, theta: &[f64]) -> Result<()> {
        check_dim("set_params_flat", self.learnable_count(), theta.len())?;
        match self {
            Grounder::Ltn(p) => p.set_flat(theta),
            Grounder::Rwtn { decoder, .. } => decoder.set_flat(theta),
            _ => {}
        }
        Ok(())
    }

    pub fn learnable_count(&self) -> usize {
        match self {
            Grounder::Ltn(p) => p.param_count(),
            Grounder::Rwtn { decoder, .. } => decoder.param_count(),
            _ => 0,
        }
    }

    /// Truth value of `v`; `noise` feeds RWTN grounders and is ignored by the rest.
    pub fn truth(&self, v: &[f64], noise: Option<&[f64]>) -> Result<f64> {
        match self {
            Grounder::Ltn(p) => ltn_predicate(p, v),
            Grounder::Rwtn { encoder, decoder } => rwtn_predicate(encoder, decoder, v, noise),
            Grounder::CrispType { class, n_classes } => crisp_type(v, *n_classes, *class),
            Grounder::CrispPartOf { table, th_ir } => {
                check_dim("crisp part-of", 2 * (table.n_classes() + 4), v.len())?;
                let (a, b) = v.split_at(v.len() / 2);
                crisp_part_of_vectors(a, b, table, *th_ir)
            }
            Grounder::Custom(c) => {
                check_dim("custom grounder", c.arity_dim, v.len())?;
                Ok((c.f)(v).clamp(0.0, 1.0))
            }
        }
    }
}

//! Lukasiewicz semantics for closed formulas under a grounding.
//!
//! Connectives:
//!
//! ```text
//! ~a      = 1 - a
//! a & b   = max(0, a + b - 1)
//! a | b   = min(1, a + b)
//! a -> b  = min(1, 1 - a + b)
//! ```
//!
//! `forall` aggregates the truths of all substitutions with the harmonic mean
//! and `exists` takes their maximum. A theory's satisfiability is the
//! harmonic mean of its clause truths. Every harmonic mean floors its inputs
//! at [`EPSILON`].
//!
//! Quantified variables range over one group of the [`Domain`] at a time: a
//! quantifier with no enclosing binding visits every group, a nested one stays
//! in the group its enclosing binding came from. For scene data a group is the
//! set of boxes of one image.

mod program;

use indexmap::IndexMap;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fol::{check_formula, free_variables, Formula, Signature, Term};
use crate::grounders::{draw_noise, ground_function, Grounder, LinearFunctionParams, PartWholeTable};
use crate::rng;

pub use program::{GroundTerm, Node, Program, Slot};

/// Floor applied to truths before any harmonic mean.
pub const EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connective {
    Not,
    And,
    Or,
    Implies,
}

pub fn not(a: f64) -> f64 {
    (1.0 - a).clamp(0.0, 1.0)
}

pub fn and(a: f64, b: f64) -> f64 {
    (a + b - 1.0).clamp(0.0, 1.0)
}

pub fn or(a: f64, b: f64) -> f64 {
    (a + b).clamp(0.0, 1.0)
}

pub fn implies(a: f64, b: f64) -> f64 {
    (1.0 - a + b).clamp(0.0, 1.0)
}

/// Applies `op`; `b` is ignored for negation and required otherwise.
pub fn eval_connective(op: Connective, a: f64, b: Option<f64>) -> f64 {
    match op {
        Connective::Not => not(a),
        Connective::And => and(a, b.expect("binary connective")),
        Connective::Or => or(a, b.expect("binary connective")),
        Connective::Implies => implies(a, b.expect("binary connective")),
    }
}

/// Harmonic mean of `values` floored at [`EPSILON`]. Empty input gives `None`.
pub fn harmonic_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let s: f64 = values.iter().map(|&t| 1.0 / t.max(EPSILON)).sum();
    Some(values.len() as f64 / s)
}

/// `∂ hm / ∂ t_i` given the mean `hm`; zero where the floor is active.
pub fn harmonic_mean_weight(t: f64, hm: f64, n: usize) -> f64 {
    if t > EPSILON {
        hm * hm / (n as f64 * t * t)
    } else {
        0.0
    }
}

/// Constants grouped into independent quantification domains, by index into
/// the grounding's constant list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    groups: Vec<Vec<usize>>,
}

impl Domain {
    pub fn new(groups: Vec<Vec<usize>>) -> Self {
        Self { groups }
    }

    /// A single group holding constants `0..n`.
    pub fn single(n: usize) -> Self {
        Self {
            groups: vec![(0..n).collect()],
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn is_empty(&self) -> bool {
        self.groups.iter().all(Vec::is_empty)
    }
}

/// Maps symbols to numbers: constants to feature vectors, functions to
/// linear maps, predicates to grounders.
#[derive(Debug, Clone, Default)]
pub struct Grounding {
    pub constants: IndexMap<String, Vec<f64>>,
    pub functions: IndexMap<String, LinearFunctionParams>,
    pub predicates: IndexMap<String, Grounder>,
}

impl Grounding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(&self, name: &str) -> Result<&[f64]> {
        self.constants
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Unmapped(name.to_string()))
    }

    pub fn predicate(&self, name: &str) -> Result<&Grounder> {
        self.predicates
            .get(name)
            .ok_or_else(|| Error::Unmapped(name.to_string()))
    }

    /// Names of predicates whose grounders carry trainable weights.
    pub fn learnable(&self) -> Vec<&str> {
        self.predicates
            .iter()
            .filter(|(_, g)| g.is_learnable())
            .map(|(k, _)| k.as_str())
            .collect()
    }

    pub fn learnable_count(&self) -> usize {
        self.predicates.values().map(Grounder::learnable_count).sum()
    }
}

/// Clauses together with the grounding they are evaluated under.
#[derive(Debug, Clone)]
pub struct GroundedTheory {
    pub signature: Signature,
    pub clauses: Vec<Formula>,
    pub grounding: Grounding,
}

impl GroundedTheory {
    /// Checks that every clause is closed and well formed, and that the
    /// grounding covers the signature's constants in declaration order.
    pub fn new(signature: Signature, clauses: Vec<Formula>, grounding: Grounding) -> Result<Self> {
        if clauses.is_empty() {
            return Err(Error::EmptyTheory);
        }
        for c in &clauses {
            check_formula(c, &signature)?;
            let free = free_variables(c);
            if !free.is_empty() {
                return Err(Error::OpenFormula(format!("{c} (free: {})", free.join(", "))));
            }
        }
        let names: Vec<&str> = signature.constants().collect();
        let mapped: Vec<&str> = grounding.constants.keys().map(String::as_str).collect();
        if names != mapped {
            return Err(Error::Unmapped(
                "grounding constants must match the signature's constants in order".into(),
            ));
        }
        Ok(Self {
            signature,
            clauses,
            grounding,
        })
    }
}

/// Whether RWTN grounders see noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64, epoch: u64 },
}

struct Evaluator<'a> {
    g: &'a Grounding,
    domain: &'a Domain,
    noise: Option<ChaCha8Rng>,
}

impl<'a> Evaluator<'a> {
    fn term(&self, t: &Term, env: &[(String, usize)]) -> Result<Vec<f64>> {
        match t {
            Term::Var(v) => env
                .iter()
                .rev()
                .find(|(name, _)| name == v)
                .map(|&(_, c)| self.g.constants[c].clone())
                .ok_or_else(|| Error::OpenFormula(v.clone())),
            Term::Const(c) => Ok(self.g.constant(c)?.to_vec()),
            Term::Apply(f, args) => {
                let params = self
                    .g
                    .functions
                    .get(f)
                    .ok_or_else(|| Error::Unmapped(f.clone()))?;
                let mut v = Vec::new();
                for a in args {
                    v.extend(self.term(a, env)?);
                }
                ground_function(params, &v)
            }
        }
    }

    fn formula(&mut self, f: &Formula, env: &mut Vec<(String, usize)>, group: Option<usize>) -> Result<f64> {
        Ok(match f {
            Formula::Atom(p, args) => {
                let grounder = self.g.predicate(p)?;
                let mut v = Vec::new();
                for a in args {
                    v.extend(self.term(a, env)?);
                }
                let noise = match (&mut self.noise, grounder) {
                    (Some(rng), Grounder::Rwtn { encoder, .. }) => Some(draw_noise(rng, encoder.units(), encoder.xi)),
                    _ => None,
                };
                grounder.truth(&v, noise.as_deref())?.clamp(0.0, 1.0)
            }
            Formula::Not(a) => not(self.formula(a, env, group)?),
            Formula::And(a, b) => and(self.formula(a, env, group)?, self.formula(b, env, group)?),
            Formula::Or(a, b) => or(self.formula(a, env, group)?, self.formula(b, env, group)?),
            Formula::Implies(a, b) => implies(self.formula(a, env, group)?, self.formula(b, env, group)?),
            Formula::ForAll(vars, body) | Formula::Exists(vars, body) => {
                let groups: Vec<usize> = match group {
                    Some(gi) => vec![gi],
                    None => (0..self.domain.groups.len()).collect(),
                };
                let mut truths = Vec::new();
                for gi in groups {
                    let members = &self.domain.groups[gi];
                    if members.is_empty() {
                        continue;
                    }
                    let mut idx = vec![0usize; vars.len()];
                    loop {
                        let mark = env.len();
                        for (v, &i) in vars.iter().zip(&idx) {
                            env.push((v.clone(), members[i]));
                        }
                        truths.push(self.formula(body, env, Some(gi))?);
                        env.truncate(mark);
                        if !advance(&mut idx, members.len()) {
                            break;
                        }
                    }
                }
                if truths.is_empty() {
                    return Err(Error::EmptyDomain);
                }
                if matches!(f, Formula::ForAll(..)) {
                    harmonic_mean(&truths).expect("nonempty")
                } else {
                    truths.iter().copied().fold(0.0, f64::max)
                }
            }
        })
    }
}

/// Odometer over `n^len` tuples; false once it wraps around.
pub(crate) fn advance(idx: &mut [usize], n: usize) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < n {
            return true;
        }
        idx[i] = 0;
    }
    false
}

fn noise_rng(mode: Mode) -> Option<ChaCha8Rng> {
    match mode {
        Mode::Eval => None,
        Mode::Train { seed, epoch } => Some(rng::stream(seed, "direct-eval-noise", &[epoch])),
    }
}

/// Truth of a closed formula.
pub fn eval_formula(f: &Formula, g: &Grounding, domain: &Domain, mode: Mode) -> Result<f64> {
    let free = free_variables(f);
    if !free.is_empty() {
        return Err(Error::OpenFormula(free.join(", ")));
    }
    let mut ev = Evaluator {
        g,
        domain,
        noise: noise_rng(mode),
    };
    ev.formula(f, &mut Vec::new(), None)
}

/// Harmonic mean of clause truths.
pub fn satisfiability(clause_truths: &[f64]) -> Result<f64> {
    harmonic_mean(clause_truths).ok_or(Error::EmptyTheory)
}

/// Evaluates every clause directly and aggregates.
pub fn theory_satisfiability(theory: &GroundedTheory, domain: &Domain, mode: Mode) -> Result<f64> {
    let mut ev = Evaluator {
        g: &theory.grounding,
        domain,
        noise: noise_rng(mode),
    };
    let mut truths = Vec::with_capacity(theory.clauses.len());
    for c in &theory.clauses {
        truths.push(ev.formula(c, &mut Vec::new(), None)?);
    }
    satisfiability(&truths)
}

/// Part-whole axioms over the unary predicates of `sig` (wholes first, then
/// parts, as laid out by `table`) and its first binary predicate:
///
/// * `partOf` is asymmetric;
/// * a part is never part of a whole it is not listed under;
/// * a whole is never part of a whole;
/// * a part has no parts.
pub fn mereology_constraints(table: &PartWholeTable, sig: &Signature) -> Result<Vec<Formula>> {
    let classes: Vec<&str> = sig.unary_predicates().collect();
    if classes.len() != table.n_classes() {
        return Err(Error::Signature(format!(
            "table covers {} classes but the signature declares {} unary predicates",
            table.n_classes(),
            classes.len()
        )));
    }
    let part_of = sig
        .binary_predicates()
        .next()
        .ok_or_else(|| Error::Signature("no binary part-of predicate declared".into()))?;
    let x = || Term::var("x");
    let y = || Term::var("y");
    let rel = |a: Term, b: Term| Formula::atom(part_of, vec![a, b]);
    let is = |c: &str, t: Term| Formula::atom(c, vec![t]);
    let xy = ["x", "y"];
    let wholes = &classes[..table.n_wholes()];
    let parts = &classes[table.n_wholes()..];

    let mut out = vec![Formula::forall(xy, rel(x(), y()).implies(rel(y(), x()).not()))];
    for (p, pn) in parts.iter().enumerate() {
        for (w, wn) in wholes.iter().enumerate() {
            if !table.compatible(p, w) {
                out.push(Formula::forall(
                    xy,
                    is(pn, x()).and(is(wn, y())).implies(rel(x(), y()).not()),
                ));
            }
        }
    }
    for w1 in wholes {
        for w2 in wholes {
            out.push(Formula::forall(
                xy,
                is(w1, x()).and(is(w2, y())).implies(rel(x(), y()).not()),
            ));
        }
    }
    for p1 in parts {
        for p2 in parts {
            out.push(Formula::forall(
                xy,
                is(p1, x()).and(is(p2, y())).implies(rel(y(), x()).not()),
            ));
        }
    }
    Ok(out)
}

/// Seeded stream for a predicate's training noise.
pub(crate) fn predicate_noise_rng(seed: u64, predicate: &str, epoch: u64) -> ChaCha8Rng {
    rng::named_stream(seed, "train-noise", predicate, &[epoch])
}

#[cfg(test)]
mod tests;

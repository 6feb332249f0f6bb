//! Theories unrolled over a domain into a flat node list.
//!
//! Every quantifier is expanded into its substitution instances and every
//! distinct ground atom becomes one slot. Nodes are stored children first, so
//! evaluation is a single forward sweep and differentiation a single reverse
//! sweep. Structurally equal subformulas share one node.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::fol::{Formula, Term};
use crate::grounders::{draw_noise, ground_function, Grounder};
use crate::linalg::Matrix;

use super::{advance, harmonic_mean_weight, predicate_noise_rng, Domain, Grounding, Mode, EPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Atom(u32),
    Not(u32),
    And(u32, u32),
    Or(u32, u32),
    Implies(u32, u32),
    ForAll { start: u32, len: u32 },
    Exists { start: u32, len: u32 },
}

/// A closed term over constant and function indices of a grounding.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GroundTerm {
    Const(usize),
    Apply(usize, Vec<GroundTerm>),
}

/// One distinct ground atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    /// Index into the grounding's predicate list.
    pub predicate: usize,
    pub args: Vec<GroundTerm>,
    /// Concatenated argument groundings.
    pub input: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Program {
    nodes: Vec<Node>,
    children: Vec<u32>,
    roots: Vec<u32>,
    slots: Vec<Slot>,
    by_predicate: Vec<Vec<u32>>,
}

struct Builder<'a> {
    g: &'a Grounding,
    domain: &'a Domain,
    nodes: Vec<Node>,
    children: Vec<u32>,
    interned: HashMap<Node, u32>,
    slots: Vec<Slot>,
    slot_index: HashMap<(usize, Vec<GroundTerm>), u32>,
}

impl<'a> Builder<'a> {
    fn push(&mut self, n: Node) -> u32 {
        if let Some(&id) = self.interned.get(&n) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(n);
        self.interned.insert(n, id);
        id
    }

    fn term(&self, t: &Term, env: &[(String, usize)]) -> Result<GroundTerm> {
        match t {
            Term::Var(v) => env
                .iter()
                .rev()
                .find(|(name, _)| name == v)
                .map(|&(_, c)| GroundTerm::Const(c))
                .ok_or_else(|| Error::OpenFormula(v.clone())),
            Term::Const(c) => self
                .g
                .constants
                .get_index_of(c.as_str())
                .map(GroundTerm::Const)
                .ok_or_else(|| Error::Unmapped(c.clone())),
            Term::Apply(f, args) => {
                let fi = self
                    .g
                    .functions
                    .get_index_of(f.as_str())
                    .ok_or_else(|| Error::Unmapped(f.clone()))?;
                let args = args.iter().map(|a| self.term(a, env)).collect::<Result<_>>()?;
                Ok(GroundTerm::Apply(fi, args))
            }
        }
    }

    fn vector(&self, t: &GroundTerm) -> Result<Vec<f64>> {
        match t {
            GroundTerm::Const(c) => Ok(self.g.constants[*c].clone()),
            GroundTerm::Apply(f, args) => {
                let mut v = Vec::new();
                for a in args {
                    v.extend(self.vector(a)?);
                }
                ground_function(&self.g.functions[*f], &v)
            }
        }
    }

    fn atom(&mut self, p: &str, args: &[Term], env: &[(String, usize)]) -> Result<u32> {
        let pi = self
            .g
            .predicates
            .get_index_of(p)
            .ok_or_else(|| Error::Unmapped(p.to_string()))?;
        let args: Vec<GroundTerm> = args.iter().map(|a| self.term(a, env)).collect::<Result<_>>()?;
        let key = (pi, args);
        let slot = match self.slot_index.get(&key) {
            Some(&s) => s,
            None => {
                let mut input = Vec::new();
                for a in &key.1 {
                    input.extend(self.vector(a)?);
                }
                if let Some(d) = self.g.predicates[pi].input_dim() {
                    crate::error::check_dim("atom input", d, input.len())?;
                }
                let s = self.slots.len() as u32;
                self.slots.push(Slot {
                    predicate: pi,
                    args: key.1.clone(),
                    input,
                });
                self.slot_index.insert(key, s);
                s
            }
        };
        Ok(self.push(Node::Atom(slot)))
    }

    fn formula(&mut self, f: &Formula, env: &mut Vec<(String, usize)>, group: Option<usize>) -> Result<u32> {
        Ok(match f {
            Formula::Atom(p, args) => self.atom(p, args, env)?,
            Formula::Not(a) => {
                let a = self.formula(a, env, group)?;
                self.push(Node::Not(a))
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                let a = self.formula(a, env, group)?;
                let b = self.formula(b, env, group)?;
                self.push(match f {
                    Formula::And(..) => Node::And(a, b),
                    Formula::Or(..) => Node::Or(a, b),
                    _ => Node::Implies(a, b),
                })
            }
            Formula::ForAll(vars, body) | Formula::Exists(vars, body) => {
                let groups: Vec<usize> = match group {
                    Some(gi) => vec![gi],
                    None => (0..self.domain.groups().len()).collect(),
                };
                let mut kids = Vec::new();
                for gi in groups {
                    let members = &self.domain.groups()[gi];
                    if members.is_empty() {
                        continue;
                    }
                    let mut idx = vec![0usize; vars.len()];
                    loop {
                        let mark = env.len();
                        for (v, &i) in vars.iter().zip(&idx) {
                            env.push((v.clone(), members[i]));
                        }
                        kids.push(self.formula(body, env, Some(gi))?);
                        env.truncate(mark);
                        if !advance(&mut idx, members.len()) {
                            break;
                        }
                    }
                }
                if kids.is_empty() {
                    return Err(Error::EmptyDomain);
                }
                let start = self.children.len() as u32;
                let len = kids.len() as u32;
                self.children.extend(kids);
                let node = if matches!(f, Formula::ForAll(..)) {
                    Node::ForAll { start, len }
                } else {
                    Node::Exists { start, len }
                };
                let id = self.nodes.len() as u32;
                self.nodes.push(node);
                id
            }
        })
    }
}

impl Program {
    pub fn compile(clauses: &[Formula], g: &Grounding, domain: &Domain) -> Result<Self> {
        if clauses.is_empty() {
            return Err(Error::EmptyTheory);
        }
        let mut b = Builder {
            g,
            domain,
            nodes: Vec::new(),
            children: Vec::new(),
            interned: HashMap::new(),
            slots: Vec::new(),
            slot_index: HashMap::new(),
        };
        let mut roots = Vec::with_capacity(clauses.len());
        for c in clauses {
            roots.push(b.formula(c, &mut Vec::new(), None)?);
        }
        let mut by_predicate = vec![Vec::new(); g.predicates.len()];
        for (i, s) in b.slots.iter().enumerate() {
            by_predicate[s.predicate].push(i as u32);
        }
        Ok(Self {
            nodes: b.nodes,
            children: b.children,
            roots,
            slots: b.slots,
            by_predicate,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn clause_count(&self) -> usize {
        self.roots.len()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Slots of predicate `p` (grounding index), in creation order.
    pub fn slots_of(&self, p: usize) -> &[u32] {
        &self.by_predicate[p]
    }

    /// Stacked inputs of predicate `p`'s slots, one row each.
    pub fn inputs_of(&self, p: usize) -> Matrix {
        let ids = &self.by_predicate[p];
        let d = ids.first().map_or(0, |&s| self.slots[s as usize].input.len());
        let mut m = Matrix::zeros(ids.len(), d);
        for (r, &s) in ids.iter().enumerate() {
            m.row_mut(r).copy_from_slice(&self.slots[s as usize].input);
        }
        m
    }

    /// Atom truths under `g`. Train mode draws fresh RWTN noise from a stream
    /// keyed by the predicate name.
    pub fn atom_values(&self, g: &Grounding, mode: Mode) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.slots.len()];
        for (p, (name, grounder)) in g.predicates.iter().enumerate() {
            let mut noise = match (mode, grounder) {
                (Mode::Train { seed, epoch }, Grounder::Rwtn { .. }) => Some(predicate_noise_rng(seed, name, epoch)),
                _ => None,
            };
            for &s in &self.by_predicate[p] {
                let slot = &self.slots[s as usize];
                let draw = match (&mut noise, grounder) {
                    (Some(r), Grounder::Rwtn { encoder, .. }) => Some(draw_noise(r, encoder.units(), encoder.xi)),
                    _ => None,
                };
                out[s as usize] = grounder.truth(&slot.input, draw.as_deref())?.clamp(0.0, 1.0);
            }
        }
        Ok(out)
    }

    /// Fills `vals` (one entry per node) and returns the clause truths.
    pub fn forward(&self, atoms: &[f64], vals: &mut Vec<f64>) -> Vec<f64> {
        vals.clear();
        vals.reserve(self.nodes.len());
        for n in &self.nodes {
            let v = match *n {
                Node::Atom(s) => atoms[s as usize],
                Node::Not(a) => 1.0 - vals[a as usize],
                Node::And(a, b) => (vals[a as usize] + vals[b as usize] - 1.0).clamp(0.0, 1.0),
                Node::Or(a, b) => (vals[a as usize] + vals[b as usize]).clamp(0.0, 1.0),
                Node::Implies(a, b) => (1.0 - vals[a as usize] + vals[b as usize]).clamp(0.0, 1.0),
                Node::ForAll { start, len } => {
                    let kids = &self.children[start as usize..(start + len) as usize];
                    let s: f64 = kids.iter().map(|&c| 1.0 / vals[c as usize].max(EPSILON)).sum();
                    len as f64 / s
                }
                Node::Exists { start, len } => self.children[start as usize..(start + len) as usize]
                    .iter()
                    .map(|&c| vals[c as usize])
                    .fold(0.0, f64::max),
            };
            vals.push(v);
        }
        self.roots.iter().map(|&r| vals[r as usize]).collect()
    }

    /// Reverse sweep. `root_adj[i]` is the upstream derivative for clause `i`;
    /// derivatives with respect to atom truths are written to `atom_adj`.
    /// Kinks of the connectives get a zero subgradient.
    pub fn backward(&self, vals: &[f64], root_adj: &[f64], adj: &mut Vec<f64>, atom_adj: &mut [f64]) {
        adj.clear();
        adj.resize(self.nodes.len(), 0.0);
        atom_adj.iter_mut().for_each(|x| *x = 0.0);
        for (&r, &g) in self.roots.iter().zip(root_adj) {
            adj[r as usize] += g;
        }
        for i in (0..self.nodes.len()).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            match self.nodes[i] {
                Node::Atom(s) => atom_adj[s as usize] += g,
                Node::Not(a) => adj[a as usize] -= g,
                Node::And(a, b) => {
                    if vals[a as usize] + vals[b as usize] - 1.0 > 0.0 {
                        adj[a as usize] += g;
                        adj[b as usize] += g;
                    }
                }
                Node::Or(a, b) => {
                    if vals[a as usize] + vals[b as usize] < 1.0 {
                        adj[a as usize] += g;
                        adj[b as usize] += g;
                    }
                }
                Node::Implies(a, b) => {
                    if vals[b as usize] < vals[a as usize] {
                        adj[a as usize] -= g;
                        adj[b as usize] += g;
                    }
                }
                Node::ForAll { start, len } => {
                    let hm = vals[i];
                    for &c in &self.children[start as usize..(start + len) as usize] {
                        adj[c as usize] += g * harmonic_mean_weight(vals[c as usize], hm, len as usize);
                    }
                }
                Node::Exists { start, len } => {
                    let kids = &self.children[start as usize..(start + len) as usize];
                    let mut best = kids[0];
                    for &c in kids {
                        if vals[c as usize] > vals[best as usize] {
                            best = c;
                        }
                    }
                    adj[best as usize] += g;
                }
            }
        }
    }
}

//! First-order language: signature, terms, formulas, and their text form.
//!
//! Concrete syntax, loosest binding first:
//!
//! ```text
//! forall x,y: ...   exists x: ...     (prefix, extends to the end of the enclosing group)
//! a -> b            implication       (right associative)
//! a | b             disjunction
//! a & b             conjunction
//! ~a                negation
//! P(t1, ..., tm)    atom
//! ```

mod file;
mod parser;
mod print;

use std::fmt;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use file::{parse_theory, write_theory, TheoryFile};
pub use parser::{parse_formula, parse_formula_with_free, ParseError, ParseErrorKind};
pub use print::print_formula;

/// Symbols of a first-order language. Iteration order is declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    constants: IndexSet<String>,
    functions: IndexMap<String, usize>,
    predicates: IndexMap<String, usize>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    fn check_fresh(&self, name: &str) -> Result<()> {
        if !is_identifier(name) {
            return Err(Error::Signature(format!("`{name}` is not a valid identifier")));
        }
        if matches!(name, "forall" | "exists") {
            return Err(Error::Signature(format!("`{name}` is a keyword")));
        }
        if self.contains(name) {
            return Err(Error::Signature(format!("symbol `{name}` declared twice")));
        }
        Ok(())
    }

    pub fn add_constant(&mut self, name: impl Into<String>) -> Result<usize> {
        let name = name.into();
        self.check_fresh(&name)?;
        Ok(self.constants.insert_full(name).0)
    }

    pub fn add_function(&mut self, name: impl Into<String>, arity: usize) -> Result<usize> {
        let name = name.into();
        self.check_fresh(&name)?;
        if arity == 0 {
            return Err(Error::Signature(format!("function `{name}` needs arity >= 1")));
        }
        Ok(self.functions.insert_full(name, arity).0)
    }

    pub fn add_predicate(&mut self, name: impl Into<String>, arity: usize) -> Result<usize> {
        let name = name.into();
        self.check_fresh(&name)?;
        if arity == 0 {
            return Err(Error::Signature(format!("predicate `{name}` needs arity >= 1")));
        }
        Ok(self.predicates.insert_full(name, arity).0)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.constants.contains(name)
            || self.functions.contains_key(name)
            || self.predicates.contains_key(name)
    }

    pub fn constants(&self) -> impl Iterator<Item = &str> {
        self.constants.iter().map(String::as_str)
    }

    pub fn constant_index(&self, name: &str) -> Option<usize> {
        self.constants.get_index_of(name)
    }

    pub fn constant_count(&self) -> usize {
        self.constants.len()
    }

    pub fn constant_name(&self, index: usize) -> Option<&str> {
        self.constants.get_index(index).map(String::as_str)
    }

    pub fn functions(&self) -> impl Iterator<Item = (&str, usize)> {
        self.functions.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn function_arity(&self, name: &str) -> Option<usize> {
        self.functions.get(name).copied()
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.get_index_of(name)
    }

    pub fn predicates(&self) -> impl Iterator<Item = (&str, usize)> {
        self.predicates.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn predicate_arity(&self, name: &str) -> Option<usize> {
        self.predicates.get(name).copied()
    }

    pub fn predicate_index(&self, name: &str) -> Option<usize> {
        self.predicates.get_index_of(name)
    }

    pub fn predicate_count(&self) -> usize {
        self.predicates.len()
    }

    pub fn predicate_name(&self, index: usize) -> Option<&str> {
        self.predicates.get_index(index).map(|(k, _)| k.as_str())
    }

    /// Unary predicates (P1), in declaration order.
    pub fn unary_predicates(&self) -> impl Iterator<Item = &str> {
        self.predicates
            .iter()
            .filter(|(_, &a)| a == 1)
            .map(|(k, _)| k.as_str())
    }

    /// Binary predicates (P2), in declaration order.
    pub fn binary_predicates(&self) -> impl Iterator<Item = &str> {
        self.predicates
            .iter()
            .filter(|(_, &a)| a == 2)
            .map(|(k, _)| k.as_str())
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(String),
    Apply(String, Vec<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Self {
        Term::Const(name.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    Atom(String, Vec<Term>),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    ForAll(Vec<String>, Box<Formula>),
    Exists(Vec<String>, Box<Formula>),
}

impl Formula {
    pub fn atom(pred: impl Into<String>, args: Vec<Term>) -> Self {
        Formula::Atom(pred.into(), args)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, rhs: Formula) -> Self {
        Formula::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: Formula) -> Self {
        Formula::Or(Box::new(self), Box::new(rhs))
    }

    pub fn implies(self, rhs: Formula) -> Self {
        Formula::Implies(Box::new(self), Box::new(rhs))
    }

    pub fn forall<S: Into<String>>(vars: impl IntoIterator<Item = S>, body: Formula) -> Self {
        Formula::ForAll(vars.into_iter().map(Into::into).collect(), Box::new(body))
    }

    pub fn exists<S: Into<String>>(vars: impl IntoIterator<Item = S>, body: Formula) -> Self {
        Formula::Exists(vars.into_iter().map(Into::into).collect(), Box::new(body))
    }

    pub fn is_closed(&self) -> bool {
        free_variables(self).is_empty()
    }

    /// Nesting depth; atoms have depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Formula::Atom(..) => 1,
            Formula::Not(a) | Formula::ForAll(_, a) | Formula::Exists(_, a) => 1 + a.depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                1 + a.depth().max(b.depth())
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_formula(self))
    }
}

/// Variables not bound by any enclosing quantifier, in first-occurrence order.
pub fn free_variables(f: &Formula) -> Vec<String> {
    fn term(t: &Term, bound: &mut Vec<String>, out: &mut IndexSet<String>) {
        match t {
            Term::Var(v) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            Term::Const(_) => {}
            Term::Apply(_, args) => args.iter().for_each(|a| term(a, bound, out)),
        }
    }
    fn walk(f: &Formula, bound: &mut Vec<String>, out: &mut IndexSet<String>) {
        match f {
            Formula::Atom(_, args) => args.iter().for_each(|a| term(a, bound, out)),
            Formula::Not(a) => walk(a, bound, out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                walk(a, bound, out);
                walk(b, bound, out);
            }
            Formula::ForAll(vs, body) | Formula::Exists(vs, body) => {
                let mark = bound.len();
                bound.extend(vs.iter().cloned());
                walk(body, bound, out);
                bound.truncate(mark);
            }
        }
    }
    let mut out = IndexSet::new();
    walk(f, &mut Vec::new(), &mut out);
    out.into_iter().collect()
}

/// Checks arities and that every symbol is declared.
pub fn check_formula(f: &Formula, sig: &Signature) -> Result<()> {
    fn term(t: &Term, sig: &Signature) -> Result<()> {
        match t {
            Term::Var(_) => Ok(()),
            Term::Const(c) => sig
                .constant_index(c)
                .map(|_| ())
                .ok_or_else(|| Error::Signature(format!("unknown constant `{c}`"))),
            Term::Apply(fun, args) => {
                let arity = sig
                    .function_arity(fun)
                    .ok_or_else(|| Error::Signature(format!("unknown function `{fun}`")))?;
                if arity != args.len() {
                    return Err(Error::Signature(format!(
                        "function `{fun}` expects {arity} arguments, got {}",
                        args.len()
                    )));
                }
                args.iter().try_for_each(|a| term(a, sig))
            }
        }
    }
    match f {
        Formula::Atom(p, args) => {
            let arity = sig
                .predicate_arity(p)
                .ok_or_else(|| Error::Signature(format!("unknown predicate `{p}`")))?;
            if arity != args.len() {
                return Err(Error::Signature(format!(
                    "predicate `{p}` expects {arity} arguments, got {}",
                    args.len()
                )));
            }
            args.iter().try_for_each(|a| term(a, sig))
        }
        Formula::Not(a) | Formula::ForAll(_, a) | Formula::Exists(_, a) => check_formula(a, sig),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            check_formula(a, sig)?;
            check_formula(b, sig)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(p: &str, vars: &[&str]) -> Formula {
        Formula::atom(p, vars.iter().map(|v| Term::var(*v)).collect())
    }

    #[test]
    fn free_variables_examples() {
        assert_eq!(free_variables(&atom("partOf", &["x", "y"])), vec!["x", "y"]);
        assert!(free_variables(&Formula::forall(["x"], atom("Dog", &["x"]))).is_empty());
        let f = atom("Dog", &["x"]).implies(Formula::forall(["y"], atom("partOf", &["x", "y"])));
        assert_eq!(free_variables(&f), vec!["x"]);
    }

    #[test]
    fn signature_rejects_duplicates_and_zero_arity() {
        let mut sig = Signature::new();
        sig.add_constant("b1").unwrap();
        assert!(sig.add_predicate("b1", 1).is_err());
        assert!(sig.add_predicate("Dog", 0).is_err());
        assert!(sig.add_function("forall", 1).is_err());
        assert!(sig.add_constant("1b").is_err());
    }

    #[test]
    fn predicate_order_is_declaration_order() {
        let mut sig = Signature::new();
        for p in ["Zebra", "Ant", "Moth"] {
            sig.add_predicate(p, 1).unwrap();
        }
        sig.add_predicate("partOf", 2).unwrap();
        assert_eq!(sig.unary_predicates().collect::<Vec<_>>(), ["Zebra", "Ant", "Moth"]);
        assert_eq!(sig.binary_predicates().collect::<Vec<_>>(), ["partOf"]);
        assert_eq!(sig.predicate_index("partOf"), Some(3));
    }
}

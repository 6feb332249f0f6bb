//! Line-oriented theory files.
//!
//! ```text
//! # comment
//! const b1 b2
//! pred1 Dog Cat
//! pred2 partOf
//! func1 succ
//! Dog(b1)
//! forall x,y: partOf(x,y) -> ~partOf(y,x)
//! ```
//!
//! Declarations (`const`, `predN`, `funcN`) extend the signature; every other
//! non-blank line is one closed clause.

use super::parser::{parse_formula, ParseError, ParseErrorKind};
use super::{print_formula, Formula, Signature};

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryFile {
    pub signature: Signature,
    pub clauses: Vec<Formula>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn declaration(keyword: &str) -> Option<(char, usize)> {
    if keyword == "const" {
        return Some(('c', 0));
    }
    for (prefix, kind) in [("pred", 'p'), ("func", 'f')] {
        if let Some(rest) = keyword.strip_prefix(prefix) {
            if let Ok(arity) = rest.parse::<usize>() {
                return Some((kind, arity));
            }
        }
    }
    None
}

pub fn parse_theory(text: &str) -> Result<TheoryFile, ParseError> {
    let mut signature = Signature::new();
    let mut clauses = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw);
        let trimmed = line.trim_start();
        if trimmed.trim().is_empty() {
            continue;
        }
        let indent = line.len() - trimmed.len();
        let keyword = trimmed.split_whitespace().next().unwrap_or("");
        if let Some((kind, arity)) = declaration(keyword) {
            let rest = &trimmed[keyword.len()..];
            let mut offset = 0;
            for name in rest.split_whitespace() {
                let at = rest[offset..].find(name).map_or(0, |p| p + offset);
                offset = at + name.len();
                let col = indent + keyword.len() + at + 1;
                let res = match kind {
                    'c' => signature.add_constant(name).map(|_| ()),
                    'p' => signature.add_predicate(name, arity).map(|_| ()),
                    _ => signature.add_function(name, arity).map(|_| ()),
                };
                if let Err(e) = res {
                    return Err(ParseError::at(col, ParseErrorKind::Header(e.to_string()))
                        .on_line(line_no));
                }
            }
            continue;
        }
        let f = parse_formula(line, &signature).map_err(|e| e.on_line(line_no))?;
        clauses.push(f);
    }
    Ok(TheoryFile { signature, clauses })
}

/// Renders a signature header followed by one clause per line.
pub fn write_theory(signature: &Signature, clauses: &[Formula]) -> String {
    let mut out = String::new();
    let consts: Vec<&str> = signature.constants().collect();
    if !consts.is_empty() {
        out.push_str("const ");
        out.push_str(&consts.join(" "));
        out.push('\n');
    }
    let mut arities: Vec<usize> = signature.functions().map(|(_, a)| a).collect();
    arities.sort_unstable();
    arities.dedup();
    for a in arities {
        let names: Vec<&str> = signature
            .functions()
            .filter(|&(_, ar)| ar == a)
            .map(|(n, _)| n)
            .collect();
        out.push_str(&format!("func{a} {}\n", names.join(" ")));
    }
    // One line per maximal same-arity run keeps declaration order intact.
    let preds: Vec<(&str, usize)> = signature.predicates().collect();
    let mut i = 0;
    while i < preds.len() {
        let a = preds[i].1;
        let mut j = i;
        while j < preds.len() && preds[j].1 == a {
            j += 1;
        }
        let names: Vec<&str> = preds[i..j].iter().map(|(n, _)| *n).collect();
        out.push_str(&format!("pred{a} {}\n", names.join(" ")));
        i = j;
    }
    for c in clauses {
        out.push_str(&print_formula(c));
        out.push('\n');
    }
    out
}

use super::{Formula, Term};

const QUANT: u8 = 0;
const IMPLIES: u8 = 1;
const OR: u8 = 2;
const AND: u8 = 3;
const UNARY: u8 = 4;

fn level(f: &Formula) -> u8 {
    match f {
        Formula::ForAll(..) | Formula::Exists(..) => QUANT,
        Formula::Implies(..) => IMPLIES,
        Formula::Or(..) => OR,
        Formula::And(..) => AND,
        Formula::Not(_) | Formula::Atom(..) => UNARY,
    }
}

/// Canonical text with the fewest parentheses that still parse back to `f`.
pub fn print_formula(f: &Formula) -> String {
    let mut out = String::new();
    write(f, QUANT, true, &mut out);
    out
}

// `tail` is true when nothing follows `f` inside the current group, which is
// the only place a bare quantifier may appear.
fn write(f: &Formula, min_level: u8, tail: bool, out: &mut String) {
    let lvl = level(f);
    let paren = if lvl == QUANT { !tail } else { lvl < min_level };
    if paren {
        out.push('(');
        write(f, QUANT, true, out);
        out.push(')');
        return;
    }
    match f {
        Formula::Atom(p, args) => {
            out.push_str(p);
            write_args(args, out);
        }
        Formula::Not(a) => {
            out.push('~');
            write(a, UNARY, tail, out);
        }
        Formula::And(a, b) => {
            write(a, AND, false, out);
            out.push_str(" & ");
            write(b, UNARY, tail, out);
        }
        Formula::Or(a, b) => {
            write(a, OR, false, out);
            out.push_str(" | ");
            write(b, AND, tail, out);
        }
        Formula::Implies(a, b) => {
            write(a, OR, false, out);
            out.push_str(" -> ");
            write(b, IMPLIES, tail, out);
        }
        Formula::ForAll(vs, body) | Formula::Exists(vs, body) => {
            out.push_str(if matches!(f, Formula::ForAll(..)) {
                "forall "
            } else {
                "exists "
            });
            out.push_str(&vs.join(","));
            out.push_str(": ");
            write(body, QUANT, tail, out);
        }
    }
}

fn write_args(args: &[Term], out: &mut String) {
    out.push('(');
    for (i, t) in args.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_term(t, out);
    }
    out.push(')');
}

fn write_term(t: &Term, out: &mut String) {
    match t {
        Term::Var(v) | Term::Const(v) => out.push_str(v),
        Term::Apply(f, args) => {
            out.push_str(f);
            write_args(args, out);
        }
    }
}

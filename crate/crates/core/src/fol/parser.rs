use std::fmt;

use super::{Formula, Signature, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical(char),
    Unexpected { found: String, expected: &'static str },
    UnknownSymbol(String),
    ArityMismatch { symbol: String, expected: usize, found: usize },
    UnboundVariable(String),
    ShadowsSymbol(String),
    Header(String),
}

/// Parse failure with a 1-based column (and line, when parsing files).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: Option<usize>,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub(crate) fn at(column: usize, kind: ParseErrorKind) -> Self {
        Self {
            line: None,
            column,
            kind,
        }
    }

    pub(crate) fn on_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}, column {}: ", self.column)?,
            None => write!(f, "column {}: ", self.column)?,
        }
        match &self.kind {
            ParseErrorKind::Lexical(c) => write!(f, "unexpected character `{c}`"),
            ParseErrorKind::Unexpected { found, expected } => {
                write!(f, "expected {expected}, found {found}")
            }
            ParseErrorKind::UnknownSymbol(s) => write!(f, "unknown symbol `{s}`"),
            ParseErrorKind::ArityMismatch {
                symbol,
                expected,
                found,
            } => write!(f, "`{symbol}` takes {expected} arguments, got {found}"),
            ParseErrorKind::UnboundVariable(v) => write!(f, "unbound variable `{v}`"),
            ParseErrorKind::ShadowsSymbol(v) => {
                write!(f, "quantified variable `{v}` clashes with a declared symbol")
            }
            ParseErrorKind::Header(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Forall,
    Exists,
    LParen,
    RParen,
    Comma,
    Colon,
    Not,
    And,
    Or,
    Arrow,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Forall => "`forall`".into(),
            Tok::Exists => "`exists`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Not => "`~`".into(),
            Tok::And => "`&`".into(),
            Tok::Or => "`|`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            _ if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '(' => out.push((Tok::LParen, col)),
            ')' => out.push((Tok::RParen, col)),
            ',' => out.push((Tok::Comma, col)),
            ':' => out.push((Tok::Colon, col)),
            '~' => out.push((Tok::Not, col)),
            '&' => out.push((Tok::And, col)),
            '|' => out.push((Tok::Or, col)),
            '-' if chars.get(i + 1) == Some(&'>') => {
                out.push((Tok::Arrow, col));
                i += 2;
                continue;
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let tok = match word.as_str() {
                    "forall" => Tok::Forall,
                    "exists" => Tok::Exists,
                    _ => Tok::Ident(word),
                };
                out.push((tok, col));
                continue;
            }
            _ => return Err(ParseError::at(col, ParseErrorKind::Lexical(c))),
        }
        i += 1;
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    sig: &'a Signature,
    bound: Vec<String>,
    free: &'a [String],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn col(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        ParseError::at(
            self.col(),
            ParseErrorKind::Unexpected {
                found: self.peek().describe(),
                expected,
            },
        )
    }

    fn expect(&mut self, tok: Tok, expected: &'static str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn implication(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.implication()?;
            Ok(lhs.implies(rhs))
        } else {
            Ok(lhs)
        }
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.conjunction()?;
            lhs = lhs.or(rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.unary()?;
            lhs = lhs.and(rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::Not => {
                self.bump();
                Ok(self.unary()?.not())
            }
            Tok::Forall | Tok::Exists => self.quantified(),
            Tok::LParen => {
                self.bump();
                let f = self.implication()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(_) => self.atom(),
            _ => Err(self.unexpected("a formula")),
        }
    }

    fn quantified(&mut self) -> Result<Formula, ParseError> {
        let (q, _) = self.bump();
        let mut vars = Vec::new();
        loop {
            let col = self.col();
            match self.bump().0 {
                Tok::Ident(v) => {
                    if self.sig.contains(&v) {
                        return Err(ParseError::at(col, ParseErrorKind::ShadowsSymbol(v)));
                    }
                    vars.push(v);
                }
                _ => {
                    self.pos -= 1;
                    return Err(self.unexpected("a variable name"));
                }
            }
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::Colon => {
                    self.bump();
                    break;
                }
                _ => return Err(self.unexpected("`,` or `:`")),
            }
        }
        let mark = self.bound.len();
        self.bound.extend(vars.iter().cloned());
        let body = self.implication();
        self.bound.truncate(mark);
        let body = body?;
        Ok(if q == Tok::Forall {
            Formula::ForAll(vars, Box::new(body))
        } else {
            Formula::Exists(vars, Box::new(body))
        })
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        let (tok, col) = self.bump();
        let Tok::Ident(name) = tok else {
            unreachable!("atom called on non-identifier")
        };
        let Some(arity) = self.sig.predicate_arity(&name) else {
            return Err(ParseError::at(col, ParseErrorKind::UnknownSymbol(name)));
        };
        let args = self.arguments()?;
        if args.len() != arity {
            return Err(ParseError::at(
                col,
                ParseErrorKind::ArityMismatch {
                    symbol: name,
                    expected: arity,
                    found: args.len(),
                },
            ));
        }
        Ok(Formula::Atom(name, args))
    }

    fn arguments(&mut self) -> Result<Vec<Term>, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = vec![self.term()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.term()?);
        }
        self.expect(Tok::RParen, "`,` or `)`")?;
        Ok(args)
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let col = self.col();
        let name = match self.peek().clone() {
            Tok::Ident(n) => n,
            _ => return Err(self.unexpected("a term")),
        };
        self.bump();
        if *self.peek() == Tok::LParen {
            let Some(arity) = self.sig.function_arity(&name) else {
                return Err(ParseError::at(col, ParseErrorKind::UnknownSymbol(name)));
            };
            let args = self.arguments()?;
            if args.len() != arity {
                return Err(ParseError::at(
                    col,
                    ParseErrorKind::ArityMismatch {
                        symbol: name,
                        expected: arity,
                        found: args.len(),
                    },
                ));
            }
            return Ok(Term::Apply(name, args));
        }
        if self.sig.constant_index(&name).is_some() {
            return Ok(Term::Const(name));
        }
        if let Some(arity) = self.sig.function_arity(&name) {
            return Err(ParseError::at(
                col,
                ParseErrorKind::ArityMismatch {
                    symbol: name,
                    expected: arity,
                    found: 0,
                },
            ));
        }
        if self.sig.predicate_arity(&name).is_some() {
            return Err(ParseError::at(
                col,
                ParseErrorKind::Unexpected {
                    found: format!("predicate `{name}`"),
                    expected: "a term",
                },
            ));
        }
        if self.bound.contains(&name) || self.free.contains(&name) {
            Ok(Term::Var(name))
        } else {
            Err(ParseError::at(col, ParseErrorKind::UnboundVariable(name)))
        }
    }
}

/// Parses a closed formula over `sig`.
pub fn parse_formula(text: &str, sig: &Signature) -> Result<Formula, ParseError> {
    parse_formula_with_free(text, sig, &[])
}

/// Parses a formula whose variables may also come from `free`.
pub fn parse_formula_with_free(
    text: &str,
    sig: &Signature,
    free: &[String],
) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        sig,
        bound: Vec::new(),
        free,
    };
    let f = p.implication()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(f)
}

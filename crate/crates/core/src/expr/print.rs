//! Infix rendering and its inverse.
//!
//! Both `+` and `*` associate to the right, `*` binds tighter than `+`, so
//! the printer only parenthesizes a left operand of the same or lower
//! precedence and a right operand of lower precedence. The grammar is
//! documented in `docs/expression-grammar.md`.

use std::collections::HashMap;
use std::fmt::Write;

use super::{ExprId, ExprStore, Node, StateOrder};
use crate::error::ParseError;

/// `%g`-style rendering with six significant digits.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_owned();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".to_owned()
        } else if v > 0.0 {
            "inf".to_owned()
        } else {
            "-inf".to_owned()
        };
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_owned()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Sum,
    Product,
    Atom,
}

impl ExprStore {
    fn prec(&self, id: ExprId) -> Prec {
        match self.node(id) {
            Node::Add(..) => Prec::Sum,
            Node::Mul(..) => Prec::Product,
            Node::Const(v) if v < 0.0 => Prec::Product,
            _ => Prec::Atom,
        }
    }

    fn var_name(&self, slot: u32) -> String {
        match self.layout().classify(slot as usize) {
            Some((StateOrder::Position, j)) => format!("q{}", j + 1),
            Some((StateOrder::Velocity, j)) => format!("qd{}", j + 1),
            Some((StateOrder::Acceleration, j)) => format!("qdd{}", j + 1),
            None => format!("s{slot}"),
        }
    }

    fn write_expr(&self, id: ExprId, names: &HashMap<ExprId, String>, out: &mut String) {
        if let Some(name) = names.get(&id) {
            out.push_str(name);
            return;
        }
        let child = |c: ExprId, paren: bool, out: &mut String| {
            if paren {
                out.push('(');
            }
            self.write_expr(c, names, out);
            if paren {
                out.push(')');
            }
        };
        let named = |c: ExprId| names.contains_key(&c);
        match self.node(id) {
            Node::Var(s) => out.push_str(&self.var_name(s)),
            Node::Coeff(s) => {
                let _ = write!(out, "c{s}");
            }
            Node::Const(v) => out.push_str(&format_number(v)),
            Node::Add(a, b) => {
                child(a, !named(a) && self.prec(a) <= Prec::Sum, out);
                out.push_str(" + ");
                child(b, false, out);
            }
            Node::Mul(a, b) => {
                let left_paren = !named(a)
                    && (self.prec(a) <= Prec::Product && !matches!(self.node(a), Node::Const(_)));
                child(a, left_paren, out);
                out.push('*');
                child(b, !named(b) && self.prec(b) == Prec::Sum, out);
            }
            Node::Sin(a) => {
                out.push_str("sin(");
                child(a, false, out);
                out.push(')');
            }
            Node::Cos(a) => {
                out.push_str("cos(");
                child(a, false, out);
                out.push(')');
            }
        }
    }

    /// Deterministic infix form. Variables print as `q1`, `qd1`, `qdd1`,
    /// coefficient slots as `c0`, constants with six significant digits.
    pub fn pretty(&self, id: ExprId) -> String {
        let mut out = String::new();
        self.write_expr(id, &HashMap::new(), &mut out);
        out
    }

    /// Multi-line rendering that names every compound node used more than
    /// once (`t<id> = ...`), keeping output linear in the DAG size. The last
    /// line is the root.
    pub fn pretty_shared(&self, root: ExprId) -> String {
        let order = self.reachable(root);
        let mut uses: HashMap<ExprId, usize> = HashMap::new();
        for &id in &order {
            match self.node(id) {
                Node::Add(a, b) | Node::Mul(a, b) => {
                    *uses.entry(a).or_default() += 1;
                    *uses.entry(b).or_default() += 1;
                }
                Node::Sin(a) | Node::Cos(a) => *uses.entry(a).or_default() += 1,
                _ => {}
            }
        }
        let mut names = HashMap::new();
        let mut out = String::new();
        for &id in &order {
            let compound = matches!(
                self.node(id),
                Node::Add(..) | Node::Mul(..) | Node::Sin(_) | Node::Cos(_)
            );
            if id != root && compound && uses.get(&id).copied().unwrap_or(0) > 1 {
                let name = format!("t{}", id.index());
                let _ = write!(out, "{name} = ");
                self.write_expr(id, &names, &mut out);
                out.push('\n');
                names.insert(id, name);
            }
        }
        self.write_expr(root, &names, &mut out);
        out.push('\n');
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Star,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            '*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            '-' | '0'..='9' | '.' => {
                let start = i;
                i += 1;
                if c == '-' && src[i..].starts_with("inf") {
                    i += 3;
                } else {
                    while i < bytes.len() {
                        let d = bytes[i] as char;
                        let exp_sign =
                            (d == '-' || d == '+') && matches!(bytes[i - 1] as char, 'e' | 'E');
                        if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                            i += 1;
                        } else {
                            break;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| ParseError::BadNumber {
                    text: text.to_owned(),
                    pos: start,
                })?;
                toks.push((Tok::Num(v), start));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_alphanumeric() {
                    i += 1;
                }
                let word = &src[start..i];
                match word {
                    "nan" => toks.push((Tok::Num(f64::NAN), start)),
                    "inf" => toks.push((Tok::Num(f64::INFINITY), start)),
                    _ => toks.push((Tok::Ident(word.to_owned()), start)),
                }
            }
            other => {
                return Err(ParseError::UnexpectedChar {
                    found: other,
                    pos: i,
                })
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    store: &'a mut ExprStore,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn next(&mut self, expected: &'static str) -> Result<(Tok, usize), ParseError> {
        let t = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or(ParseError::UnexpectedEnd { expected })?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, want: Tok, expected: &'static str) -> Result<(), ParseError> {
        let (t, pos) = self.next(expected)?;
        if t == want {
            Ok(())
        } else {
            Err(ParseError::UnexpectedToken {
                found: format!("{t:?}"),
                pos,
                expected,
            })
        }
    }

    fn sum(&mut self) -> Result<ExprId, ParseError> {
        let left = self.product()?;
        if self.peek() == Some(&Tok::Plus) {
            self.pos += 1;
            let right = self.sum()?;
            return Ok(self.store.add(left, right));
        }
        Ok(left)
    }

    fn product(&mut self) -> Result<ExprId, ParseError> {
        let left = self.atom()?;
        if self.peek() == Some(&Tok::Star) {
            self.pos += 1;
            let right = self.product()?;
            return Ok(self.store.mul(left, right));
        }
        Ok(left)
    }

    fn atom(&mut self) -> Result<ExprId, ParseError> {
        let (tok, pos) = self.next("an operand")?;
        match tok {
            Tok::Num(v) => Ok(self.store.constant(v)),
            Tok::LParen => {
                let e = self.sum()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "sin" || name == "cos" => {
                self.expect(Tok::LParen, "'(' after function name")?;
                let arg = self.sum()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(if name == "sin" {
                    self.store.sin(arg)
                } else {
                    self.store.cos(arg)
                })
            }
            Tok::Ident(name) => self.variable(&name, pos),
            other => Err(ParseError::UnexpectedToken {
                found: format!("{other:?}"),
                pos,
                expected: "an operand",
            }),
        }
    }

    fn variable(&mut self, name: &str, pos: usize) -> Result<ExprId, ParseError> {
        let unknown = || ParseError::UnknownVariable {
            name: name.to_owned(),
            pos,
        };
        let split = name.find(|c: char| c.is_ascii_digit()).ok_or_else(unknown)?;
        let (prefix, digits) = name.split_at(split);
        let n: usize = digits.parse().map_err(|_| unknown())?;
        if prefix == "c" {
            return Ok(self.store.coeff(n));
        }
        let layout = self.store.layout();
        if n == 0 || n > layout.n_joints() {
            return Err(unknown());
        }
        let slot = match prefix {
            "q" => layout.position(n - 1),
            "qd" => layout.velocity(n - 1),
            "qdd" => layout.acceleration(n - 1),
            _ => return Err(unknown()),
        };
        Ok(self.store.var(slot))
    }
}

/// Parses the output of [`ExprStore::pretty`] back into `store`.
pub fn parse(store: &mut ExprStore, src: &str) -> Result<ExprId, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        store,
    };
    let e = p.sum()?;
    if let Some((t, pos)) = p.toks.get(p.pos) {
        return Err(ParseError::UnexpectedToken {
            found: format!("{t:?}"),
            pos: *pos,
            expected: "end of input",
        });
    }
    Ok(e)
}

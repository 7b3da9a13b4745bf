//! Recursive-descent parser for coordinate expressions.
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := ("-" | "+") unary | power
//! power   := atom ("^" exponent)?
//! exponent:= ["-" | "+"] integer | "(" ["-" | "+"] integer ")"
//! atom    := number | number "i" | "i" | "pi" | variable
//!          | func "(" expr ")" | "(" expr ")"
//! func    := "exp" | "ln" | "sin" | "cos" | "sqrt"
//! ```
//!
//! `-u1^2` parses as `-(u1^2)`. Exponents must be integer literals.

use std::sync::Arc;

use num_complex::Complex64;

use super::ast::{Expr, Func};
use crate::error::{Error, Result};

/// How identifiers map to variable slots.
#[derive(Clone, Debug)]
pub enum VarNames {
    /// `u1 .. uN`.
    Indexed { dim: usize },
    /// An explicit list, e.g. `["x", "y"]`.
    Named(Vec<String>),
}

impl VarNames {
    pub fn dim(&self) -> usize {
        match self {
            VarNames::Indexed { dim } => *dim,
            VarNames::Named(v) => v.len(),
        }
    }

    fn lookup(&self, ident: &str, position: usize) -> Result<Option<usize>> {
        match self {
            VarNames::Indexed { dim } => {
                let Some(digits) = ident.strip_prefix('u') else {
                    return Ok(None);
                };
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return Ok(None);
                }
                let index: usize = digits.parse().map_err(|_| Error::Syntax {
                    position,
                    message: format!("bad variable index in '{ident}'"),
                })?;
                if index == 0 || index > *dim {
                    return Err(Error::Arity { index, dim: *dim });
                }
                Ok(Some(index - 1))
            }
            VarNames::Named(names) => Ok(names.iter().position(|n| n == ident)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Imag(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let simple = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = simple {
            out.push((t, start));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent part only when followed by digits, so `2e` is not swallowed
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &text[start..i];
            let value: f64 = lit.parse().map_err(|_| Error::Syntax {
                position: start,
                message: format!("malformed number '{lit}'"),
            })?;
            let imag = i < bytes.len()
                && bytes[i] == b'i'
                && !(i + 1 < bytes.len() && (bytes[i + 1].is_ascii_alphanumeric() || bytes[i + 1] == b'_'));
            if imag {
                i += 1;
                out.push((Tok::Imag(value), start));
            } else {
                out.push((Tok::Num(value), start));
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
            continue;
        }
        return Err(Error::Syntax {
            position: start,
            message: format!("unexpected character '{}'", text[start..].chars().next().unwrap()),
        });
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    vars: &'a VarNames,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            position: self.here(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = fold(Expr::Add(Arc::new(lhs), Arc::new(rhs)));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = fold(Expr::Sub(Arc::new(lhs), Arc::new(rhs)));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Mul(Arc::new(lhs), Arc::new(rhs));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Div(Arc::new(lhs), Arc::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(fold(Expr::Neg(Arc::new(self.unary()?))))
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let n = self.exponent()?;
        Ok(Expr::Pow(Arc::new(base), n))
    }

    fn exponent(&mut self) -> Result<i32> {
        let paren = self.peek() == Some(&Tok::LParen);
        if paren {
            self.pos += 1;
        }
        let sign = match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                -1
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                1
            }
            _ => 1,
        };
        let n = match self.peek() {
            Some(Tok::Num(x)) if x.fract() == 0.0 && x.abs() <= i32::MAX as f64 => *x as i32,
            _ => return self.err("exponent must be an integer literal"),
        };
        self.pos += 1;
        if paren {
            self.expect(Tok::RParen, "')' after exponent")?;
        }
        Ok(sign * n)
    }

    fn atom(&mut self) -> Result<Expr> {
        let position = self.here();
        match self.bump() {
            Some(Tok::Num(x)) => Ok(Expr::Const(Complex64::new(x, 0.0))),
            Some(Tok::Imag(y)) => Ok(Expr::Const(Complex64::new(0.0, y))),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if self.peek() == Some(&Tok::LParen) {
                    let Some(func) = Func::from_name(&name) else {
                        return Err(Error::Syntax {
                            position,
                            message: format!("unknown function '{name}'"),
                        });
                    };
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "')' after function argument")?;
                    return Ok(Expr::Call(func, Arc::new(arg)));
                }
                if let Some(k) = self.vars.lookup(&name, position)? {
                    return Ok(Expr::Var(k));
                }
                match name.as_str() {
                    "i" => Ok(Expr::Const(Complex64::new(0.0, 1.0))),
                    "pi" => Ok(Expr::Const(Complex64::new(std::f64::consts::PI, 0.0))),
                    _ => Err(Error::Syntax {
                        position,
                        message: format!("unknown identifier '{name}'"),
                    }),
                }
            }
            Some(_) => Err(Error::Syntax {
                position,
                message: "expected an operand".into(),
            }),
            None => Err(Error::Syntax {
                position,
                message: "unexpected end of input".into(),
            }),
        }
    }
}

/// Collapses sums, differences and negations of literals so that a complex
/// literal written `a+bi` becomes a single constant. These operations are exact,
/// so evaluation is unchanged.
fn fold(e: Expr) -> Expr {
    match &e {
        Expr::Neg(a) => match **a {
            Expr::Const(c) => Expr::Const(-c),
            _ => e,
        },
        Expr::Add(a, b) | Expr::Sub(a, b) => match (&**a, &**b) {
            (Expr::Const(x), Expr::Const(y)) => {
                Expr::Const(if matches!(e, Expr::Add(..)) { x + y } else { x - y })
            }
            _ => e,
        },
        _ => e,
    }
}

pub(crate) fn parse_expr(text: &str, vars: &VarNames) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            position: 0,
            message: "empty expression".into(),
        });
    }
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        vars,
    };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

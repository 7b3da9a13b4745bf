use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

/// Built-in unary functions. All use the principal branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Expression tree over the coordinate variables (0-based indices).
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(Complex64),
    Var(usize),
    Neg(Arc<Expr>),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, i32),
    Call(Func, Arc<Expr>),
}

impl Expr {
    /// Largest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(k) => Some(*k),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, None) => x,
                    (None, y) => y,
                }
            }
        }
    }

    /// Renames variables through `map` (old index -> new index).
    pub fn remap(&self, map: &[usize]) -> Expr {
        let r = |e: &Arc<Expr>| Arc::new(e.remap(map));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(k) => Expr::Var(map[*k]),
            Expr::Neg(a) => Expr::Neg(r(a)),
            Expr::Add(a, b) => Expr::Add(r(a), r(b)),
            Expr::Sub(a, b) => Expr::Sub(r(a), r(b)),
            Expr::Mul(a, b) => Expr::Mul(r(a), r(b)),
            Expr::Div(a, b) => Expr::Div(r(a), r(b)),
            Expr::Pow(a, n) => Expr::Pow(r(a), *n),
            Expr::Call(f, a) => Expr::Call(*f, r(a)),
        }
    }

    /// Replaces every variable by the corresponding expression.
    pub fn substitute(&self, args: &[Arc<Expr>]) -> Expr {
        let r = |e: &Arc<Expr>| Arc::new(e.substitute(args));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(k) => (*args[*k]).clone(),
            Expr::Neg(a) => Expr::Neg(r(a)),
            Expr::Add(a, b) => Expr::Add(r(a), r(b)),
            Expr::Sub(a, b) => Expr::Sub(r(a), r(b)),
            Expr::Mul(a, b) => Expr::Mul(r(a), r(b)),
            Expr::Div(a, b) => Expr::Div(r(a), r(b)),
            Expr::Pow(a, n) => Expr::Pow(r(a), *n),
            Expr::Call(f, a) => Expr::Call(*f, r(a)),
        }
    }

    /// Symbolic partial derivative with respect to variable `k`. Zero and unit
    /// factors are pruned so that repeated differentiation stays compact.
    pub fn derivative(&self, k: usize) -> Expr {
        use Expr::*;
        let zero = || Const(Complex64::new(0.0, 0.0));
        let d = |e: &Arc<Expr>| e.derivative(k);
        match self {
            Const(_) => zero(),
            Var(j) => Const(Complex64::new(if *j == k { 1.0 } else { 0.0 }, 0.0)),
            Neg(a) => neg(d(a)),
            Add(a, b) => add(d(a), d(b)),
            Sub(a, b) => add(d(a), neg(d(b))),
            Mul(a, b) => add(mul(d(a), (**b).clone()), mul((**a).clone(), d(b))),
            Div(a, b) => {
                let num = add(mul(d(a), (**b).clone()), neg(mul((**a).clone(), d(b))));
                if is_zero(&num) {
                    zero()
                } else {
                    Div(Arc::new(num), Arc::new(Pow(b.clone(), 2)))
                }
            }
            Pow(a, n) => match *n {
                0 => zero(),
                1 => d(a),
                n => mul(
                    mul(Const(Complex64::new(n as f64, 0.0)), Pow(a.clone(), n - 1)),
                    d(a),
                ),
            },
            Call(f, a) => {
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Ln => Pow(a.clone(), -1),
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => Neg(Arc::new(Call(Func::Sin, a.clone()))),
                    Func::Sqrt => Div(
                        Arc::new(Const(Complex64::new(0.5, 0.0))),
                        Arc::new(self.clone()),
                    ),
                };
                mul(outer, d(a))
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.size(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == Complex64::new(0.0, 0.0))
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == Complex64::new(1.0, 0.0))
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        a => Expr::Neg(Arc::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        b
    } else if is_zero(&b) {
        a
    } else {
        Expr::Add(Arc::new(a), Arc::new(b))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        Expr::Const(Complex64::new(0.0, 0.0))
    } else if is_one(&a) {
        b
    } else if is_one(&b) {
        a
    } else {
        Expr::Mul(Arc::new(a), Arc::new(b))
    }
}

fn fmt_real(x: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    // `{:?}` prints the shortest string that round-trips.
    if x.is_finite() {
        write!(f, "{:?}", x)
    } else {
        write!(f, "{}", x)
    }
}

/// Fully parenthesized rendering in the parser's own grammar, using `u1..uN`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.im == 0.0 {
                    if c.re.is_sign_negative() {
                        write!(f, "(")?;
                        fmt_real(c.re, f)?;
                        write!(f, ")")
                    } else {
                        fmt_real(c.re, f)
                    }
                } else {
                    write!(f, "(")?;
                    fmt_real(c.re, f)?;
                    write!(f, "{}", if c.im.is_sign_negative() { "-" } else { "+" })?;
                    fmt_real(c.im.abs(), f)?;
                    write!(f, "i)")
                }
            }
            Expr::Var(k) => write!(f, "u{}", k + 1),
            Expr::Neg(a) => write!(f, "(-{})", a),
            Expr::Add(a, b) => write!(f, "({} + {})", a, b),
            Expr::Sub(a, b) => write!(f, "({} - {})", a, b),
            Expr::Mul(a, b) => write!(f, "({} * {})", a, b),
            Expr::Div(a, b) => write!(f, "({} / {})", a, b),
            Expr::Pow(a, n) => write!(f, "({}^({}))", a, n),
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), a),
        }
    }
}

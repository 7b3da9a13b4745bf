//! Closed-form coordinate expressions with exact derivatives up to third order.
//!
//! A [`ScalarField`] is parsed once and then evaluated many times, either as a
//! plain complex value or as a [`Jet3`] carrying all partial derivatives up to
//! the requested order. The grammar is documented in [`parse`](self::parse).

mod ast;
mod jet;
pub mod parse;

use std::fmt;
use std::ops;
use std::sync::Arc;

use num_complex::Complex64;

pub use ast::{Expr, Func};
pub use jet::Jet3;
pub use parse::VarNames;

use crate::error::{Error, Result};

type C = Complex64;

/// An immutable expression in the coordinates `u1..uN`.
#[derive(Clone, Debug)]
pub struct ScalarField {
    source: Arc<str>,
    ast: Arc<Expr>,
    arity: usize,
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.arity == other.arity && (Arc::ptr_eq(&self.ast, &other.ast) || self.ast == other.ast)
    }
}

impl ScalarField {
    /// Parses `text` over the variables `u1..u{dim}`.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        Self::parse_with_names(text, &VarNames::Indexed { dim })
    }

    pub fn parse_with_names(text: &str, names: &VarNames) -> Result<Self> {
        let dim = names.dim();
        if dim == 0 {
            return Err(Error::Input("dimension must be positive".into()));
        }
        let ast = parse::parse_expr(text, names)?;
        Ok(ScalarField {
            source: text.into(),
            ast: Arc::new(ast),
            arity: dim,
        })
    }

    /// Wraps an already built tree. Its rendering becomes the source text.
    pub fn from_expr(expr: Expr, dim: usize) -> Self {
        debug_assert!(expr.max_var().is_none_or(|k| k < dim));
        ScalarField {
            source: expr.to_string().into(),
            ast: Arc::new(expr),
            arity: dim,
        }
    }

    pub fn constant(value: impl Into<C>, dim: usize) -> Self {
        Self::from_expr(Expr::Const(value.into()), dim)
    }

    /// The coordinate `u{index+1}`.
    pub fn var(index: usize, dim: usize) -> Self {
        assert!(index < dim, "variable index out of range");
        Self::from_expr(Expr::Var(index), dim)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// True when the tree is a literal constant.
    pub fn as_constant(&self) -> Option<C> {
        match *self.ast {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Reinterprets the field in a chart of dimension `dim`, sending variable
    /// `k` to `map[k]`.
    pub fn embed(&self, dim: usize, map: &[usize]) -> Self {
        assert!(map.len() >= self.arity && map.iter().all(|&k| k < dim));
        Self::from_expr(self.ast.remap(map), dim)
    }

    /// Substitutes `args[k]` for variable `k`; all `args` share one arity.
    pub fn compose(&self, args: &[ScalarField]) -> Self {
        assert_eq!(args.len(), self.arity, "one argument per variable");
        let dim = args.first().map(|a| a.arity).unwrap_or(self.arity);
        let subs: Vec<Arc<Expr>> = args.iter().map(|a| a.ast.clone()).collect();
        Self::from_expr(self.ast.substitute(&subs), dim)
    }

    /// Symbolic partial derivative along `u{k+1}`.
    pub fn derivative(&self, k: usize) -> Self {
        assert!(k < self.arity, "variable index out of range");
        Self::from_expr(self.ast.derivative(k), self.arity)
    }

    pub fn powi(&self, n: i32) -> Self {
        Self::from_expr(Expr::Pow(self.ast.clone(), n), self.arity)
    }

    pub fn apply(&self, func: Func) -> Self {
        Self::from_expr(Expr::Call(func, self.ast.clone()), self.arity)
    }

    pub fn exp(&self) -> Self {
        self.apply(Func::Exp)
    }

    pub fn ln(&self) -> Self {
        self.apply(Func::Ln)
    }

    pub fn sqrt(&self) -> Self {
        self.apply(Func::Sqrt)
    }

    fn check_point(&self, point: &[C]) -> Result<()> {
        if point.len() != self.arity {
            return Err(Error::Input(format!(
                "point has {} coordinates, field expects {}",
                point.len(),
                self.arity
            )));
        }
        Ok(())
    }

    /// Value at `point`.
    pub fn eval(&self, point: &[C]) -> Result<C> {
        self.check_point(point)?;
        eval_value(&self.ast, point)
    }

    /// Value and all partials up to `order` (0..=3) at `point`.
    pub fn eval_jet(&self, point: &[C], order: u8) -> Result<Jet3> {
        self.check_point(point)?;
        if order > 3 {
            return Err(Error::Input(format!("jet order {order} exceeds 3")));
        }
        eval_jet(&self.ast, point, order)
    }
}

impl fmt::Display for ScalarField {
    /// Fully parenthesized form that parses back to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ast)
    }
}

fn finite(z: C, what: &str) -> Result<C> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::domain(format!("{what} produced a non-finite value")))
    }
}

fn powi(z: C, n: i32) -> C {
    if n >= 0 {
        z.powu(n as u32)
    } else {
        z.powu(n.unsigned_abs()).inv()
    }
}

fn eval_value(e: &Expr, x: &[C]) -> Result<C> {
    Ok(match e {
        Expr::Const(c) => *c,
        Expr::Var(k) => x[*k],
        Expr::Neg(a) => -eval_value(a, x)?,
        Expr::Add(a, b) => eval_value(a, x)? + eval_value(b, x)?,
        Expr::Sub(a, b) => eval_value(a, x)? - eval_value(b, x)?,
        Expr::Mul(a, b) => eval_value(a, x)? * eval_value(b, x)?,
        Expr::Div(a, b) => {
            let d = eval_value(b, x)?;
            if d == C::new(0.0, 0.0) {
                return Err(Error::domain("division by zero"));
            }
            finite(eval_value(a, x)? / d, "division")?
        }
        Expr::Pow(a, n) => {
            let z = eval_value(a, x)?;
            if *n < 0 && z == C::new(0.0, 0.0) {
                return Err(Error::domain("negative power of zero"));
            }
            finite(powi(z, *n), "power")?
        }
        Expr::Call(f, a) => {
            let z = eval_value(a, x)?;
            univariate(*f, z, 0)?[0]
        }
    })
}

/// `[φ(z), φ'(z), φ''(z), φ'''(z)]`, with unused slots zero when `order` is lower.
fn univariate(f: Func, z: C, order: u8) -> Result<[C; 4]> {
    let zero = C::new(0.0, 0.0);
    let out = match f {
        Func::Exp => {
            let e = z.exp();
            [e, e, e, e]
        }
        Func::Ln => {
            if z == zero {
                return Err(Error::domain("ln(0)"));
            }
            let r = z.inv();
            [z.ln(), r, -r * r, 2.0 * r * r * r]
        }
        Func::Sin => {
            let (s, c) = (z.sin(), z.cos());
            [s, c, -s, -c]
        }
        Func::Cos => {
            let (s, c) = (z.sin(), z.cos());
            [c, -s, -c, s]
        }
        Func::Sqrt => {
            let r = z.sqrt();
            if order == 0 {
                [r, zero, zero, zero]
            } else {
                if z == zero {
                    return Err(Error::domain("derivative of sqrt at 0"));
                }
                let d1 = 0.5 / r;
                let d2 = -0.5 * d1 / z;
                let d3 = -1.5 * d2 / z;
                [r, d1, d2, d3]
            }
        }
    };
    let mut out = out;
    for slot in out.iter_mut().skip(order as usize + 1) {
        *slot = zero;
    }
    for v in &out {
        finite(*v, f.name())?;
    }
    Ok(out)
}

fn pow_table(z: C, n: i32, order: u8) -> Result<[C; 4]> {
    let zero = C::new(0.0, 0.0);
    if n < 0 && z == zero {
        return Err(Error::domain("negative power of zero"));
    }
    let mut out = [zero; 4];
    let mut coef = 1.0;
    for (d, slot) in out.iter_mut().enumerate().take(order as usize + 1) {
        if d > 0 {
            coef *= (n - d as i32 + 1) as f64;
        }
        *slot = if coef == 0.0 {
            zero
        } else {
            finite(coef * powi(z, n - d as i32), "power")?
        };
    }
    Ok(out)
}

fn recip_table(z: C, order: u8) -> Result<[C; 4]> {
    if z == C::new(0.0, 0.0) {
        return Err(Error::domain("division by zero"));
    }
    let r = z.inv();
    let r2 = r * r;
    let mut out = [r, -r2, 2.0 * r2 * r, -6.0 * r2 * r2];
    for slot in out.iter_mut().skip(order as usize + 1) {
        *slot = C::new(0.0, 0.0);
    }
    for v in &out {
        finite(*v, "division")?;
    }
    Ok(out)
}

fn eval_jet(e: &Expr, x: &[C], order: u8) -> Result<Jet3> {
    let n = x.len();
    let out = match e {
        Expr::Const(c) => Jet3::constant(n, order, *c),
        Expr::Var(k) => Jet3::variable(n, order, *k, x[*k]),
        Expr::Neg(a) => eval_jet(a, x, order)?.neg(),
        Expr::Add(a, b) => eval_jet(a, x, order)?.add(&eval_jet(b, x, order)?),
        Expr::Sub(a, b) => eval_jet(a, x, order)?.sub(&eval_jet(b, x, order)?),
        Expr::Mul(a, b) => mul_jets(a, b, x, order)?,
        Expr::Div(a, b) => {
            let den = eval_jet(b, x, order)?;
            let inv = den.compose(recip_table(den.value, order)?);
            match &**a {
                Expr::Const(c) => inv.scale(*c),
                _ => eval_jet(a, x, order)?.mul(&inv),
            }
        }
        Expr::Pow(a, p) => {
            let g = eval_jet(a, x, order)?;
            g.compose(pow_table(g.value, *p, order)?)
        }
        Expr::Call(f, a) => {
            let g = eval_jet(a, x, order)?;
            g.compose(univariate(*f, g.value, order)?)
        }
    };
    if !out.is_finite() {
        return Err(Error::domain("evaluation produced a non-finite derivative"));
    }
    Ok(out)
}

fn mul_jets(a: &Expr, b: &Expr, x: &[C], order: u8) -> Result<Jet3> {
    // constant factors skip the full Leibniz expansion
    match (a, b) {
        (Expr::Const(c), other) | (other, Expr::Const(c)) => Ok(eval_jet(other, x, order)?.scale(*c)),
        _ => Ok(eval_jet(a, x, order)?.mul(&eval_jet(b, x, order)?)),
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl ops::$trait<&ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                assert_eq!(self.arity, rhs.arity, "fields live in different charts");
                ScalarField::from_expr(Expr::$variant(self.ast.clone(), rhs.ast.clone()), self.arity)
            }
        }
        impl ops::$trait<ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: ScalarField) -> ScalarField {
                ops::$trait::$method(&self, &rhs)
            }
        }
        impl ops::$trait<&ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                ops::$trait::$method(&self, rhs)
            }
        }
        impl ops::$trait<ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: ScalarField) -> ScalarField {
                ops::$trait::$method(self, &rhs)
            }
        }
        impl ops::$trait<C> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: C) -> ScalarField {
                ops::$trait::$method(self, &ScalarField::constant(rhs, self.arity))
            }
        }
        impl ops::$trait<f64> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: f64) -> ScalarField {
                ops::$trait::$method(self, &ScalarField::constant(rhs, self.arity))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl ops::Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        ScalarField::from_expr(Expr::Neg(self.ast.clone()), self.arity)
    }
}

impl ops::Neg for ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C {
        C::new(re, 0.0)
    }

    #[test]
    fn product_value() {
        let f = ScalarField::parse("u1*u2", 2).unwrap();
        assert_eq!(f.eval(&[c(2.0), c(3.0)]).unwrap(), c(6.0));
    }

    #[test]
    fn exp_at_zero() {
        let f = ScalarField::parse("exp(u1*u2)", 2).unwrap();
        assert_eq!(f.eval(&[c(0.0), c(5.0)]).unwrap(), c(1.0));
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(ScalarField::parse("u1 +", 2), Err(Error::Syntax { .. })));
        assert!(matches!(ScalarField::parse("", 2), Err(Error::Syntax { .. })));
        assert!(matches!(ScalarField::parse("(u1", 2), Err(Error::Syntax { .. })));
        assert!(matches!(ScalarField::parse("u1 u2", 2), Err(Error::Syntax { .. })));
        assert!(matches!(ScalarField::parse("foo(u1)", 2), Err(Error::Syntax { .. })));
        assert!(matches!(ScalarField::parse("u1^0.5", 2), Err(Error::Syntax { .. })));
        assert!(matches!(ScalarField::parse("x", 2), Err(Error::Syntax { .. })));
    }

    #[test]
    fn out_of_range_variable() {
        assert!(matches!(ScalarField::parse("u3", 2), Err(Error::Arity { index: 3, dim: 2 })));
        assert!(matches!(ScalarField::parse("u0", 2), Err(Error::Arity { index: 0, .. })));
    }

    #[test]
    fn bilinear_jet() {
        let f = ScalarField::parse("u1*u2", 2).unwrap();
        let j = f.eval_jet(&[c(2.0), c(3.0)], 2).unwrap();
        assert_eq!(j.value, c(6.0));
        assert_eq!(j.grad, vec![c(3.0), c(2.0)]);
        assert_eq!(j.hess, vec![c(0.0), c(1.0), c(1.0), c(0.0)]);
        assert!(j.third.iter().all(|z| *z == c(0.0)));
    }

    #[test]
    fn exp_gradient_matches_central_difference() {
        let f = ScalarField::parse("exp(u1*u2)", 2).unwrap();
        let j = f.eval_jet(&[c(1.0), c(1.0)], 1).unwrap();
        let h = 1e-5;
        for k in 0..2 {
            let mut p = [c(1.0), c(1.0)];
            let mut m = p;
            p[k] += h;
            m[k] -= h;
            let fd = (f.eval(&p).unwrap() - f.eval(&m).unwrap()) / (2.0 * h);
            assert!((j.grad[k] - fd).norm() < 1e-8);
            assert!((j.grad[k] - c(std::f64::consts::E)).norm() < 1e-14);
        }
    }

    #[test]
    fn ln_of_zero_is_domain_error() {
        let f = ScalarField::parse("ln(u1-u2)", 2).unwrap();
        assert!(matches!(f.eval_jet(&[c(1.0), c(1.0)], 1), Err(Error::Domain { .. })));
        assert!(matches!(f.eval(&[c(1.0), c(1.0)]), Err(Error::Domain { .. })));
    }

    #[test]
    fn division_and_negative_power_at_zero() {
        let f = ScalarField::parse("1/u1", 1).unwrap();
        assert!(f.eval(&[c(0.0)]).is_err());
        assert!(f.eval_jet(&[c(0.0)], 2).is_err());
        let g = ScalarField::parse("u1^-2", 1).unwrap();
        assert!(g.eval_jet(&[c(0.0)], 0).is_err());
        let s = ScalarField::parse("sqrt(u1)", 1).unwrap();
        assert_eq!(s.eval(&[c(0.0)]).unwrap(), c(0.0));
        assert!(s.eval_jet(&[c(0.0)], 1).is_err());
    }

    #[test]
    fn nonnegative_power_at_zero_is_regular() {
        let f = ScalarField::parse("u1^2", 1).unwrap();
        let j = f.eval_jet(&[c(0.0)], 3).unwrap();
        assert_eq!(j.value, c(0.0));
        assert_eq!(j.grad[0], c(0.0));
        assert_eq!(j.d2(0, 0), c(2.0));
        assert_eq!(j.d3(0, 0, 0), c(0.0));
    }

    #[test]
    fn lower_order_zeroes_higher_slots() {
        let f = ScalarField::parse("exp(u1)*sin(u2)", 2).unwrap();
        let j = f.eval_jet(&[c(0.3), c(0.7)], 1).unwrap();
        assert!(j.hess.iter().chain(&j.third).all(|z| *z == c(0.0)));
        let j0 = f.eval_jet(&[c(0.3), c(0.7)], 0).unwrap();
        assert!(j0.grad.iter().all(|z| *z == c(0.0)));
    }

    #[test]
    fn complex_literals_and_constants() {
        let f = ScalarField::parse("2+3i", 1).unwrap();
        assert_eq!(f.eval(&[c(0.0)]).unwrap(), C::new(2.0, 3.0));
        let g = ScalarField::parse("exp(i*pi)", 1).unwrap();
        assert!((g.eval(&[c(0.0)]).unwrap() - c(-1.0)).norm() < 1e-15);
        let h = ScalarField::parse("1.5e-3*u1 + 2E2", 1).unwrap();
        assert_eq!(h.eval(&[c(2.0)]).unwrap(), c(1.5e-3 * 2.0 + 200.0));
    }

    #[test]
    fn precedence() {
        let f = ScalarField::parse("-u1^2 + 2*u1/4 - (u1 - 1)", 1).unwrap();
        assert_eq!(f.eval(&[c(3.0)]).unwrap(), c(-9.0 + 1.5 - 2.0));
        let g = ScalarField::parse("2^-1 * u1^(-1)", 1).unwrap();
        assert_eq!(g.eval(&[c(4.0)]).unwrap(), c(0.125));
    }

    #[test]
    fn named_variables() {
        let names = VarNames::Named(vec!["x".into(), "y".into()]);
        let f = ScalarField::parse_with_names("x*y - y", &names).unwrap();
        assert_eq!(f.eval(&[c(2.0), c(3.0)]).unwrap(), c(3.0));
    }

    #[test]
    fn display_round_trip() {
        for text in [
            "-u1^2 + 2*u1/4 - (u1 - 1)",
            "exp(u1*u2) - ln(u2) * sqrt(u1 + 1e-7)",
            "(2-3.25i)*u1 + i*cos(u2)^(-3)",
            "u2 / (u1 - 1.0000000000000002)",
        ] {
            let f = ScalarField::parse(text, 2).unwrap();
            let g = ScalarField::parse(&f.to_string(), 2).unwrap();
            assert_eq!(f.ast(), g.ast(), "{text} -> {f}");
        }
    }

    #[test]
    fn operators_build_fields() {
        let u1 = ScalarField::var(0, 2);
        let u2 = ScalarField::var(1, 2);
        let f = (&u1 * &u2).exp() + &u1 * 2.0;
        let p = [c(0.5), c(2.0)];
        assert!((f.eval(&p).unwrap() - c(1f64.exp() + 1.0)).norm() < 1e-15);
        let g = -(&u1 / &u2).powi(2);
        assert_eq!(g.eval(&p).unwrap(), c(-0.0625));
    }

    #[test]
    fn symbolic_derivative_agrees_with_jet() {
        let f = ScalarField::parse("exp(u1*u2)/(2+sin(u2)) - ln(u1)^3*sqrt(u1+u2) + cos(u1)^(-2)", 2)
            .unwrap();
        let p = [c(0.7), c(0.4)];
        let j = f.eval_jet(&p, 3).unwrap();
        for k in 0..2 {
            let dk = f.derivative(k);
            let jk = dk.eval_jet(&p, 2).unwrap();
            assert!((jk.value - j.d1(k)).norm() < 1e-13);
            for l in 0..2 {
                assert!((jk.d1(l) - j.d2(k, l)).norm() < 1e-12);
                for m in 0..2 {
                    assert!((jk.d2(l, m) - j.d3(k, l, m)).norm() < 1e-11);
                }
            }
        }
        assert_eq!(ScalarField::parse("u2^2", 2).unwrap().derivative(0).as_constant(), Some(c(0.0)));
    }

    #[test]
    fn embed_and_compose() {
        let f = ScalarField::parse("u1 - 2*u2", 2).unwrap();
        let e = f.embed(3, &[2, 0]);
        assert_eq!(e.eval(&[c(1.0), c(0.0), c(5.0)]).unwrap(), c(3.0));
        let x = ScalarField::parse("u1*u1", 1).unwrap();
        let y = ScalarField::parse("u1+1", 1).unwrap();
        let comp = f.compose(&[x, y]);
        assert_eq!(comp.eval(&[c(3.0)]).unwrap(), c(1.0));
    }
}

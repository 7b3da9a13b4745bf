//! Two-component diagonal pencils.
//!
//! In suitable coordinates a nonsingular compatible pair in two dimensions is
//!
//! ```text
//! g2 = diag(ε¹/(b¹)², ε²/(b²)²),   g1 = diag(ε¹ f¹(u¹)/(b¹)², ε² f²(u²)/(b²)²)
//! ```
//!
//! `g2` is flat iff `∂_1 b² = ε¹ F_2 b¹` and `∂_2 b¹ = −ε² F_1 b²` for some `F`,
//! and the pair is a flat pencil iff moreover
//! `2 F_12 (f¹ − f²) + F_2 f¹′ − F_1 f²′ = 0`.

use num_complex::Complex64;

use crate::compat::{check_constant_curvature, check_flat_pencil, MetricPair, Verdict};
use crate::error::{Error, Result};
use crate::expr::ScalarField;
use crate::geometry::{MetricField, Variance};
use crate::report::Residual;

type C = Complex64;

/// Minimum distance from the line `u¹ = u²` used for default sampling.
pub const DIAGONAL_GAP: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct TwoCompModel {
    pub b1: ScalarField,
    pub b2: ScalarField,
    pub potential: ScalarField,
    pub eps1: i8,
    pub eps2: i8,
    /// Fields of one variable, `f1` evaluated at `u¹` and `f2` at `u²`.
    pub f1: ScalarField,
    pub f2: ScalarField,
}

fn sign(e: i8) -> Result<C> {
    match e {
        1 => Ok(C::new(1.0, 0.0)),
        -1 => Ok(C::new(-1.0, 0.0)),
        _ => Err(Error::Input(format!("ε must be ±1, got {e}"))),
    }
}

impl TwoCompModel {
    pub fn new(
        b1: ScalarField,
        b2: ScalarField,
        potential: ScalarField,
        eps: (i8, i8),
        f1: ScalarField,
        f2: ScalarField,
    ) -> Result<Self> {
        if [&b1, &b2, &potential].iter().any(|x| x.arity() != 2) {
            return Err(Error::Input("b¹, b² and F must be fields over two variables".into()));
        }
        if f1.arity() != 1 || f2.arity() != 1 {
            return Err(Error::Input("f¹ and f² must be fields of one variable".into()));
        }
        sign(eps.0)?;
        sign(eps.1)?;
        Ok(TwoCompModel {
            b1,
            b2,
            potential,
            eps1: eps.0,
            eps2: eps.1,
            f1,
            f2,
        })
    }

    /// Parses all fields; `f1`, `f2` are written in `u1`.
    pub fn parse(b1: &str, b2: &str, potential: &str, eps: (i8, i8), f1: &str, f2: &str) -> Result<Self> {
        Self::new(
            ScalarField::parse(b1, 2)?,
            ScalarField::parse(b2, 2)?,
            ScalarField::parse(potential, 2)?,
            eps,
            ScalarField::parse(f1, 1)?,
            ScalarField::parse(f2, 1)?,
        )
    }

    fn eps(&self) -> (C, C) {
        (sign(self.eps1).unwrap(), sign(self.eps2).unwrap())
    }

    fn f_at(&self, p: &[C]) -> Result<[(C, C); 2]> {
        let a = self.f1.eval_jet(&[p[0]], 1)?;
        let b = self.f2.eval_jet(&[p[1]], 1)?;
        Ok([(a.value, a.d1(0)), (b.value, b.d1(0))])
    }
}

fn check_dim2(points: &[Vec<C>]) -> Result<()> {
    if points.iter().any(|p| p.len() != 2) {
        return Err(Error::Input("two-component checks need points in two dimensions".into()));
    }
    Ok(())
}

/// `max(|∂_1 b² − ε¹ F_2 b¹|, |∂_2 b¹ + ε² F_1 b²|)` over points.
pub fn check_sys(m: &TwoCompModel, points: &[Vec<C>]) -> Result<Residual> {
    check_dim2(points)?;
    let (e1, e2) = m.eps();
    let mut r = Residual::new("sys");
    for p in points {
        let b1 = m.b1.eval_jet(p, 1)?;
        let b2 = m.b2.eval_jet(p, 1)?;
        let f = m.potential.eval_jet(p, 1)?;
        let first = b2.d1(0) - e1 * f.d1(1) * b1.value;
        let second = b1.d1(1) + e2 * f.d1(0) * b2.value;
        r.record(first.norm().max(second.norm()), 0.0, p);
    }
    Ok(r)
}

/// `|2 F_12 (f¹ − f²) + F_2 f¹′ − F_1 f²′|` over points.
pub fn check_lequa(m: &TwoCompModel, points: &[Vec<C>]) -> Result<Residual> {
    check_dim2(points)?;
    let mut r = Residual::new("lequa");
    for p in points {
        let f = m.potential.eval_jet(p, 2)?;
        let [(f1, df1), (f2, df2)] = m.f_at(p)?;
        let v = 2.0 * f.d2(0, 1) * (f1 - f2) + f.d1(1) * df1 - f.d1(0) * df2;
        r.record(v.norm(), 0.0, p);
    }
    Ok(r)
}

/// `diag(ε¹ w¹/(b¹)², ε² w²/(b²)²)`.
fn weighted(m: &TwoCompModel, w1: ScalarField, w2: ScalarField) -> Result<MetricField> {
    let (e1, e2) = m.eps();
    let d1 = &(&w1 * e1) / &m.b1.powi(2);
    let d2 = &(&w2 * e2) / &m.b2.powi(2);
    MetricField::diagonal(Variance::Contravariant, vec![d1, d2])
}

/// The pair `(g1, g2)` in diagonal form.
pub fn assemble_two_metrics(m: &TwoCompModel, points: Vec<Vec<C>>) -> Result<MetricPair> {
    let one = ScalarField::constant(1.0, 2);
    let g2 = weighted(m, one.clone(), one)?;
    let g1 = weighted(m, m.f1.embed(2, &[0]), m.f2.embed(2, &[1]))?;
    MetricPair::new(g1, g2, points)
}

/// `G_n = diag(ε¹ (u¹)ⁿ/(b¹)², ε² (u²)ⁿ/(b²)²)` for `n = 0..=3`.
pub fn pencil_metrics(m: &TwoCompModel) -> Result<Vec<MetricField>> {
    (0..4)
        .map(|n| weighted(m, ScalarField::var(0, 2).powi(n), ScalarField::var(1, 2).powi(n)))
        .collect()
}

#[derive(Clone, Debug)]
pub struct TwoCompEquivalence {
    pub sys: Residual,
    pub lequa: Residual,
    pub equations_hold: bool,
    pub flat_pencil: Verdict,
}

impl TwoCompEquivalence {
    pub fn agree(&self) -> bool {
        self.equations_hold == self.flat_pencil.pass
    }
}

pub fn two_component_equivalence(m: &TwoCompModel, points: &[Vec<C>], tol: f64) -> Result<TwoCompEquivalence> {
    let sys = check_sys(m, points)?;
    let lequa = check_lequa(m, points)?;
    let equations_hold = sys.passes(tol) && lequa.passes(tol);
    let flat_pencil = check_flat_pencil(&assemble_two_metrics(m, points.to_vec())?.with_tol(tol))?;
    Ok(TwoCompEquivalence {
        sys,
        lequa,
        equations_hold,
        flat_pencil,
    })
}

/// The pencil `G_0..G_3` with `(b¹)² = (b²)² = ε²(u¹ − u²)/(4K)`, `ε² = 1`,
/// `ε¹ = −1`, positive branch of `b`, and potential `F = ½ ln(u¹ − u²)`.
#[derive(Clone, Debug)]
pub struct ConstantCurvaturePencil {
    pub k: C,
    pub model: TwoCompModel,
    pub metrics: Vec<MetricField>,
}

#[derive(Clone, Debug)]
pub struct ConstantCurvatureReport {
    /// Normalized flatness residuals of `G_0`, `G_1`, `G_2`.
    pub flatness: [Residual; 3],
    /// `G_3` against curvature `K`.
    pub curvature: Residual,
}

impl ConstantCurvatureReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.flatness.iter().all(|r| r.passes(tol)) && self.curvature.passes(tol)
    }
}

pub fn constant_curvature_pencil(k: C) -> Result<ConstantCurvaturePencil> {
    if k == C::new(0.0, 0.0) {
        return Err(Error::Input("curvature K must be nonzero".into()));
    }
    let d = ScalarField::parse("u1 - u2", 2)?;
    let b = (&d / (k * 4.0)).sqrt();
    let model = TwoCompModel::new(
        b.clone(),
        b,
        &ScalarField::parse("ln(u1 - u2)", 2)? * 0.5,
        (-1, 1),
        ScalarField::var(0, 1),
        ScalarField::var(0, 1),
    )?;
    let metrics = pencil_metrics(&model)?;
    Ok(ConstantCurvaturePencil { k, model, metrics })
}

impl ConstantCurvaturePencil {
    pub fn check(&self, points: &[Vec<C>]) -> Result<ConstantCurvatureReport> {
        check_dim2(points)?;
        if let Some(p) = points.iter().find(|p| p[0] == p[1]) {
            return Err(Error::domain(format!("point {} lies on u1 = u2", crate::error::Point(p.clone()))));
        }
        let flatness = [0, 1, 2].map(|n| flatness_residual(&self.metrics[n], &format!("flatness(G{n})"), points));
        let [a, b, c] = flatness;
        let mut curvature = check_constant_curvature(&self.metrics[3], self.k, points)?;
        curvature.name = "constant_curvature(G3)".into();
        Ok(ConstantCurvatureReport {
            flatness: [a?, b?, c?],
            curvature,
        })
    }
}

fn flatness_residual(g: &MetricField, name: &str, points: &[Vec<C>]) -> Result<Residual> {
    let mut r = Residual::new(name);
    for p in points {
        let geo = g.geometry(p)?;
        r.record(geo.max_curvature(), geo.curvature_scale(), p);
    }
    Ok(r)
}

fn laplacian(a: &ScalarField, p: &[C]) -> Result<(C, C)> {
    let j = a.eval_jet(p, 2)?;
    Ok((j.value, j.d2(0, 0) + j.d2(1, 1)))
}

fn conformal(a: &ScalarField) -> Result<MetricField> {
    if a.arity() != 2 {
        return Err(Error::Input("conformal factor must be a field over two variables".into()));
    }
    MetricField::conformal(Variance::Contravariant, a.exp())
}

#[derive(Clone, Debug)]
pub struct HarmonicReport {
    /// `|Δa|`, absolute.
    pub laplacian: Residual,
    /// Curvature of `exp(a)·δ`, normalized.
    pub curvature: Residual,
}

impl HarmonicReport {
    /// `exp(a)·δ` is flat exactly when `a` is harmonic; both sides must agree.
    pub fn consistent(&self, tol: f64) -> bool {
        self.laplacian.passes(tol) == self.curvature.passes(tol)
    }
}

pub fn harmonic_flatness(a: &ScalarField, points: &[Vec<C>]) -> Result<HarmonicReport> {
    check_dim2(points)?;
    let g = conformal(a)?;
    let mut lap = Residual::new("laplacian");
    let mut curv = Residual::new("curvature");
    for p in points {
        lap.record(laplacian(a, p)?.1.norm(), 0.0, p);
        let geo = g.geometry(p)?;
        curv.record(geo.max_curvature(), geo.curvature_scale(), p);
    }
    Ok(HarmonicReport {
        laplacian: lap,
        curvature: curv,
    })
}

#[derive(Clone, Debug)]
pub struct LiouvilleReport {
    /// `|Δa − 2K e^{−a}|`, absolute.
    pub liouville: Residual,
    /// Constant-curvature residual of `exp(a)·δ` against `K`.
    pub constant_curvature: Residual,
}

impl LiouvilleReport {
    pub fn consistent(&self, tol: f64) -> bool {
        self.liouville.passes(tol) == self.constant_curvature.passes(tol)
    }
}

pub fn liouville_check(a: &ScalarField, k: C, points: &[Vec<C>]) -> Result<LiouvilleReport> {
    check_dim2(points)?;
    let g = conformal(a)?;
    let mut r = Residual::new("liouville");
    for p in points {
        let (v, lap) = laplacian(a, p)?;
        r.record((lap - 2.0 * k * (-v).exp()).norm(), 0.0, p);
    }
    Ok(LiouvilleReport {
        liouville: r,
        constant_curvature: check_constant_curvature(&g, k, points)?,
    })
}

//! Rotation coefficients of diagonal metrics and the reduced Lamé system.
//!
//! With Lamé coefficients `H_i` the diagonal metric is `g^i = 1/H_i²` and the
//! rotation coefficients are `β_ik = (1/H_i) ∂_i H_k` for `i ≠ k`. Residuals:
//!
//! * `lam1`: `∂_k β_ij − β_ik β_kj` for distinct `i, j, k`
//! * `lam2`: `∂_i β_ij + ∂_j β_ji + Σ_{s≠i,j} β_si β_sj` for `i ≠ j`
//! * `lam3x`: `f^i ∂_i β_ij + ½ f^i′ β_ij + f^j ∂_j β_ji + ½ f^j′ β_ji + Σ_{s≠i,j} f^s β_si β_sj`
//!
//! where `f^i` depends on `u^i` alone. All three are reported as absolute
//! values; they are already free of metric scale.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::compat::{check_flat_pencil, MetricPair, Verdict};
use crate::error::{Error, Point, Result};
use crate::expr::ScalarField;
use crate::geometry::{MetricField, Variance};
use crate::grid::{Grid, GridKind};
use crate::report::{map_points, Residual};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// `β_ij` and `∂_k β_ij` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationJet {
    pub n: usize,
    /// `beta[i*n + j]`, diagonal zero.
    pub beta: Vec<C>,
    /// `dbeta[(k*n + i)*n + j] = ∂_k β_ij`.
    pub dbeta: Vec<C>,
}

impl RotationJet {
    pub fn zeros(n: usize) -> Self {
        RotationJet {
            n,
            beta: vec![ZERO; n * n],
            dbeta: vec![ZERO; n * n * n],
        }
    }

    #[inline]
    pub fn b(&self, i: usize, j: usize) -> C {
        self.beta[i * self.n + j]
    }

    #[inline]
    pub fn db(&self, k: usize, i: usize, j: usize) -> C {
        self.dbeta[(k * self.n + i) * self.n + j]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    FromH,
    FromFields,
    FromDressing,
}

type JetFn = dyn Fn(&[C]) -> Result<RotationJet> + Send + Sync;

/// Rotation coefficients as a function of the point.
#[derive(Clone)]
pub struct RotationCoeffs {
    n: usize,
    provenance: Provenance,
    eval: Arc<JetFn>,
}

impl fmt::Debug for RotationCoeffs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RotationCoeffs")
            .field("n", &self.n)
            .field("provenance", &self.provenance)
            .finish_non_exhaustive()
    }
}

fn check_point(n: usize, point: &[C]) -> Result<()> {
    if point.len() != n {
        return Err(Error::Input(format!("point has {} coordinates, expected {n}", point.len())));
    }
    Ok(())
}

impl RotationCoeffs {
    /// Wraps an arbitrary evaluator, e.g. one that re-solves a dressing problem.
    pub fn from_fn<F>(n: usize, provenance: Provenance, f: F) -> Self
    where
        F: Fn(&[C]) -> Result<RotationJet> + Send + Sync + 'static,
    {
        RotationCoeffs {
            n,
            provenance,
            eval: Arc::new(f),
        }
    }

    /// `β_ik = (1/H_i) ∂_i H_k`.
    pub fn from_h(h: &[ScalarField]) -> Result<Self> {
        let n = h.len();
        if n == 0 || h.iter().any(|x| x.arity() != n) {
            return Err(Error::Input(format!("need {n} Lamé coefficients over {n} variables")));
        }
        let h = h.to_vec();
        Ok(Self::from_fn(n, Provenance::FromH, move |p| {
            check_point(n, p)?;
            let jets = h.iter().map(|x| x.eval_jet(p, 2)).collect::<Result<Vec<_>>>()?;
            if let Some(i) = jets.iter().position(|j| j.value == ZERO) {
                return Err(Error::domain(format!("H_{} vanishes at {}", i + 1, Point::from(p))));
            }
            let mut out = RotationJet::zeros(n);
            for i in 0..n {
                let hi = &jets[i];
                for k in 0..n {
                    if i == k {
                        continue;
                    }
                    let hk = &jets[k];
                    out.beta[i * n + k] = hk.d1(i) / hi.value;
                    for l in 0..n {
                        out.dbeta[(l * n + i) * n + k] =
                            hk.d2(l, i) / hi.value - hk.d1(i) * hi.d1(l) / (hi.value * hi.value);
                    }
                }
            }
            Ok(out)
        }))
    }

    /// `β_ij` given directly as fields; `fields[i][i]` is ignored.
    pub fn from_fields(fields: &[Vec<ScalarField>]) -> Result<Self> {
        let n = fields.len();
        if n == 0 || fields.iter().any(|r| r.len() != n || r.iter().any(|x| x.arity() != n)) {
            return Err(Error::Input("β must be an N×N matrix of fields over N variables".into()));
        }
        let fields = fields.to_vec();
        Ok(Self::from_fn(n, Provenance::FromFields, move |p| {
            check_point(n, p)?;
            let mut out = RotationJet::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let jet = fields[i][j].eval_jet(p, 1)?;
                    out.beta[i * n + j] = jet.value;
                    for k in 0..n {
                        out.dbeta[(k * n + i) * n + j] = jet.d1(k);
                    }
                }
            }
            Ok(out)
        }))
    }

    /// Rotation coefficients at s node `a` of a stencil grid. Partials use the
    /// fourth-order central difference `(β₋₂ − 8β₋₁ + 8β₊₁ − β₊₂)/(12h)`, so
    /// the result is only available at the grid's base point.
    pub fn from_grid(grid: &Grid, a: usize) -> Result<Self> {
        if grid.kind != GridKind::RotationStencil {
            return Err(Error::Input("expected a rotation stencil grid".into()));
        }
        if a >= grid.m {
            return Err(Error::Input(format!("s index {a} outside grid of {} nodes", grid.m)));
        }
        if !(grid.step > 0.0) {
            return Err(Error::Input("stencil step must be positive".into()));
        }
        let n = grid.n;
        let mut jet = RotationJet::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                jet.beta[i * n + j] = grid.beta(0, a, i, j);
                for k in 0..n {
                    let b = |t: usize| grid.beta(1 + 4 * k + t, a, i, j);
                    jet.dbeta[(k * n + i) * n + j] = (b(0) - 8.0 * b(1) + 8.0 * b(2) - b(3)) / (12.0 * grid.step);
                }
            }
        }
        let base = grid.points[0].clone();
        Ok(Self::from_fn(n, Provenance::FromDressing, move |p| {
            if p != base.as_slice() {
                return Err(Error::Input(format!(
                    "grid data is only available at {}, not {}",
                    Point(base.clone()),
                    Point::from(p)
                )));
            }
            Ok(jet.clone())
        }))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn jet(&self, point: &[C]) -> Result<RotationJet> {
        (self.eval)(point)
    }
}

/// `β_ik = (1/H_i) ∂_i H_k`.
pub fn rotation_from_h(h: &[ScalarField]) -> Result<RotationCoeffs> {
    RotationCoeffs::from_h(h)
}

fn lam1_at(b: &RotationJet) -> f64 {
    let n = b.n;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i != j && j != k && i != k {
                    worst = worst.max((b.db(k, i, j) - b.b(i, k) * b.b(k, j)).norm());
                }
            }
        }
    }
    worst
}

/// `f_vals[s] = f^s(u^s)`, `f_primes[s] = f^s′(u^s)`; constant one gives `lam2`.
fn lam3x_at(b: &RotationJet, f_vals: &[C], f_primes: &[C]) -> f64 {
    let n = b.n;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let mut r = f_vals[i] * b.db(i, i, j)
                + 0.5 * f_primes[i] * b.b(i, j)
                + f_vals[j] * b.db(j, j, i)
                + 0.5 * f_primes[j] * b.b(j, i);
            for s in 0..n {
                if s != i && s != j {
                    r += f_vals[s] * b.b(s, i) * b.b(s, j);
                }
            }
            worst = worst.max(r.norm());
        }
    }
    worst
}

/// `lam3` in its square-root form, principal branch.
fn lam3_sqrt_at(b: &RotationJet, f_vals: &[C], f_primes: &[C]) -> Result<f64> {
    let n = b.n;
    let roots: Vec<C> = f_vals.iter().map(|f| f.sqrt()).collect();
    if let Some(i) = roots.iter().position(|r| *r == ZERO) {
        return Err(Error::domain(format!("f^{} vanishes", i + 1)));
    }
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            // √f ∂(√f β) = √f (√f ∂β + f′/(2√f) β)
            let term = |a: usize, c: usize| roots[a] * (roots[a] * b.db(a, a, c) + f_primes[a] / (2.0 * roots[a]) * b.b(a, c));
            let mut r = term(i, j) + term(j, i);
            for s in 0..n {
                if s != i && s != j {
                    r += f_vals[s] * b.b(s, i) * b.b(s, j);
                }
            }
            worst = worst.max(r.norm());
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct LameResiduals {
    pub lam1: Residual,
    pub lam2: Residual,
}

pub fn lame_residuals(b: &RotationCoeffs, points: &[Vec<C>]) -> Result<LameResiduals> {
    let ones = vec![C::new(1.0, 0.0); b.dim()];
    let zeros = vec![ZERO; b.dim()];
    let mut lam1 = Residual::new("lam1");
    let mut lam2 = Residual::new("lam2");
    for p in points {
        let jet = b.jet(p)?;
        lam1.record(lam1_at(&jet), 0.0, p);
        lam2.record(lam3x_at(&jet, &ones, &zeros), 0.0, p);
    }
    Ok(LameResiduals { lam1, lam2 })
}

#[derive(Clone, Debug)]
pub struct ReductionReport {
    pub lam3x: Residual,
    /// Square-root form, absent when some `f^i` vanished at a sample point.
    pub lam3_sqrt: Option<Residual>,
    /// Points where some `f^i` lies on the negative real axis, where the
    /// principal square root jumps.
    pub branch_cut_points: Vec<Point>,
}

fn check_f(f: &[ScalarField], n: usize) -> Result<()> {
    if f.len() != n || f.iter().any(|x| x.arity() != 1) {
        return Err(Error::Input(format!("need {n} single-variable eigenvalue functions")));
    }
    Ok(())
}

fn f_jets(f: &[ScalarField], p: &[C]) -> Result<(Vec<C>, Vec<C>)> {
    let mut vals = Vec::with_capacity(f.len());
    let mut primes = Vec::with_capacity(f.len());
    for (i, fi) in f.iter().enumerate() {
        let j = fi.eval_jet(&[p[i]], 1)?;
        vals.push(j.value);
        primes.push(j.d1(0));
    }
    Ok((vals, primes))
}

/// Residual of `lam3x` over `points`, with the square-root form alongside.
pub fn reduction_residual(b: &RotationCoeffs, f: &[ScalarField], points: &[Vec<C>]) -> Result<ReductionReport> {
    check_f(f, b.dim())?;
    let mut lam3x = Residual::new("lam3x");
    let mut sqrt_form = Some(Residual::new("lam3"));
    let mut branch_cut_points = Vec::new();
    for p in points {
        let jet = b.jet(p)?;
        let (vals, primes) = f_jets(f, p)?;
        lam3x.record(lam3x_at(&jet, &vals, &primes), 0.0, p);
        if vals.iter().any(|v| v.im == 0.0 && v.re < 0.0) {
            branch_cut_points.push(Point::from(p.as_slice()));
        }
        if let Some(r) = sqrt_form.as_mut() {
            match lam3_sqrt_at(&jet, &vals, &primes) {
                Ok(v) => r.record(v, 0.0, p),
                Err(Error::Domain { .. }) => sqrt_form = None,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(ReductionReport {
        lam3x,
        lam3_sqrt: sqrt_form,
        branch_cut_points,
    })
}

/// Lamé coefficients, eigenvalue functions and sample points.
#[derive(Clone, Debug)]
pub struct LameData {
    pub h: Vec<ScalarField>,
    /// `f[i]` is a field of one variable, evaluated at `u^i`.
    pub f: Vec<ScalarField>,
    pub points: Vec<Vec<C>>,
}

impl LameData {
    pub fn new(h: Vec<ScalarField>, f: Vec<ScalarField>, points: Vec<Vec<C>>) -> Result<Self> {
        let n = h.len();
        if n == 0 || h.iter().any(|x| x.arity() != n) {
            return Err(Error::Input(format!("need {n} Lamé coefficients over {n} variables")));
        }
        check_f(&f, n)?;
        if let Some(i) = f.iter().position(|x| x.as_constant() == Some(ZERO)) {
            return Err(Error::Input(format!("f^{} is identically zero", i + 1)));
        }
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::Input(format!("sample point {} has wrong dimension", Point(p.clone()))));
        }
        Ok(LameData { h, f, points })
    }

    pub fn dim(&self) -> usize {
        self.h.len()
    }

    /// `f^i(u^i)` as a field over all `N` variables.
    pub fn f_embedded(&self, i: usize) -> ScalarField {
        self.f[i].embed(self.dim(), &[i])
    }
}

/// `g2 = diag(1/H_i²)`, `g1 = diag(f^i(u^i)/H_i²)`.
pub fn assemble_pair(d: &LameData) -> Result<MetricPair> {
    let n = d.dim();
    let g: Vec<ScalarField> = d.h.iter().map(|h| ScalarField::constant(1.0, n) / h.powi(2)).collect();
    let g1: Vec<ScalarField> = (0..n).map(|i| d.f_embedded(i) * &g[i]).collect();
    let g1 = MetricField::diagonal(Variance::Contravariant, g1)?;
    let g2 = MetricField::diagonal(Variance::Contravariant, g)?;
    MetricPair::new(g1, g2, d.points.clone())
}

/// Both sides of the characterization of flat pencils by the reduced Lamé
/// system, evaluated on the same points.
#[derive(Clone, Debug)]
pub struct LameEquivalence {
    pub lam1: Residual,
    pub lam2: Residual,
    pub lam3x: Residual,
    pub lame_holds: bool,
    pub flat_pencil: Verdict,
}

impl LameEquivalence {
    pub fn agree(&self) -> bool {
        self.lame_holds == self.flat_pencil.pass
    }
}

pub fn lame_equivalence(d: &LameData, lame_tol: f64, pair_tol: f64, parallel: bool) -> Result<LameEquivalence> {
    let b = rotation_from_h(&d.h)?;
    let jets = map_points(&d.points, parallel, |p| b.jet(p))?;
    let mut lam1 = Residual::new("lam1");
    let mut lam2 = Residual::new("lam2");
    let mut lam3x = Residual::new("lam3x");
    let ones = vec![C::new(1.0, 0.0); d.dim()];
    let zeros = vec![ZERO; d.dim()];
    for (p, jet) in d.points.iter().zip(&jets) {
        let (vals, primes) = f_jets(&d.f, p)?;
        lam1.record(lam1_at(jet), 0.0, p);
        lam2.record(lam3x_at(jet, &ones, &zeros), 0.0, p);
        lam3x.record(lam3x_at(jet, &vals, &primes), 0.0, p);
    }
    let lame_holds = lam1.passes(lame_tol) && lam2.passes(lame_tol) && lam3x.passes(lame_tol);
    let pair = assemble_pair(d)?.with_tol(pair_tol).with_parallel(parallel);
    let flat_pencil = check_flat_pencil(&pair)?;
    Ok(LameEquivalence {
        lam1,
        lam2,
        lam3x,
        lame_holds,
        flat_pencil,
    })
}

/// `β̃_ik = (√f^i/√f^k) β_ik`, the rotation coefficients of `g1`.
pub fn scaled_rotation(b: &RotationCoeffs, f: &[ScalarField]) -> Result<RotationCoeffs> {
    let n = b.dim();
    check_f(f, n)?;
    let b = b.clone();
    let f = f.to_vec();
    Ok(RotationCoeffs::from_fn(n, b.provenance(), move |p| {
        let jet = b.jet(p)?;
        let (vals, primes) = f_jets(&f, p)?;
        let roots: Vec<C> = vals.iter().map(|v| v.sqrt()).collect();
        if let Some(i) = roots.iter().position(|r| *r == ZERO) {
            return Err(Error::domain(format!("f^{} vanishes at {}", i + 1, Point::from(p))));
        }
        // ∂_l √f^i = δ_il f^i′/(2√f^i)
        let droot = |i: usize, l: usize| if i == l { primes[i] / (2.0 * roots[i]) } else { ZERO };
        let mut out = RotationJet::zeros(n);
        for i in 0..n {
            for k in 0..n {
                if i == k {
                    continue;
                }
                let ratio = roots[i] / roots[k];
                out.beta[i * n + k] = ratio * jet.b(i, k);
                for l in 0..n {
                    let dratio = droot(i, l) / roots[k] - roots[i] * droot(k, l) / (roots[k] * roots[k]);
                    out.dbeta[(l * n + i) * n + k] = dratio * jet.b(i, k) + ratio * jet.db(l, i, k);
                }
            }
        }
        Ok(out)
    }))
}

//! Sampled verdicts on a pair of contravariant metrics.
//!
//! Every verdict is decided from scale-relative residuals: the worst absolute
//! deviation of an identity over all sample points, divided by one plus the
//! largest magnitude among the terms of that identity. Reports keep both
//! numbers and the point where the worst value occurred.
//!
//! Pencil members are sampled at a finite list of `(λ1, λ2)`. A member that is
//! degenerate at every sample point is identically degenerate and skipped,
//! one that is degenerate at only some of them is an error.

mod constructions;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use constructions::{
    associativity_residual, dubrovin_construct_and_check, mokhov_bracket_metric, potential_field, potential_pair,
    DubrovinReport, BracketReport,
};

use crate::error::{Error, Point, Result};
use crate::geometry::{
    eigen_spectrum, nijenhuis, tensor_m_from, Affinor, GeometryJet, MetricField, MetricJets, RootOptions,
    Variance, DEGENERACY_TOL,
};
use crate::linalg;
use crate::report::{map_points, Residual};

type C = Complex64;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_GAP_REL: f64 = 1e-6;

/// `{(1,1), (1,−1), (2,3)}` plus one seeded random complex pair.
pub fn default_lambdas(seed: u64) -> Vec<(C, C)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = || C::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let random = (z(), z());
    vec![
        (C::new(1.0, 0.0), C::new(1.0, 0.0)),
        (C::new(1.0, 0.0), C::new(-1.0, 0.0)),
        (C::new(2.0, 0.0), C::new(3.0, 0.0)),
        random,
    ]
}

/// Two contravariant metrics in one chart together with the sampling setup.
#[derive(Clone, Debug)]
pub struct MetricPair {
    pub g1: MetricField,
    pub g2: MetricField,
    pub lambdas: Vec<(C, C)>,
    pub points: Vec<Vec<C>>,
    pub tol: f64,
    pub degeneracy_tol: f64,
    /// Eigenvalues count as distinct when their gap exceeds `gap_rel · max|λ|`.
    pub gap_rel: f64,
    pub parallel: bool,
}

impl MetricPair {
    pub fn new(g1: MetricField, g2: MetricField, points: Vec<Vec<C>>) -> Result<Self> {
        if g1.dim() != g2.dim() {
            return Err(Error::Input(format!(
                "metrics have dimensions {} and {}",
                g1.dim(),
                g2.dim()
            )));
        }
        if g1.variance() != Variance::Contravariant || g2.variance() != Variance::Contravariant {
            return Err(Error::Input("metric pairs must be given contravariantly".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != g1.dim()) {
            return Err(Error::Input(format!("sample point {} has wrong dimension", Point(p.clone()))));
        }
        Ok(MetricPair {
            g1,
            g2,
            lambdas: default_lambdas(0),
            points,
            tol: DEFAULT_TOL,
            degeneracy_tol: DEGENERACY_TOL,
            gap_rel: DEFAULT_GAP_REL,
            parallel: false,
        })
    }

    pub fn with_lambdas(mut self, lambdas: Vec<(C, C)>) -> Self {
        self.lambdas = lambdas;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn dim(&self) -> usize {
        self.g1.dim()
    }
}

/// Outcome of one check with the residuals it was decided on.
#[derive(Clone, Debug)]
pub struct Verdict {
    pub pass: bool,
    pub residuals: Vec<Residual>,
    /// Pencil members that are degenerate at every sample point.
    pub skipped_lambdas: Vec<(C, C)>,
}

impl Verdict {
    pub fn residual(&self, name: &str) -> Option<&Residual> {
        self.residuals.iter().find(|r| r.name == name)
    }
}

#[derive(Clone, Debug)]
pub struct CompatReport {
    pub almost_compatible: bool,
    pub compatible: bool,
    pub flat_pencil: bool,
    pub nonsingular: bool,
    pub residuals: Vec<Residual>,
    pub min_gap: f64,
    pub gap_witness: Option<Point>,
    pub skipped_lambdas: Vec<(C, C)>,
}

impl CompatReport {
    pub fn residual(&self, name: &str) -> Option<&Residual> {
        self.residuals.iter().find(|r| r.name == name)
    }
}

pub fn lambda_label(l: (C, C)) -> String {
    let f = |z: C| {
        if z.im == 0.0 {
            format!("{}", z.re)
        } else {
            format!("{}{:+}i", z.re, z.im)
        }
    };
    format!("({}, {})", f(l.0), f(l.1))
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Scope {
    Almost,
    Compatible,
    Flat,
    Full,
}

struct PointData {
    jets1: MetricJets,
    jets2: MetricJets,
    geo1: GeometryJet,
    geo2: GeometryJet,
}

fn max_abs(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn max_diff(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn lin(a: C, x: &[C], b: C, y: &[C]) -> Vec<C> {
    x.iter().zip(y).map(|(p, q)| a * p + b * q).collect()
}

/// Largest single term of `M^{ijk}`, bounded by products of maxima.
fn m_scale(g1: &GeometryJet, g2: &GeometryJet) -> f64 {
    let n = g1.n as f64;
    n * (max_abs(&g1.g_up) * max_abs(&g2.gamma_contra)).max(max_abs(&g2.g_up) * max_abs(&g1.gamma_contra))
}

fn nijenhuis_scale(a: &Affinor) -> f64 {
    a.n as f64 * max_abs(&a.v) * max_abs(&a.dv)
}

struct LambdaEval {
    gamma: (f64, f64),
    curvature: (f64, f64),
    flat: (f64, f64),
}

struct PointEval {
    m: (f64, f64),
    nij: (f64, f64),
    lambdas: Vec<Option<LambdaEval>>,
    endpoints: [(f64, f64); 2],
    gap: Option<f64>,
}

fn combo_geometry(pair: &MetricPair, d: &PointData, l: (C, C), point: &[C]) -> Result<GeometryJet> {
    let jc = d.jets1.combine(l.0, &d.jets2, l.1);
    GeometryJet::from_jets(point, &jc, Variance::Contravariant, pair.degeneracy_tol).map_err(|e| match e {
        Error::DegenerateMetric { point, det } => Error::DegeneratePencil { lambda: l, point, det },
        e => e,
    })
}

fn eval_point(pair: &MetricPair, scope: Scope, active: &[bool], point: &[C]) -> Result<PointEval> {
    let jets1 = pair.g1.jets(point, 2)?;
    let jets2 = pair.g2.jets(point, 2)?;
    let geo1 = GeometryJet::from_jets(point, &jets1, Variance::Contravariant, pair.degeneracy_tol)?;
    let geo2 = GeometryJet::from_jets(point, &jets2, Variance::Contravariant, pair.degeneracy_tol)?;
    let d = PointData {
        jets1,
        jets2,
        geo1,
        geo2,
    };
    let m = tensor_m_from(&d.geo1, &d.geo2);
    let aff = Affinor::from_parts(&d.jets1, &d.geo2);
    let nij = nijenhuis(&aff);
    let mut lambdas = Vec::with_capacity(pair.lambdas.len());
    if scope >= Scope::Compatible {
        for (k, &l) in pair.lambdas.iter().enumerate() {
            if !active[k] {
                lambdas.push(None);
                continue;
            }
            let gc = combo_geometry(pair, &d, l, point)?;
            let gam_lin = lin(l.0, &d.geo1.gamma_contra, l.1, &d.geo2.gamma_contra);
            let gamma_scale = max_abs(&gc.gamma_contra)
                .max(l.0.norm() * max_abs(&d.geo1.gamma_contra))
                .max(l.1.norm() * max_abs(&d.geo2.gamma_contra));
            let r_lin = lin(l.0, &d.geo1.riemann_upup, l.1, &d.geo2.riemann_upup);
            let curv_scale = gc
                .curvature_scale()
                .max(l.0.norm() * d.geo1.curvature_scale())
                .max(l.1.norm() * d.geo2.curvature_scale());
            lambdas.push(Some(LambdaEval {
                gamma: (max_diff(&gc.gamma_contra, &gam_lin), gamma_scale),
                curvature: (max_diff(&gc.riemann_upup, &r_lin), curv_scale),
                flat: (gc.max_curvature(), gc.curvature_scale()),
            }));
        }
    }
    let endpoints = [
        (d.geo1.max_curvature(), d.geo1.curvature_scale()),
        (d.geo2.max_curvature(), d.geo2.curvature_scale()),
    ];
    let gap = if scope == Scope::Full {
        Some(eigen_spectrum(&aff.v, aff.n, &RootOptions::default())?.relative_gap())
    } else {
        None
    };
    Ok(PointEval {
        m: (max_abs(&m), m_scale(&d.geo1, &d.geo2)),
        nij: (max_abs(&nij), nijenhuis_scale(&aff)),
        lambdas,
        endpoints,
        gap,
    })
}

/// Classifies each λ sample: `true` when usable, `false` when the member is
/// degenerate at every point. Partial degeneracy is an error.
fn active_lambdas(pair: &MetricPair) -> Result<Vec<bool>> {
    let n = pair.dim();
    let values = map_points(&pair.points, pair.parallel, |p| Ok((pair.g1.eval(p)?, pair.g2.eval(p)?)))?;
    let mut active = Vec::with_capacity(pair.lambdas.len());
    for &l in &pair.lambdas {
        let mut bad: Option<(usize, f64)> = None;
        let mut bad_count = 0;
        for (k, (a, b)) in values.iter().enumerate() {
            let m = lin(l.0, a, l.1, b);
            let det = linalg::det(&m, n);
            if linalg::relative_det(&m, n, det) <= pair.degeneracy_tol {
                bad_count += 1;
                bad.get_or_insert((k, det.norm()));
            }
        }
        if bad_count == 0 {
            active.push(true);
        } else if bad_count == values.len() {
            active.push(false);
        } else {
            let (k, det) = bad.unwrap();
            return Err(Error::DegeneratePencil {
                lambda: l,
                point: Point(pair.points[k].clone()),
                det,
            });
        }
    }
    Ok(active)
}

fn run(pair: &MetricPair, scope: Scope) -> Result<CompatReport> {
    if pair.points.is_empty() {
        return Err(Error::Input("no sample points".into()));
    }
    let active = if scope >= Scope::Compatible {
        active_lambdas(pair)?
    } else {
        vec![false; pair.lambdas.len()]
    };
    let evals = map_points(&pair.points, pair.parallel, |p| eval_point(pair, scope, &active, p))?;

    let mut m = Residual::new("M");
    let mut nij = Residual::new("nijenhuis");
    let mut gamma = Residual::new("gamma_linearity");
    let mut curv = Residual::new("curvature_linearity");
    let labels: Vec<String> = pair.lambdas.iter().map(|&l| lambda_label(l)).collect();
    let mut per_gamma: Vec<Residual> = labels.iter().map(|s| Residual::new(format!("gamma_linearity{s}"))).collect();
    let mut per_curv: Vec<Residual> =
        labels.iter().map(|s| Residual::new(format!("curvature_linearity{s}"))).collect();
    let mut per_flat: Vec<Residual> = labels.iter().map(|s| Residual::new(format!("flatness{s}"))).collect();
    let mut flat_ends = [Residual::new("flatness(1, 0)"), Residual::new("flatness(0, 1)")];
    let mut min_gap = f64::INFINITY;
    let mut gap_witness = None;

    for (p, e) in pair.points.iter().zip(&evals) {
        m.record(e.m.0, e.m.1, p);
        nij.record(e.nij.0, e.nij.1, p);
        for (k, le) in e.lambdas.iter().enumerate() {
            if let Some(le) = le {
                per_gamma[k].record(le.gamma.0, le.gamma.1, p);
                per_curv[k].record(le.curvature.0, le.curvature.1, p);
                per_flat[k].record(le.flat.0, le.flat.1, p);
                gamma.record(le.gamma.0, le.gamma.1, p);
                curv.record(le.curvature.0, le.curvature.1, p);
            }
        }
        for (r, v) in flat_ends.iter_mut().zip(&e.endpoints) {
            r.record(v.0, v.1, p);
        }
        if let Some(g) = e.gap {
            if g < min_gap || gap_witness.is_none() {
                min_gap = g;
                gap_witness = Some(Point(p.clone()));
            }
        }
    }

    let tol = pair.tol;
    let almost = m.passes(tol) && nij.passes(tol);
    let usable: Vec<usize> = (0..pair.lambdas.len()).filter(|&k| active[k]).collect();
    let compatible = almost && gamma.passes(tol) && curv.passes(tol);
    let flat = compatible
        && usable.iter().all(|&k| per_flat[k].passes(tol))
        && flat_ends.iter().all(|r| r.passes(tol));
    let mut residuals = vec![m, nij];
    if scope >= Scope::Compatible {
        residuals.push(gamma);
        residuals.push(curv);
        for &k in &usable {
            residuals.push(per_gamma[k].clone());
            residuals.push(per_curv[k].clone());
        }
    }
    if scope >= Scope::Flat {
        residuals.extend(flat_ends);
        for &k in &usable {
            residuals.push(per_flat[k].clone());
        }
    }
    Ok(CompatReport {
        almost_compatible: almost,
        compatible,
        flat_pencil: flat,
        nonsingular: min_gap > pair.gap_rel,
        residuals,
        min_gap,
        gap_witness,
        skipped_lambdas: (0..pair.lambdas.len()).filter(|&k| !active[k]).map(|k| pair.lambdas[k]).collect(),
    })
}

fn verdict(report: CompatReport, pass: bool) -> Verdict {
    Verdict {
        pass,
        residuals: report.residuals,
        skipped_lambdas: report.skipped_lambdas,
    }
}

/// `M` and Nijenhuis residuals; passes when both are below tolerance.
pub fn check_almost_compatible(pair: &MetricPair) -> Result<Verdict> {
    let r = run(pair, Scope::Almost)?;
    let pass = r.almost_compatible;
    Ok(verdict(r, pass))
}

/// Linearity of `Γ^{ij}_k` and `R^{ij}_{kl}` along the pencil, at every λ sample.
pub fn check_compatible(pair: &MetricPair) -> Result<Verdict> {
    let r = run(pair, Scope::Compatible)?;
    let pass = r.compatible;
    Ok(verdict(r, pass))
}

/// Compatibility plus flatness of both metrics and of every sampled member.
pub fn check_flat_pencil(pair: &MetricPair) -> Result<Verdict> {
    let r = run(pair, Scope::Flat)?;
    let pass = r.flat_pencil;
    Ok(verdict(r, pass))
}

/// All of the above plus the eigenvalue gap of the affinor.
///
/// `min_gap` is the smallest over points of `gap / max(max|λ|, tiny)`, and the
/// pair counts as nonsingular when it exceeds `gap_rel`.
pub fn analyze(pair: &MetricPair) -> Result<CompatReport> {
    run(pair, Scope::Full)
}

/// `max |R^{ij}_{kl} − K(δ^i_l δ^j_k − δ^i_k δ^j_l)|` over `points`. The
/// normalized value divides by `1 + |K|`.
pub fn check_constant_curvature(g: &MetricField, k: C, points: &[Vec<C>]) -> Result<Residual> {
    let mut r = Residual::new("constant_curvature");
    for p in points {
        let geo = g.geometry(p)?;
        r.record(geo.constant_curvature_residual(k), k.norm(), p);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ScalarField;
    use crate::sampling::Sampling;

    fn metric(rows: &[&[&str]]) -> MetricField {
        let rows: Vec<Vec<&str>> = rows.iter().map(|r| r.to_vec()).collect();
        MetricField::parse(Variance::Contravariant, &rows).unwrap()
    }

    fn points() -> Vec<Vec<C>> {
        Sampling::cube(2, 0.2, 2.0).grid(4).random(6, 3).points().unwrap()
    }

    #[test]
    fn constant_pair_is_compatible() {
        let p = MetricPair::new(metric(&[&["3", "0"], &["0", "3"]]), metric(&[&["1", "0"], &["0", "1"]]), points())
            .unwrap();
        let r = analyze(&p).unwrap();
        assert!(r.almost_compatible && r.compatible && r.flat_pencil);
        assert!(r.skipped_lambdas.is_empty());
        assert!(!r.nonsingular);
    }

    #[test]
    fn exp_conformal_pair_is_only_almost_compatible() {
        let g1 = MetricField::conformal(Variance::Contravariant, ScalarField::parse("exp(u1*u2)", 2).unwrap())
            .unwrap();
        let p = MetricPair::new(g1, metric(&[&["1", "0"], &["0", "1"]]), points()).unwrap();
        let r = analyze(&p).unwrap();
        assert!(r.almost_compatible);
        assert!(!r.compatible);
        assert!(!r.flat_pencil);
        assert!(r.residual("curvature_linearity").unwrap().value > 1e-3);
    }

    #[test]
    fn identically_degenerate_member_is_skipped() {
        // (1,−1) gives the zero matrix everywhere
        let g = metric(&[&["1 + u1^2", "0"], &["0", "1"]]);
        let p = MetricPair::new(g.clone(), g, points()).unwrap();
        let r = analyze(&p).unwrap();
        assert_eq!(r.skipped_lambdas, vec![(C::new(1.0, 0.0), C::new(-1.0, 0.0))]);
    }

    #[test]
    fn partially_degenerate_member_is_an_error() {
        let g1 = metric(&[&["u1", "0"], &["0", "2"]]);
        let g2 = metric(&[&["1", "0"], &["0", "1"]]);
        let pts = vec![vec![C::new(1.0, 0.0), C::new(0.5, 0.0)], vec![C::new(2.0, 0.0), C::new(0.5, 0.0)]];
        let p = MetricPair::new(g1, g2, pts).unwrap();
        assert!(matches!(check_compatible(&p), Err(Error::DegeneratePencil { .. })));
    }

    #[test]
    fn degenerate_metric_is_reported() {
        let g1 = metric(&[&["u1", "0"], &["0", "1"]]);
        let g2 = metric(&[&["1", "0"], &["0", "1"]]);
        let p = MetricPair::new(g1, g2, vec![vec![C::new(0.0, 0.0), C::new(0.5, 0.0)]]).unwrap();
        assert!(matches!(check_almost_compatible(&p), Err(Error::DegenerateMetric { .. })));
    }

    #[test]
    fn lambda_labels() {
        assert_eq!(lambda_label((C::new(1.0, 0.0), C::new(-1.0, 0.0))), "(1, -1)");
        assert_eq!(lambda_label((C::new(0.5, -2.0), C::new(0.0, 1.0))), "(0.5-2i, 0+1i)");
    }
}

//! Pencils built from a constant metric `η` in its flat coordinates.

use num_complex::Complex64;

use super::{check_compatible, check_flat_pencil, max_abs, MetricPair, Verdict};
use crate::error::{Error, Result};
use crate::expr::ScalarField;
use crate::geometry::{MetricField, Variance, DEGENERACY_TOL};
use crate::linalg;
use crate::report::Residual;

type C = Complex64;

fn check_eta(eta: &[Vec<C>]) -> Result<usize> {
    let n = eta.len();
    if n == 0 || eta.iter().any(|r| r.len() != n) {
        return Err(Error::Input("η must be a nonempty square matrix".into()));
    }
    for i in 0..n {
        for j in 0..i {
            if eta[i][j] != eta[j][i] {
                return Err(Error::Input("η must be symmetric".into()));
            }
        }
    }
    let flat: Vec<C> = eta.iter().flatten().copied().collect();
    let det = linalg::det(&flat, n);
    if linalg::relative_det(&flat, n, det) <= DEGENERACY_TOL {
        return Err(Error::Input("η is degenerate".into()));
    }
    Ok(n)
}

/// `Σ c_k f_k`, dropping zero coefficients.
fn lin_comb(terms: impl IntoIterator<Item = (C, ScalarField)>, dim: usize) -> ScalarField {
    let mut acc: Option<ScalarField> = None;
    for (c, f) in terms {
        if c == C::new(0.0, 0.0) || f.as_constant() == Some(C::new(0.0, 0.0)) {
            continue;
        }
        let term = if c == C::new(1.0, 0.0) { f } else { &f * c };
        acc = Some(match acc {
            None => term,
            Some(a) => a + term,
        });
    }
    acc.unwrap_or_else(|| ScalarField::constant(0.0, dim))
}

fn check_fields(fields: &[ScalarField], n: usize, what: &str) -> Result<()> {
    if fields.len() != n || fields.iter().any(|f| f.arity() != n) {
        return Err(Error::Input(format!("{what} must have {n} components over {n} variables")));
    }
    Ok(())
}

/// `a[i][j] = η^{is} ∂_s f^j`.
fn eta_gradient(eta: &[Vec<C>], f: &[ScalarField]) -> Vec<Vec<ScalarField>> {
    let n = eta.len();
    let df: Vec<Vec<ScalarField>> = f.iter().map(|fj| (0..n).map(|s| fj.derivative(s)).collect()).collect();
    (0..n)
        .map(|i| (0..n).map(|j| lin_comb((0..n).map(|s| (eta[i][s], df[j][s].clone())), n)).collect())
        .collect()
}

/// `a[i][j] + a[j][i] + c η^{ij}`, built once per unordered pair.
fn symmetrized(a: &[Vec<ScalarField>], eta: &[Vec<C>], c: C) -> Result<MetricField> {
    let n = a.len();
    let mut rows: Vec<Vec<ScalarField>> = vec![Vec::with_capacity(n); n];
    for i in 0..n {
        for j in 0..n {
            let e = if j < i {
                rows[j][i].clone()
            } else {
                let mut terms = vec![(C::new(1.0, 0.0), a[i][j].clone()), (C::new(1.0, 0.0), a[j][i].clone())];
                terms.push((c * eta[i][j], ScalarField::constant(1.0, n)));
                lin_comb(terms, n)
            };
            rows[i].push(e);
        }
    }
    MetricField::new(Variance::Contravariant, rows)
}

fn eta_metric(eta: &[Vec<C>]) -> Result<MetricField> {
    MetricField::constant(Variance::Contravariant, eta)
}

/// `f^i = η^{is} ∂_s Φ`.
pub fn potential_field(eta: &[Vec<C>], phi: &ScalarField) -> Result<Vec<ScalarField>> {
    let n = check_eta(eta)?;
    if phi.arity() != n {
        return Err(Error::Input(format!("Φ must be a field over {n} variables")));
    }
    let d: Vec<ScalarField> = (0..n).map(|s| phi.derivative(s)).collect();
    Ok((0..n).map(|i| lin_comb((0..n).map(|s| (eta[i][s], d[s].clone())), n)).collect())
}

#[derive(Clone, Debug)]
pub struct DubrovinReport {
    pub g1: MetricField,
    /// `delta_associativity` and `dubrovin_condition`.
    pub residuals: Vec<Residual>,
    pub conditions_hold: bool,
    pub flat_pencil: Verdict,
    /// False only when both conditions hold but the pencil check fails.
    pub consistent: bool,
}

/// Builds `g1^{ij} = η^{is}∂_s f^j + η^{js}∂_s f^i + c η^{ij}` and checks the
/// two conditions on `Δ^{ij}_k = ∂_k(η^{is}∂_s f^j)`:
///
/// * `Δ^{ij}_s Δ^{sk}_l = Δ^{ik}_s Δ^{sj}_l`
/// * `(g1^{is} η^{jp} − η^{is} g1^{jp}) ∂_s∂_p f^k = 0`
///
/// and independently whether `(g1, η)` is a flat pencil on the sample points.
pub fn dubrovin_construct_and_check(
    eta: &[Vec<C>],
    f: &[ScalarField],
    c: C,
    points: &[Vec<C>],
    tol: f64,
) -> Result<DubrovinReport> {
    let n = check_eta(eta)?;
    check_fields(f, n, "f")?;
    let a = eta_gradient(eta, f);
    let g1 = symmetrized(&a, eta, c)?;
    let mut assoc = Residual::new("delta_associativity");
    let mut cond = Residual::new("dubrovin_condition");
    for p in points {
        // delta[(i*n + j)*n + k] = Δ^{ij}_k
        let mut delta = vec![C::new(0.0, 0.0); n * n * n];
        for i in 0..n {
            for j in 0..n {
                let jet = a[i][j].eval_jet(p, 1)?;
                for k in 0..n {
                    delta[(i * n + j) * n + k] = jet.d1(k);
                }
            }
        }
        let dl = |i: usize, j: usize, k: usize| delta[(i * n + j) * n + k];
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s1 = C::new(0.0, 0.0);
                        for s in 0..n {
                            s1 += dl(i, j, s) * dl(s, k, l) - dl(i, k, s) * dl(s, j, l);
                        }
                        worst = worst.max(s1.norm());
                    }
                }
            }
        }
        let dmax = max_abs(&delta);
        assoc.record(worst, n as f64 * dmax * dmax, p);

        let gv = g1.eval(p)?;
        let hess: Vec<Vec<C>> = f.iter().map(|fk| fk.eval_jet(p, 2).map(|j| j.hess)).collect::<Result<_>>()?;
        let etamax = eta.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        let hmax = hess.iter().map(|h| max_abs(h)).fold(0.0, f64::max);
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for hk in &hess {
                    let mut sum = C::new(0.0, 0.0);
                    for s in 0..n {
                        for q in 0..n {
                            let w = gv[i * n + s] * eta[j][q] - eta[i][s] * gv[j * n + q];
                            sum += w * hk[s * n + q];
                        }
                    }
                    worst = worst.max(sum.norm());
                }
            }
        }
        cond.record(worst, (n * n) as f64 * max_abs(&gv) * etamax * hmax, p);
    }
    let conditions_hold = assoc.passes(tol) && cond.passes(tol);
    let pair = MetricPair::new(g1.clone(), eta_metric(eta)?, points.to_vec())?.with_tol(tol);
    let flat_pencil = check_flat_pencil(&pair)?;
    let consistent = !conditions_hold || flat_pencil.pass;
    Ok(DubrovinReport {
        g1,
        residuals: vec![assoc, cond],
        conditions_hold,
        flat_pencil,
        consistent,
    })
}

#[derive(Clone, Debug)]
pub struct BracketReport {
    pub g2: MetricField,
    /// Whether `g2` is degenerate at some sample point.
    pub degenerate: bool,
    /// `Γ^{ij}_k(λ1 g2 + λ2 η) + λ1 b^{ij}_k` over all nondegenerate combinations.
    pub connection: Residual,
    /// Full compatibility check of `(g2, η)`; absent when `g2` is degenerate.
    pub compatibility: Option<Verdict>,
}

impl BracketReport {
    pub fn compatible(&self, tol: f64) -> bool {
        self.connection.passes(tol) && self.compatibility.as_ref().is_none_or(|v| v.pass)
    }
}

/// Builds `g2^{ij} = η^{is}∂_s h^j + η^{js}∂_s h^i` with connection
/// coefficients `b^{ij}_k = η^{is}∂_s∂_k h^j`, so that `Γ^{ij}_k = −b^{ij}_k`,
/// and checks it against `η`.
pub fn mokhov_bracket_metric(
    eta: &[Vec<C>],
    h: &[ScalarField],
    points: &[Vec<C>],
    lambdas: &[(C, C)],
    tol: f64,
) -> Result<BracketReport> {
    let n = check_eta(eta)?;
    check_fields(h, n, "h")?;
    let a = eta_gradient(eta, h);
    let g2 = symmetrized(&a, eta, C::new(0.0, 0.0))?;
    let eta_m = eta_metric(eta)?;
    let mut connection = Residual::new("bracket_connection");
    let mut degenerate = false;
    for p in points {
        let v2 = g2.eval(p)?;
        let det = linalg::det(&v2, n);
        degenerate |= linalg::relative_det(&v2, n, det) <= DEGENERACY_TOL;
        let mut b = vec![C::new(0.0, 0.0); n * n * n];
        for i in 0..n {
            for j in 0..n {
                let jet = a[i][j].eval_jet(p, 1)?;
                for k in 0..n {
                    b[(i * n + j) * n + k] = jet.d1(k);
                }
            }
        }
        for &(l1, l2) in lambdas {
            let combo = g2.combine(l1, &eta_m, l2)?;
            let geo = match combo.geometry(p) {
                Ok(g) => g,
                Err(Error::DegenerateMetric { .. }) => continue,
                Err(e) => return Err(e),
            };
            let mut worst = 0.0f64;
            for (gam, bb) in geo.gamma_contra.iter().zip(&b) {
                worst = worst.max((gam + l1 * bb).norm());
            }
            let scale = max_abs(&geo.gamma_contra).max(l1.norm() * max_abs(&b));
            connection.record(worst, scale, p);
        }
    }
    let compatibility = if degenerate {
        None
    } else {
        let pair = MetricPair::new(g2.clone(), eta_m, points.to_vec())?
            .with_lambdas(lambdas.to_vec())
            .with_tol(tol);
        Some(check_compatible(&pair)?)
    };
    Ok(BracketReport {
        g2,
        degenerate,
        connection,
        compatibility,
    })
}

/// `max |η^{sp} Φ_{pi} Φ_{sjk} − η^{sp} Φ_{pk} Φ_{sji}|` over points and index
/// triples, normalized by the size of a single term.
pub fn associativity_residual(eta: &[Vec<C>], phi: &ScalarField, points: &[Vec<C>]) -> Result<Residual> {
    let n = check_eta(eta)?;
    if phi.arity() != n {
        return Err(Error::Input(format!("Φ must be a field over {n} variables")));
    }
    let mut r = Residual::new("associativity");
    let etamax = eta.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    for p in points {
        let j = phi.eval_jet(p, 3)?;
        let mut worst = 0.0f64;
        for i in 0..n {
            for jj in 0..n {
                for k in 0..n {
                    let mut sum = C::new(0.0, 0.0);
                    for s in 0..n {
                        for q in 0..n {
                            sum += eta[s][q] * (j.d2(q, i) * j.d3(s, jj, k) - j.d2(q, k) * j.d3(s, jj, i));
                        }
                    }
                    worst = worst.max(sum.norm());
                }
            }
        }
        let scale = (n * n) as f64 * etamax * max_abs(&j.hess) * max_abs(&j.third);
        r.record(worst, scale, p);
    }
    Ok(r)
}

/// The pair `(η, η^{is} η^{jp} Φ_{sp})` as contravariant metrics.
pub fn potential_pair(eta: &[Vec<C>], phi: &ScalarField) -> Result<(MetricField, MetricField)> {
    let n = check_eta(eta)?;
    let f = potential_field(eta, phi)?;
    let a = eta_gradient(eta, &f);
    let mut rows: Vec<Vec<ScalarField>> = vec![Vec::with_capacity(n); n];
    for i in 0..n {
        for j in 0..n {
            let e = if j < i { rows[j][i].clone() } else { a[i][j].clone() };
            rows[i].push(e);
        }
    }
    Ok((eta_metric(eta)?, MetricField::new(Variance::Contravariant, rows)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compat::default_lambdas;
    use crate::sampling::Sampling;

    fn c(x: f64) -> C {
        C::new(x, 0.0)
    }

    fn id(n: usize) -> Vec<Vec<C>> {
        (0..n).map(|i| (0..n).map(|j| c(if i == j { 1.0 } else { 0.0 })).collect()).collect()
    }

    fn fields(src: &[&str], n: usize) -> Vec<ScalarField> {
        src.iter().map(|s| ScalarField::parse(s, n).unwrap()).collect()
    }

    fn points(n: usize) -> Vec<Vec<C>> {
        Sampling::cube(n, 0.3, 1.7).grid(3).random(8, 11).points().unwrap()
    }

    #[test]
    fn linear_vector_field_gives_flat_pencil() {
        let eta = vec![vec![c(0.0), c(1.0)], vec![c(1.0), c(0.0)]];
        let f = fields(&["2*u1 + u2", "u1 - 3*u2"], 2);
        let r = dubrovin_construct_and_check(&eta, &f, c(5.0), &points(2), 1e-8).unwrap();
        assert!(r.residuals.iter().all(|x| x.raw == 0.0));
        assert!(r.conditions_hold && r.flat_pencil.pass && r.consistent);
    }

    #[test]
    fn potential_satisfying_associativity_gives_flat_pencil() {
        let phi = ScalarField::parse("(u1^3 + 3*u1*u2^2)/6", 2).unwrap();
        let eta = id(2);
        assert!(associativity_residual(&eta, &phi, &points(2)).unwrap().raw < 1e-13);
        let f = potential_field(&eta, &phi).unwrap();
        let r = dubrovin_construct_and_check(&eta, &f, c(3.0), &points(2), 1e-8).unwrap();
        assert!(r.conditions_hold, "{:?}", r.residuals);
        assert!(r.flat_pencil.pass);
    }

    #[test]
    fn generic_vector_field_fails() {
        let f = fields(&["u1^2*u2", "u2^3 + u1*u2"], 2);
        let r = dubrovin_construct_and_check(&id(2), &f, c(4.0), &points(2), 1e-8).unwrap();
        assert!(!r.conditions_hold);
        assert!(!r.flat_pencil.pass);
        assert!(r.consistent);
    }

    #[test]
    fn identity_h_doubles_eta() {
        let eta = vec![vec![c(2.0), c(0.5)], vec![c(0.5), c(-1.0)]];
        let h = fields(&["u1", "u2"], 2);
        let r = mokhov_bracket_metric(&eta, &h, &points(2), &default_lambdas(0), 1e-8).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(r.g2.entry(i, j).eval(&[c(0.1), c(0.2)]).unwrap(), eta[i][j] * 2.0);
            }
        }
        assert!(!r.degenerate && r.compatible(1e-8));
    }

    #[test]
    fn gradient_h_reproduces_potential_pair() {
        let eta = id(2);
        let phi = ScalarField::parse("u1^2*u2 + exp(u2)", 2).unwrap();
        let h = potential_field(&eta, &phi).unwrap();
        let r = mokhov_bracket_metric(&eta, &h, &points(2), &default_lambdas(0), 1e-8).unwrap();
        let (_, g) = potential_pair(&eta, &phi).unwrap();
        for p in points(2) {
            let a = r.g2.eval(&p).unwrap();
            let b = g.eval(&p).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - 2.0 * y).norm() < 1e-12);
            }
        }
        // b is a Levi-Civita connection only when the bracket is Poisson
        assert!(!r.compatible(1e-8));
        let phi = ScalarField::parse("(u1^3 + 3*u1*u2^2)/6", 2).unwrap();
        let h = potential_field(&eta, &phi).unwrap();
        let r = mokhov_bracket_metric(&eta, &h, &points(2), &default_lambdas(0), 1e-8).unwrap();
        assert!(r.connection.passes(1e-10), "{:?}", r.connection);
        assert!(r.compatible(1e-8));
    }

    #[test]
    fn degenerate_bracket_metric_keeps_connection_check() {
        // g2 = diag(2u1, 0) is degenerate everywhere
        let h = fields(&["u1^2/2", "1"], 2);
        let r = mokhov_bracket_metric(&id(2), &h, &points(2), &default_lambdas(0), 1e-8).unwrap();
        assert!(r.degenerate && r.compatibility.is_none());
        assert!(r.connection.passes(1e-10));
    }

    #[test]
    fn quadratic_potential_has_zero_residual() {
        let phi = ScalarField::parse("u1^2 + 3*u1*u2 - u2^2", 2).unwrap();
        assert_eq!(associativity_residual(&id(2), &phi, &points(2)).unwrap().raw, 0.0);
    }

    #[test]
    fn generic_cubic_violates_associativity() {
        let phi = ScalarField::parse("u1^3 + u1^2*u2 + 2*u2^3", 2).unwrap();
        assert!(associativity_residual(&id(2), &phi, &points(2)).unwrap().value > 1e-3);
    }
}

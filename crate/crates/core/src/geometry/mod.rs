//! Tensor objects of a metric, or of a pair of metrics, at a single point.
//!
//! Index layouts are row-major with the derivative index first:
//! `dg[(k*n + i)*n + j] = ∂_k g^{ij}`, `d2g[((k*n + l)*n + i)*n + j] = ∂_k ∂_l g^{ij}`.
//! Christoffel symbols are stored as `gamma[(i*n + j)*n + k] = Γ^i_{jk}` and
//! `gamma_contra[(i*n + j)*n + k] = Γ^{ij}_k`, curvature as
//! `riemann[((i*n + j)*n + k)*n + l] = R^i_{jkl}` and likewise `R^{ij}_{kl}`.
//!
//! Conventions:
//!
//! ```text
//! Γ^i_{jk}  = ½ g^{is} (∂_j g_{sk} + ∂_k g_{js} − ∂_s g_{jk})
//! Γ^{ij}_k  = g^{is} Γ^j_{sk}
//! R^i_{jkl} = ∂_k Γ^i_{jl} − ∂_l Γ^i_{jk} + Γ^i_{pk} Γ^p_{jl} − Γ^i_{pl} Γ^p_{jk}
//! R^{ij}_{kl} = g^{is} R^j_{skl}
//! ```

mod eigen;

use std::sync::Arc;

use num_complex::Complex64;

pub use eigen::{characteristic_polynomial, polynomial_roots, spectrum as eigen_spectrum, PencilSpectrum, RootOptions};

use crate::error::{Error, Point, Result};
use crate::expr::ScalarField;
use crate::linalg;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Default relative determinant threshold below which a metric counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variance {
    Contravariant,
    Covariant,
}

/// Symmetric N×N matrix of fields. Only the upper triangle is stored, so
/// `entry(i, j)` and `entry(j, i)` are the same object.
#[derive(Clone, Debug)]
pub struct MetricField {
    dim: usize,
    variance: Variance,
    upper: Arc<Vec<ScalarField>>,
}

fn tri(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

impl MetricField {
    /// Builds a metric from a full matrix, which must be symmetric.
    pub fn new(variance: Variance, entries: Vec<Vec<ScalarField>>) -> Result<Self> {
        let n = entries.len();
        if n == 0 || entries.iter().any(|r| r.len() != n) {
            return Err(Error::Input("metric must be a nonempty square matrix".into()));
        }
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                let e = &entries[i][j];
                if e.arity() != n {
                    return Err(Error::Input(format!(
                        "entry ({},{}) has arity {}, metric has dimension {n}",
                        i + 1,
                        j + 1,
                        e.arity()
                    )));
                }
                if entries[j][i] != *e {
                    return Err(Error::Input(format!(
                        "metric is not symmetric at ({},{})",
                        i + 1,
                        j + 1
                    )));
                }
                upper.push(e.clone());
            }
        }
        Ok(MetricField {
            dim: n,
            variance,
            upper: Arc::new(upper),
        })
    }

    /// Parses a full matrix of expression strings.
    pub fn parse<S: AsRef<str>>(variance: Variance, rows: &[Vec<S>]) -> Result<Self> {
        let n = rows.len();
        let entries = rows
            .iter()
            .map(|r| r.iter().map(|t| ScalarField::parse(t.as_ref(), n)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(variance, entries)
    }

    pub fn diagonal(variance: Variance, diag: Vec<ScalarField>) -> Result<Self> {
        let n = diag.len();
        let zero = ScalarField::constant(0.0, n.max(1));
        let entries = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { diag[i].clone() } else { zero.clone() })
                    .collect()
            })
            .collect();
        Self::new(variance, entries)
    }

    /// `f(u)·δ^{ij}`.
    pub fn conformal(variance: Variance, f: ScalarField) -> Result<Self> {
        let n = f.arity();
        Self::diagonal(variance, vec![f; n])
    }

    /// A constant matrix.
    pub fn constant(variance: Variance, m: &[Vec<C>]) -> Result<Self> {
        let n = m.len();
        let entries = m
            .iter()
            .map(|r| r.iter().map(|&z| ScalarField::constant(z, n)).collect())
            .collect();
        Self::new(variance, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn variance(&self) -> Variance {
        self.variance
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarField {
        &self.upper[tri(self.dim, i, j)]
    }

    /// Entrywise `a·self + b·other`; both must share dimension and variance.
    pub fn combine(&self, a: C, other: &MetricField, b: C) -> Result<MetricField> {
        if self.dim != other.dim || self.variance != other.variance {
            return Err(Error::Input("cannot combine metrics of different shape".into()));
        }
        let upper = self
            .upper
            .iter()
            .zip(other.upper.iter())
            .map(|(x, y)| &(x * a) + &(y * b))
            .collect();
        Ok(MetricField {
            dim: self.dim,
            variance: self.variance,
            upper: Arc::new(upper),
        })
    }

    pub fn eval(&self, point: &[C]) -> Result<Vec<C>> {
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.entry(i, j).eval(point)?;
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        Ok(out)
    }

    /// Entry values and partials up to `order` (at most 2) in the stored variance.
    pub fn jets(&self, point: &[C], order: u8) -> Result<MetricJets> {
        let n = self.dim;
        let mut out = MetricJets::zeros(n);
        for i in 0..n {
            for j in i..n {
                let e = self.entry(i, j);
                if let Some(c) = e.as_constant() {
                    out.value[i * n + j] = c;
                    out.value[j * n + i] = c;
                    continue;
                }
                let jet = e.eval_jet(point, order)?;
                out.value[i * n + j] = jet.value;
                out.value[j * n + i] = jet.value;
                for k in 0..n {
                    out.d1[(k * n + i) * n + j] = jet.d1(k);
                    out.d1[(k * n + j) * n + i] = jet.d1(k);
                    for l in 0..n {
                        out.d2[((k * n + l) * n + i) * n + j] = jet.d2(k, l);
                        out.d2[((k * n + l) * n + j) * n + i] = jet.d2(k, l);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Contravariant components with partials up to second order.
    pub fn up_jets(&self, point: &[C], tol: f64) -> Result<MetricJets> {
        let jets = self.jets(point, 2)?;
        match self.variance {
            Variance::Contravariant => Ok(jets),
            Variance::Covariant => jets.inverse(point, tol),
        }
    }

    pub fn geometry(&self, point: &[C]) -> Result<GeometryJet> {
        self.geometry_with_tol(point, DEGENERACY_TOL)
    }

    pub fn geometry_with_tol(&self, point: &[C], tol: f64) -> Result<GeometryJet> {
        let jets = self.jets(point, 2)?;
        GeometryJet::from_jets(point, &jets, self.variance, tol)
    }
}

/// Values and first and second partials of a symmetric matrix field at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricJets {
    pub n: usize,
    pub value: Vec<C>,
    pub d1: Vec<C>,
    pub d2: Vec<C>,
}

impl MetricJets {
    pub fn zeros(n: usize) -> Self {
        MetricJets {
            n,
            value: vec![ZERO; n * n],
            d1: vec![ZERO; n * n * n],
            d2: vec![ZERO; n * n * n * n],
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: C, other: &MetricJets, b: C) -> MetricJets {
        let lin = |x: &[C], y: &[C]| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect();
        MetricJets {
            n: self.n,
            value: lin(&self.value, &other.value),
            d1: lin(&self.d1, &other.d1),
            d2: lin(&self.d2, &other.d2),
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.value.iter().chain(&self.d1).chain(&self.d2).map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Jets of the inverse matrix:
    /// `∂_k B = −B A_k B`, `∂_k∂_l B = B A_k B A_l B + B A_l B A_k B − B A_{kl} B`.
    pub fn inverse(&self, point: &[C], tol: f64) -> Result<MetricJets> {
        let n = self.n;
        let (b, _) = linalg::invert(&self.value, n, tol).map_err(|det| Error::DegenerateMetric {
            point: Point::from(point),
            det: det.norm(),
        })?;
        let mm = |x: &[C], y: &[C]| linalg::matmul(x, y, n);
        let slice = |v: &[C], k: usize| v[k * n * n..(k + 1) * n * n].to_vec();
        let mut out = MetricJets::zeros(n);
        out.value = b.clone();
        // B A_k B, reused for both orders
        let bab: Vec<Vec<C>> = (0..n).map(|k| mm(&mm(&b, &slice(&self.d1, k)), &b)).collect();
        let ab: Vec<Vec<C>> = (0..n).map(|k| mm(&slice(&self.d1, k), &b)).collect();
        for k in 0..n {
            for (dst, src) in out.d1[k * n * n..(k + 1) * n * n].iter_mut().zip(&bab[k]) {
                *dst = -src;
            }
        }
        for k in 0..n {
            for l in k..n {
                let t1 = mm(&bab[k], &ab[l]);
                let t2 = mm(&bab[l], &ab[k]);
                let t3 = mm(&mm(&b, &slice(&self.d2, k * n + l)), &b);
                for r in 0..n {
                    for c in r..n {
                        // symmetrize so the result is exactly symmetric in (r, c)
                        let x = |m: &[C]| 0.5 * (m[r * n + c] + m[c * n + r]);
                        let v = x(&t1) + x(&t2) - x(&t3);
                        for (p, q) in [(k, l), (l, k)] {
                            out.d2[((p * n + q) * n + r) * n + c] = v;
                            out.d2[((p * n + q) * n + c) * n + r] = v;
                        }
                    }
                }
            }
        }
        for k in 0..n {
            for r in 0..n {
                for c in r + 1..n {
                    let v = 0.5 * (out.d1[(k * n + r) * n + c] + out.d1[(k * n + c) * n + r]);
                    out.d1[(k * n + r) * n + c] = v;
                    out.d1[(k * n + c) * n + r] = v;
                }
            }
        }
        for r in 0..n {
            for c in r + 1..n {
                let v = 0.5 * (out.value[r * n + c] + out.value[c * n + r]);
                out.value[r * n + c] = v;
                out.value[c * n + r] = v;
            }
        }
        Ok(out)
    }
}

/// Every local tensor object of one metric at one point.
#[derive(Clone, Debug)]
pub struct GeometryJet {
    pub n: usize,
    pub point: Vec<C>,
    pub g_up: Vec<C>,
    pub g_down: Vec<C>,
    pub dg_up: Vec<C>,
    pub d2g_up: Vec<C>,
    pub dg_down: Vec<C>,
    pub d2g_down: Vec<C>,
    pub gamma_mixed: Vec<C>,
    /// `dgamma[((l*n + i)*n + j)*n + k] = ∂_l Γ^i_{jk}`
    pub dgamma: Vec<C>,
    pub gamma_contra: Vec<C>,
    pub riemann_mixed: Vec<C>,
    pub riemann_upup: Vec<C>,
    /// Relative determinant of the metric (see [`linalg::relative_det`]).
    pub relative_det: f64,
}

impl GeometryJet {
    /// Builds all objects from metric jets given in `variance`.
    pub fn from_jets(point: &[C], jets: &MetricJets, variance: Variance, tol: f64) -> Result<Self> {
        let n = jets.n;
        let other = jets.inverse(point, tol)?;
        let (up, down) = match variance {
            Variance::Contravariant => (jets.clone(), other),
            Variance::Covariant => (other, jets.clone()),
        };
        let rel = linalg::relative_det(&jets.value, n, linalg::det(&jets.value, n));
        let gu = |i: usize, j: usize| up.value[i * n + j];
        let dgu = |k: usize, i: usize, j: usize| up.d1[(k * n + i) * n + j];
        let dgd = |k: usize, i: usize, j: usize| down.d1[(k * n + i) * n + j];
        let d2gd = |k: usize, l: usize, i: usize, j: usize| down.d2[((k * n + l) * n + i) * n + j];

        // first kind, Γ_{s,jk} and its derivatives
        let n3 = n * n * n;
        let mut first = vec![ZERO; n3];
        let mut dfirst = vec![ZERO; n3 * n];
        for s in 0..n {
            for j in 0..n {
                for k in j..n {
                    let v = 0.5 * (dgd(j, s, k) + dgd(k, j, s) - dgd(s, j, k));
                    first[(s * n + j) * n + k] = v;
                    first[(s * n + k) * n + j] = v;
                    for l in 0..n {
                        let w = 0.5 * (d2gd(l, j, s, k) + d2gd(l, k, j, s) - d2gd(l, s, j, k));
                        dfirst[((l * n + s) * n + j) * n + k] = w;
                        dfirst[((l * n + s) * n + k) * n + j] = w;
                    }
                }
            }
        }
        let mut gamma = vec![ZERO; n3];
        let mut dgamma = vec![ZERO; n3 * n];
        for i in 0..n {
            for j in 0..n {
                for k in j..n {
                    let mut v = ZERO;
                    for s in 0..n {
                        v += gu(i, s) * first[(s * n + j) * n + k];
                    }
                    gamma[(i * n + j) * n + k] = v;
                    gamma[(i * n + k) * n + j] = v;
                    for l in 0..n {
                        let mut w = ZERO;
                        for s in 0..n {
                            w += dgu(l, i, s) * first[(s * n + j) * n + k]
                                + gu(i, s) * dfirst[((l * n + s) * n + j) * n + k];
                        }
                        dgamma[((l * n + i) * n + j) * n + k] = w;
                        dgamma[((l * n + i) * n + k) * n + j] = w;
                    }
                }
            }
        }
        let g = |i: usize, j: usize, k: usize| gamma[(i * n + j) * n + k];
        let dg = |l: usize, i: usize, j: usize, k: usize| dgamma[((l * n + i) * n + j) * n + k];

        let mut gamma_contra = vec![ZERO; n3];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    gamma_contra[(i * n + j) * n + k] = (0..n).map(|s| gu(i, s) * g(j, s, k)).sum();
                }
            }
        }

        let n4 = n3 * n;
        let mut riemann = vec![ZERO; n4];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in k + 1..n {
                        let mut v = dg(k, i, j, l) - dg(l, i, j, k);
                        for p in 0..n {
                            v += g(i, p, k) * g(p, j, l) - g(i, p, l) * g(p, j, k);
                        }
                        riemann[((i * n + j) * n + k) * n + l] = v;
                        riemann[((i * n + j) * n + l) * n + k] = -v;
                    }
                }
            }
        }
        let mut riemann_upup = vec![ZERO; n4];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        riemann_upup[((i * n + j) * n + k) * n + l] =
                            (0..n).map(|s| gu(i, s) * riemann[((j * n + s) * n + k) * n + l]).sum();
                    }
                }
            }
        }

        Ok(GeometryJet {
            n,
            point: point.to_vec(),
            g_up: up.value,
            g_down: down.value,
            dg_up: up.d1,
            d2g_up: up.d2,
            dg_down: down.d1,
            d2g_down: down.d2,
            gamma_mixed: gamma,
            dgamma,
            gamma_contra,
            riemann_mixed: riemann,
            riemann_upup,
            relative_det: rel,
        })
    }

    #[inline]
    pub fn g_up(&self, i: usize, j: usize) -> C {
        self.g_up[i * self.n + j]
    }

    #[inline]
    pub fn g_down(&self, i: usize, j: usize) -> C {
        self.g_down[i * self.n + j]
    }

    #[inline]
    pub fn dg_up(&self, k: usize, i: usize, j: usize) -> C {
        self.dg_up[(k * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn gamma(&self, i: usize, j: usize, k: usize) -> C {
        self.gamma_mixed[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn gamma_up(&self, i: usize, j: usize, k: usize) -> C {
        self.gamma_contra[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn riemann(&self, i: usize, j: usize, k: usize, l: usize) -> C {
        self.riemann_mixed[((i * self.n + j) * self.n + k) * self.n + l]
    }

    #[inline]
    pub fn riemann_up(&self, i: usize, j: usize, k: usize, l: usize) -> C {
        self.riemann_upup[((i * self.n + j) * self.n + k) * self.n + l]
    }

    /// Largest entry of `R^{ij}_{kl}`.
    pub fn max_curvature(&self) -> f64 {
        self.riemann_upup.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest magnitude among the metric, its inverse, partials and Christoffel symbols.
    pub fn scale(&self) -> f64 {
        self.g_up
            .iter()
            .chain(&self.g_down)
            .chain(&self.dg_up)
            .chain(&self.gamma_contra)
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Magnitude of the individual terms that make up `R^{ij}_{kl}`, so that
    /// cancellation error can be judged: `max|g| · max(max|∂Γ|, n·max|Γ|²)`.
    pub fn curvature_scale(&self) -> f64 {
        let m = |v: &[C]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let gam = m(&self.gamma_mixed);
        m(&self.g_up) * m(&self.dgamma).max(self.n as f64 * gam * gam)
    }

    /// `max |R^{ij}_{kl} − K(δ^i_l δ^j_k − δ^i_k δ^j_l)|`.
    pub fn constant_curvature_residual(&self, k: C) -> f64 {
        let n = self.n;
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let mut worst = 0f64;
        for i in 0..n {
            for j in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let model = k * (d(i, b) * d(j, a) - d(i, a) * d(j, b));
                        worst = worst.max((self.riemann_up(i, j, a, b) - model).norm());
                    }
                }
            }
        }
        worst
    }
}

/// `v^i_j = g_1^{is} g_{2,sj}` with partials `dv[(s*n + i)*n + j] = ∂_s v^i_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Affinor {
    pub n: usize,
    pub v: Vec<C>,
    pub dv: Vec<C>,
}

impl Affinor {
    /// From contravariant jets of the first metric and the geometry of the second.
    pub fn from_parts(g1_up: &MetricJets, g2: &GeometryJet) -> Affinor {
        let n = g2.n;
        let mut v = vec![ZERO; n * n];
        let mut dv = vec![ZERO; n * n * n];
        for i in 0..n {
            for j in 0..n {
                let mut x = ZERO;
                for s in 0..n {
                    x += g1_up.value[i * n + s] * g2.g_down(s, j);
                }
                v[i * n + j] = x;
                for k in 0..n {
                    let mut y = ZERO;
                    for s in 0..n {
                        y += g1_up.d1[(k * n + i) * n + s] * g2.g_down(s, j)
                            + g1_up.value[i * n + s] * g2.dg_down[(k * n + s) * n + j];
                    }
                    dv[(k * n + i) * n + j] = y;
                }
            }
        }
        Affinor { n, v, dv }
    }

    #[inline]
    pub fn v(&self, i: usize, j: usize) -> C {
        self.v[i * self.n + j]
    }

    #[inline]
    pub fn dv(&self, s: usize, i: usize, j: usize) -> C {
        self.dv[(s * self.n + i) * self.n + j]
    }
}

pub fn affinor_at(g1: &MetricField, g2: &MetricField, point: &[C]) -> Result<Affinor> {
    check_same_dim(g1, g2)?;
    let geo2 = g2.geometry(point)?;
    let up1 = g1.up_jets(point, DEGENERACY_TOL)?;
    Ok(Affinor::from_parts(&up1, &geo2))
}

fn check_same_dim(g1: &MetricField, g2: &MetricField) -> Result<()> {
    if g1.dim() != g2.dim() {
        return Err(Error::Input(format!(
            "metrics have dimensions {} and {}",
            g1.dim(),
            g2.dim()
        )));
    }
    Ok(())
}

/// `N^k_{ij} = v^s_i ∂_s v^k_j − v^s_j ∂_s v^k_i + v^k_s ∂_j v^s_i − v^k_s ∂_i v^s_j`,
/// stored as `[(k*n + i)*n + j]`.
pub fn nijenhuis(a: &Affinor) -> Vec<C> {
    let n = a.n;
    let mut out = vec![ZERO; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i + 1..n {
                let mut x = ZERO;
                for s in 0..n {
                    x += a.v(s, i) * a.dv(s, k, j) - a.v(s, j) * a.dv(s, k, i)
                        + a.v(k, s) * (a.dv(j, s, i) - a.dv(i, s, j));
                }
                out[(k * n + i) * n + j] = x;
                out[(k * n + j) * n + i] = -x;
            }
        }
    }
    out
}

/// `M^{ijk} = g_1^{is}Γ_2^{jk}_s − g_2^{js}Γ_1^{ik}_s − g_1^{js}Γ_2^{ik}_s + g_2^{is}Γ_1^{jk}_s`,
/// stored as `[(i*n + j)*n + k]`.
pub fn tensor_m_from(g1: &GeometryJet, g2: &GeometryJet) -> Vec<C> {
    let n = g1.n;
    let mut out = vec![ZERO; n * n * n];
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..n {
                let mut x = ZERO;
                for s in 0..n {
                    x += g1.g_up(i, s) * g2.gamma_up(j, k, s) - g2.g_up(j, s) * g1.gamma_up(i, k, s)
                        - g1.g_up(j, s) * g2.gamma_up(i, k, s)
                        + g2.g_up(i, s) * g1.gamma_up(j, k, s);
                }
                out[(i * n + j) * n + k] = x;
                out[(j * n + i) * n + k] = -x;
            }
        }
    }
    out
}

pub fn tensor_m(g1: &MetricField, g2: &MetricField, point: &[C]) -> Result<Vec<C>> {
    check_same_dim(g1, g2)?;
    Ok(tensor_m_from(&g1.geometry(point)?, &g2.geometry(point)?))
}

/// `T^{ijk} = g_{1,sp} N^p_{rq} g_2^{ri} g_2^{qj} g_2^{sk}`, the Nijenhuis tensor
/// with all indices moved by the two metrics, stored as `[(i*n + j)*n + k]`.
pub fn lowered_nijenhuis(nij: &[C], g1: &GeometryJet, g2: &GeometryJet) -> Vec<C> {
    let n = g1.n;
    // A^p_{ij} = N^p_{rq} g2^{ri} g2^{qj}
    let mut a = vec![ZERO; n * n * n];
    for p in 0..n {
        for r in 0..n {
            for j in 0..n {
                let t: C = (0..n).map(|q| nij[(p * n + r) * n + q] * g2.g_up(q, j)).sum();
                for i in 0..n {
                    a[(p * n + i) * n + j] += t * g2.g_up(r, i);
                }
            }
        }
    }
    // B_{s ij} = g1_{sp} A^p_{ij}; T^{ijk} = g2^{sk} B_{s ij}
    let mut out = vec![ZERO; n * n * n];
    for s in 0..n {
        for i in 0..n {
            for j in 0..n {
                let b: C = (0..n).map(|p| g1.g_down(s, p) * a[(p * n + i) * n + j]).sum();
                for k in 0..n {
                    out[(i * n + j) * n + k] += g2.g_up(s, k) * b;
                }
            }
        }
    }
    out
}

/// Residuals of the three identities linking `M` and `T` (see
/// [`lowered_nijenhuis`]), each divided by `1 + max(|M|, |T|)`:
///
/// ```text
/// T^{ijk} = M^{kji} + M^{ikj} + M^{ijk}
/// 2(M^{ikj} + M^{ijk}) = T^{ijk} + T^{ikj}
/// 2 M^{kji} = T^{ijk} − T^{ikj}
/// ```
pub fn mn_identity_residuals(m: &[C], t: &[C], n: usize) -> [f64; 3] {
    let at = |x: &[C], i: usize, j: usize, k: usize| x[(i * n + j) * n + k];
    let scale = 1.0 + m.iter().chain(t).map(|z| z.norm()).fold(0.0, f64::max);
    let mut r = [0f64; 3];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let e1 = at(t, i, j, k) - (at(m, k, j, i) + at(m, i, k, j) + at(m, i, j, k));
                let e2 = 2.0 * (at(m, i, k, j) + at(m, i, j, k)) - (at(t, i, j, k) + at(t, i, k, j));
                let e3 = 2.0 * at(m, k, j, i) - (at(t, i, j, k) - at(t, i, k, j));
                r[0] = r[0].max(e1.norm());
                r[1] = r[1].max(e2.norm());
                r[2] = r[2].max(e3.norm());
            }
        }
    }
    r.map(|x| x / scale)
}

/// Residuals of the metric-connection relations, relative to `1 + max` of the
/// quantities involved:
///
/// ```text
/// ∂_k g^{ij} + Γ^{ij}_k + Γ^{ji}_k = 0
/// g^{is} Γ^{jk}_s = g^{js} Γ^{ik}_s
/// ```
pub fn connection_residuals(geo: &GeometryJet) -> [f64; 2] {
    let n = geo.n;
    let scale = 1.0 + geo.scale();
    let mut r = [0f64; 2];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let c1 = geo.dg_up(k, i, j) + geo.gamma_up(i, j, k) + geo.gamma_up(j, i, k);
                let (mut a, mut b) = (ZERO, ZERO);
                for s in 0..n {
                    a += geo.g_up(i, s) * geo.gamma_up(j, k, s);
                    b += geo.g_up(j, s) * geo.gamma_up(i, k, s);
                }
                r[0] = r[0].max(c1.norm());
                r[1] = r[1].max((a - b).norm());
            }
        }
    }
    r.map(|x| x / scale)
}

/// Residual of the curvature antisymmetries
/// `R^{ij}_{kl} = −R^{ji}_{kl} = −R^{ij}_{lk}`, relative to `1 + max|R|`.
pub fn curvature_symmetry_residual(geo: &GeometryJet) -> f64 {
    let n = geo.n;
    let scale = 1.0 + geo.max_curvature();
    let mut worst = 0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let r = geo.riemann_up(i, j, k, l);
                    worst = worst
                        .max((r + geo.riemann_up(j, i, k, l)).norm())
                        .max((r + geo.riemann_up(i, j, l, k)).norm());
                }
            }
        }
    }
    worst / scale
}

/// Eigenvalues of the affinor, i.e. roots of `det(g_1 − λ g_2) = 0`.
pub fn pencil_eigenvalues(g1: &MetricField, g2: &MetricField, point: &[C]) -> Result<PencilSpectrum> {
    pencil_eigenvalues_with(g1, g2, point, &RootOptions::default())
}

pub fn pencil_eigenvalues_with(
    g1: &MetricField,
    g2: &MetricField,
    point: &[C],
    opts: &RootOptions,
) -> Result<PencilSpectrum> {
    let a = affinor_at(g1, g2, point)?;
    eigen::spectrum(&a.v, a.n, opts)
}

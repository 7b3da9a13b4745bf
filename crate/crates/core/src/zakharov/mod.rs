//! Dressing construction of rotation coefficients.
//!
//! Potentials `Φ_ij(x, y)` for `i ≤ j` define the kernel
//!
//! ```text
//! F_ij(s, s') =  ∂_x Φ_ij(s − u^i, s' − u^j)     i < j
//! F_ji(s, s') = −∂_y Φ_ij(s' − u^i, s − u^j)     i < j
//! F_ii(s, s') =  ∂_x Φ_ii(s − u^i, s' − u^i)     Φ_ii skew-symmetric
//! ```
//!
//! which satisfies `∂_{s'} F_ij(s, s') + ∂_{s'} F_ji(s', s) = 0` identically
//! (the derivative in the second slot, evaluated at swapped arguments). The
//! integral equation
//!
//! ```text
//! K_ij(s, s') = F_ij(s, s') + ∫_s^{s_max} Σ_l K_il(s, q) F_lj(q, s') dq
//! ```
//!
//! is solved by Nyström discretization and `β_ij(s) = K_ji(s, s)`.
//!
//! The reduced kernel multiplies `F_ij` by `√f^j(u^j − s') / √f^i(u^i − s)`
//! (principal branch). Its solution is the same rescaling of the raw one.
//!
//! Truncating `∫_s^∞` at `s_max` is exact only if `F` vanishes beyond
//! `s_max`. If `|F_lj(q, s')| ≤ δ e^{−γ(q − s_max)}` for `q ≥ s_max`, the
//! omitted tail changes `K` by at most `N δ ‖K‖_∞ / γ`; solves report a
//! truncation warning when `|F|` on the lines `s = s_max` or `s' = s_max`
//! exceeds `decay_tol`.

mod quadrature;
mod solve;

pub use quadrature::{
    gauss_legendre, gauss_legendre_panels, trapezoid_from, uniform_nodes, Quadrature, QuadratureRule,
};
pub use solve::{
    beta_at, extract_beta, rotation_stencil, solve_integral_equation, solve_row, BetaSample, RowSolution,
    SolutionGrid, TruncationWarning, MAX_CONDITION,
};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::ScalarField;
use crate::report::Residual;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

pub const DEFAULT_DECAY_TOL: f64 = 1e-8;
/// Pointwise tolerance for the skew-symmetry of `Φ_ii`.
pub const SKEW_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelFlag {
    Raw,
    Reduced,
}

#[derive(Clone, Debug)]
pub struct DressingProblem {
    n: usize,
    phi: Vec<Option<ScalarField>>,
    f: Vec<ScalarField>,
    pub u: Vec<C>,
    pub s_min: f64,
    pub s_max: f64,
    pub m: usize,
    pub rule: QuadratureRule,
    pub decay_tol: f64,
}

impl DressingProblem {
    /// `phi` lists `((i, j), Φ_ij)` with `i ≤ j`; missing entries are zero.
    /// `f` holds `N` fields of one variable.
    pub fn new(
        n: usize,
        phi: Vec<((usize, usize), ScalarField)>,
        f: Vec<ScalarField>,
        u: Vec<C>,
        (s_min, s_max): (f64, f64),
        m: usize,
    ) -> Result<Self> {
        if n == 0 || u.len() != n {
            return Err(Error::Input(format!("evaluation point must have {n} > 0 coordinates")));
        }
        if f.len() != n || f.iter().any(|x| x.arity() != 1) {
            return Err(Error::Input(format!("need {n} eigenvalue functions of one variable")));
        }
        if !(s_min.is_finite() && s_max.is_finite() && s_min < s_max) {
            return Err(Error::Input(format!("invalid s-range [{s_min}, {s_max}]")));
        }
        if m < 2 {
            return Err(Error::Input("quadrature grid needs at least two nodes".into()));
        }
        let mut table = vec![None; n * n];
        for ((i, j), field) in phi {
            if i > j || j >= n {
                return Err(Error::Input(format!(
                    "Φ_({},{}) is not an independent entry; give i ≤ j ≤ {n}",
                    i + 1,
                    j + 1
                )));
            }
            if field.arity() != 2 {
                return Err(Error::Input(format!("Φ_({},{}) must be a field of two variables", i + 1, j + 1)));
            }
            if table[i * n + j].replace(field).is_some() {
                return Err(Error::Input(format!("Φ_({},{}) given twice", i + 1, j + 1)));
            }
        }
        let p = DressingProblem {
            n,
            phi: table,
            f,
            u,
            s_min,
            s_max,
            m,
            rule: QuadratureRule::Trapezoid,
            decay_tol: DEFAULT_DECAY_TOL,
        };
        p.check_skew()?;
        Ok(p)
    }

    pub fn with_rule(mut self, rule: QuadratureRule) -> Result<Self> {
        if let QuadratureRule::GaussLegendre { order } = rule {
            if order == 0 {
                return Err(Error::Input("Gauss–Legendre order must be positive".into()));
            }
        }
        self.rule = rule;
        Ok(self)
    }

    pub fn with_decay_tol(mut self, tol: f64) -> Self {
        self.decay_tol = tol;
        self
    }

    pub fn with_m(mut self, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Input("quadrature grid needs at least two nodes".into()));
        }
        self.m = m;
        Ok(self)
    }

    /// The same problem at another evaluation point.
    pub fn at(&self, u: &[C]) -> Result<Self> {
        if u.len() != self.n {
            return Err(Error::Input(format!("evaluation point must have {} coordinates", self.n)));
        }
        let mut p = self.clone();
        p.u = u.to_vec();
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn phi(&self, i: usize, j: usize) -> Option<&ScalarField> {
        self.phi[i * self.n + j].as_ref()
    }

    pub fn eigenvalue_fn(&self, i: usize) -> &ScalarField {
        &self.f[i]
    }

    pub fn nodes(&self) -> Vec<f64> {
        uniform_nodes(self.s_min, self.s_max, self.m)
    }

    /// Quadrature on `[s, s_max]` for the configured rule.
    pub fn row_quadrature(&self, s: f64) -> Quadrature {
        match self.rule {
            QuadratureRule::Trapezoid => trapezoid_from(&self.nodes(), s),
            QuadratureRule::GaussLegendre { order } => {
                gauss_legendre_panels(s, self.s_max, (self.m / order).max(1), order)
            }
        }
    }

    fn check_skew(&self) -> Result<()> {
        let nodes = self.nodes();
        let stride = (nodes.len() / 12).max(1);
        let sample: Vec<f64> = nodes.iter().step_by(stride).copied().collect();
        for i in 0..self.n {
            let Some(phi) = self.phi(i, i) else { continue };
            for &a in &sample {
                for &b in &sample {
                    let (x, y) = (a - self.u[i], b - self.u[i]);
                    let v = phi.eval(&[x, y])?;
                    let w = phi.eval(&[y, x])?;
                    if (v + w).norm() > SKEW_TOL * v.norm().max(1.0) {
                        return Err(Error::Input(format!(
                            "Φ_({0},{0}) is not skew-symmetric: Φ(x,y) + Φ(y,x) = {1:e} at x = {x}, y = {y}",
                            i + 1,
                            (v + w).norm()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `(F_ij, ∂_s F_ij, ∂_{s'} F_ij)` of the raw kernel; partials only when
    /// `order == 2`.
    fn raw_entry(&self, i: usize, j: usize, s: f64, sp: f64, order: u8) -> Result<[C; 3]> {
        let u = &self.u;
        if i <= j {
            let Some(phi) = self.phi(i, j) else { return Ok([ZERO; 3]) };
            let jet = phi.eval_jet(&[s - u[i], sp - u[j]], order)?;
            if order < 2 {
                return Ok([jet.d1(0), ZERO, ZERO]);
            }
            Ok([jet.d1(0), jet.d2(0, 0), jet.d2(0, 1)])
        } else {
            let Some(phi) = self.phi(j, i) else { return Ok([ZERO; 3]) };
            let jet = phi.eval_jet(&[sp - u[j], s - u[i]], order)?;
            if order < 2 {
                return Ok([-jet.d1(1), ZERO, ZERO]);
            }
            Ok([-jet.d1(1), -jet.d2(1, 1), -jet.d2(0, 1)])
        }
    }

    /// `(√f^i(u^i − s), d/ds of it)`.
    fn sqrt_f(&self, i: usize, s: f64) -> Result<(C, C)> {
        let jet = self.f[i].eval_jet(&[self.u[i] - s], 1)?;
        if jet.value == ZERO {
            return Err(Error::domain(format!("f^{} vanishes at u^{} − s with s = {s}", i + 1, i + 1)));
        }
        let r = jet.value.sqrt();
        Ok((r, -jet.d1(0) / (2.0 * r)))
    }

    /// `F_ij(s, s')` of the raw or reduced kernel.
    pub fn kernel_entry(&self, flag: KernelFlag, i: usize, j: usize, s: f64, sp: f64) -> Result<C> {
        let [v, _, _] = self.raw_entry(i, j, s, sp, 1)?;
        match flag {
            KernelFlag::Raw => Ok(v),
            KernelFlag::Reduced => {
                if v == ZERO {
                    return Ok(v);
                }
                Ok(v * self.sqrt_f(j, sp)?.0 / self.sqrt_f(i, s)?.0)
            }
        }
    }

    /// `(F_ij, ∂_s F_ij, ∂_{s'} F_ij)` at `(s, s')`.
    pub fn kernel_partials(&self, flag: KernelFlag, i: usize, j: usize, s: f64, sp: f64) -> Result<[C; 3]> {
        let raw = self.raw_entry(i, j, s, sp, 2)?;
        match flag {
            KernelFlag::Raw => Ok(raw),
            KernelFlag::Reduced => {
                let (ri, dri) = self.sqrt_f(i, s)?;
                let (rj, drj) = self.sqrt_f(j, sp)?;
                let q = rj / ri;
                Ok([
                    q * raw[0],
                    q * raw[1] - q * dri / ri * raw[0],
                    q * raw[2] + drj / ri * raw[0],
                ])
            }
        }
    }
}

/// `F_ij(s_a, s_b)` on the uniform base grid, stored as an `(N·m) × (N·m)`
/// matrix with row `i·m + a` and column `j·m + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelGrid {
    pub n: usize,
    pub nodes: Vec<f64>,
    pub u: Vec<C>,
    pub flag: KernelFlag,
    pub values: Vec<C>,
}

impl KernelGrid {
    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    fn pos(&self, i: usize, a: usize, j: usize, b: usize) -> usize {
        let m = self.m();
        (i * m + a) * self.n * m + j * m + b
    }

    pub fn get(&self, i: usize, a: usize, j: usize, b: usize) -> C {
        self.values[self.pos(i, a, j, b)]
    }

    /// Builds a grid from an arbitrary kernel function `F(i, j, s, s')`.
    pub fn from_fn(
        n: usize,
        nodes: Vec<f64>,
        u: Vec<C>,
        flag: KernelFlag,
        f: impl Fn(usize, usize, f64, f64) -> Result<C> + Sync,
    ) -> Result<Self> {
        let m = nodes.len();
        let values = (0..n * m)
            .into_par_iter()
            .map(|row| {
                let (i, a) = (row / m, row % m);
                (0..n * m)
                    .map(|col| f(i, col / m, nodes[a], nodes[col % m]))
                    .collect::<Result<Vec<C>>>()
            })
            .collect::<Result<Vec<_>>>()?
            .concat();
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("kernel entry {v} is not finite")));
        }
        Ok(KernelGrid {
            n,
            nodes,
            u,
            flag,
            values,
        })
    }

    /// `max |F|` on the lines `s = s_max` and `s' = s_max`.
    pub fn edge_max(&self) -> f64 {
        let (n, m) = (self.n, self.m());
        let mut out = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for a in 0..m {
                    out = out.max(self.get(i, m - 1, j, a).norm()).max(self.get(i, a, j, m - 1).norm());
                }
            }
        }
        out
    }
}

/// The raw kernel on the problem's base grid.
pub fn build_kernel(p: &DressingProblem) -> Result<KernelGrid> {
    KernelGrid::from_fn(p.n, p.nodes(), p.u.clone(), KernelFlag::Raw, |i, j, s, sp| {
        p.kernel_entry(KernelFlag::Raw, i, j, s, sp)
    })
}

/// Multiplies a raw grid by `√f^j(u^j − s_b) / √f^i(u^i − s_a)`.
pub fn reduce_kernel(k: &KernelGrid, p: &DressingProblem) -> Result<KernelGrid> {
    if k.flag != KernelFlag::Raw {
        return Err(Error::Input("kernel grid is already reduced".into()));
    }
    if k.n != p.n || k.u != p.u {
        return Err(Error::Input("kernel grid does not belong to this problem".into()));
    }
    let m = k.m();
    let mut roots = vec![ZERO; p.n * m];
    for i in 0..p.n {
        let mut prev: Option<C> = None;
        for (a, &s) in k.nodes.iter().enumerate() {
            let z = p.f[i].eval(&[p.u[i] - s])?;
            if z == ZERO {
                return Err(Error::domain(format!("f^{} vanishes at node s_{a} = {s}", i + 1)));
            }
            if let Some(w) = prev {
                if z.im == 0.0 && w.im == 0.0 && z.re * w.re < 0.0 {
                    return Err(Error::domain(format!(
                        "f^{} has a zero between s_{} and s_{a} = {s}",
                        i + 1,
                        a - 1
                    )));
                }
                if z.re < 0.0 && w.re < 0.0 && z.im * w.im < 0.0 {
                    return Err(Error::domain(format!(
                        "f^{}(u^{} − s) crosses the branch cut of √ between s_{} and s_{a} = {s}",
                        i + 1,
                        i + 1,
                        a - 1
                    )));
                }
            }
            prev = Some(z);
            roots[i * m + a] = z.sqrt();
        }
    }
    let mut out = k.clone();
    out.flag = KernelFlag::Reduced;
    for i in 0..p.n {
        for a in 0..m {
            for j in 0..p.n {
                for b in 0..m {
                    let pos = out.pos(i, a, j, b);
                    out.values[pos] *= roots[j * m + b] / roots[i * m + a];
                }
            }
        }
    }
    Ok(out)
}

fn pair_point(s: f64, sp: f64) -> [C; 2] {
    [C::new(s, 0.0), C::new(sp, 0.0)]
}

/// `max |∂_{s'}F_ij(s, s') + ∂_{s'}F_ji(s', s)|` over `pairs` and all `i, j`,
/// from exact jets of `Φ` and `f`.
pub fn check_reduction_relation(p: &DressingProblem, flag: KernelFlag, pairs: &[(f64, f64)]) -> Result<Residual> {
    let mut r = Residual::new("reduction_relation");
    for &(s, sp) in pairs {
        for i in 0..p.n {
            for j in 0..p.n {
                let a = p.kernel_partials(flag, i, j, s, sp)?[2];
                let b = p.kernel_partials(flag, j, i, sp, s)?[2];
                r.record((a + b).norm(), 0.0, &pair_point(s, sp));
            }
        }
    }
    Ok(r)
}

/// The same residual for an arbitrary kernel `F(i, j, s, s')`, with central
/// differences of step `h` (error `O(h²)`).
pub fn check_reduction_relation_fd(
    n: usize,
    f: impl Fn(usize, usize, f64, f64) -> C,
    pairs: &[(f64, f64)],
    h: f64,
) -> Residual {
    let d2 = |i, j, s, sp: f64| (f(i, j, s, sp + h) - f(i, j, s, sp - h)) / (2.0 * h);
    let mut r = Residual::new("reduction_relation");
    for &(s, sp) in pairs {
        for i in 0..n {
            for j in 0..n {
                r.record((d2(i, j, s, sp) + d2(j, i, sp, s)).norm(), 0.0, &pair_point(s, sp));
            }
        }
    }
    r
}

/// The residual on a kernel grid, with central differences along the
/// uniform nodes (error `O(h²)`), at interior node pairs.
pub fn check_reduction_relation_grid(k: &KernelGrid) -> Result<Residual> {
    let m = k.m();
    if m < 3 {
        return Err(Error::Input("need at least three nodes for grid differences".into()));
    }
    let h = k.nodes[1] - k.nodes[0];
    let d2 = |i, a, j, b: usize| (k.get(i, a, j, b + 1) - k.get(i, a, j, b - 1)) / (2.0 * h);
    let mut r = Residual::new("reduction_relation");
    for a in 1..m - 1 {
        for b in 1..m - 1 {
            for i in 0..k.n {
                for j in 0..k.n {
                    let v = d2(i, a, j, b) + d2(j, b, i, a);
                    r.record(v.norm(), 0.0, &pair_point(k.nodes[a], k.nodes[b]));
                }
            }
        }
    }
    Ok(r)
}

#[derive(Clone, Debug)]
pub struct PhiPdeResiduals {
    /// Off-diagonal potentials, `i < j`.
    pub ss: Residual,
    /// Diagonal potentials.
    pub ss2: Residual,
}

/// Residuals of the second-order equations on `Φ` that make the reduced
/// kernel satisfy the reduction relation. With `A = f^i(u^i − s)`,
/// `B = f^j(u^j − s')` and `Φ = Φ_ij(s − u^i, s' − u^j)` both read
/// `2 Φ_xy (A − B) + B′ Φ_x − A′ Φ_y`, primes on `f`.
pub fn check_phi_pdes(p: &DressingProblem, pairs: &[(f64, f64)]) -> Result<PhiPdeResiduals> {
    let mut ss = Residual::new("ss");
    let mut ss2 = Residual::new("ss2");
    for &(s, sp) in pairs {
        for i in 0..p.n {
            for j in i..p.n {
                let Some(phi) = p.phi(i, j) else {
                    let r = if i == j { &mut ss2 } else { &mut ss };
                    r.record(0.0, 0.0, &pair_point(s, sp));
                    continue;
                };
                let jet = phi.eval_jet(&[s - p.u[i], sp - p.u[j]], 2)?;
                let a = p.f[i].eval_jet(&[p.u[i] - s], 1)?;
                let b = p.f[j].eval_jet(&[p.u[j] - sp], 1)?;
                let v = 2.0 * jet.d2(0, 1) * (a.value - b.value) + b.d1(0) * jet.d1(0) - a.d1(0) * jet.d1(1);
                let r = if i == j { &mut ss2 } else { &mut ss };
                r.record(v.norm(), 0.0, &pair_point(s, sp));
            }
        }
    }
    Ok(PhiPdeResiduals { ss, ss2 })
}

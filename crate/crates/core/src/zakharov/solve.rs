//! Nyström solution of the truncated integral equation.
//!
//! For a fixed `s` with quadrature `(q_b, w_b)` on `[s, s_max]` the unknowns
//! `x_i(l, b) = K_il(s, q_b)` satisfy, for every row index `i`,
//!
//! ```text
//! x_i(j, c) − Σ_{l,b} w_b F_lj(q_b, q_c) x_i(l, b) = F_ij(s, q_c)
//! ```
//!
//! one dense LU of size `N·M` shared by the `N` right-hand sides. Values at
//! any other `s'` follow from the Nyström interpolant
//! `K_ij(s, s') = F_ij(s, s') + Σ_{l,b} w_b K_il(s, q_b) F_lj(q_b, s')`.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{DressingProblem, KernelFlag, KernelGrid, Quadrature};
use crate::error::{Error, Result};
use crate::grid::{stencil_points, Grid, GridKind};
use crate::linalg::{condition_estimate, Lu};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Condition estimates above this are reported as a singular operator.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationWarning {
    /// `max |F|` on the lines `s = s_max` and `s' = s_max`.
    pub edge_max: f64,
    pub decay_tol: f64,
}

fn truncation(edge_max: f64, decay_tol: f64) -> Option<TruncationWarning> {
    (edge_max > decay_tol).then_some(TruncationWarning { edge_max, decay_tol })
}

/// Kernel evaluation, from a tabulated grid when both arguments are base
/// nodes and from the potentials otherwise.
#[derive(Clone, Copy)]
struct Access<'a> {
    p: &'a DressingProblem,
    flag: KernelFlag,
    table: Option<&'a KernelGrid>,
}

impl Access<'_> {
    fn get(&self, i: usize, j: usize, s: (f64, Option<usize>), sp: (f64, Option<usize>)) -> Result<C> {
        if let (Some(t), Some(a), Some(b)) = (self.table, s.1, sp.1) {
            return Ok(t.get(i, a, j, b));
        }
        self.p.kernel_entry(self.flag, i, j, s.0, sp.0)
    }
}

/// `K_il(s, q_b)` for one value of `s`.
#[derive(Clone, Debug)]
pub struct RowSolution {
    pub s: f64,
    pub n: usize,
    pub flag: KernelFlag,
    pub quad: Quadrature,
    /// `K_il(s, q_b)` at `[i][l·M + b]`.
    pub values: Vec<C>,
    pub condition: f64,
    /// Max relative residual of the discrete system.
    pub residual: f64,
}

impl RowSolution {
    pub fn get(&self, i: usize, l: usize, b: usize) -> C {
        let mm = self.quad.len();
        self.values[i * self.n * mm + l * mm + b]
    }

    fn interpolate_with(&self, acc: Access, s_index: Option<usize>, i: usize, j: usize, sp: (f64, Option<usize>)) -> Result<C> {
        let mut v = acc.get(i, j, (self.s, s_index), sp)?;
        for l in 0..self.n {
            for (b, (&q, &w)) in self.quad.nodes.iter().zip(&self.quad.weights).enumerate() {
                let x = self.get(i, l, b);
                if x != ZERO {
                    v += w * x * acc.get(l, j, (q, self.quad.index[b]), sp)?;
                }
            }
        }
        Ok(v)
    }

    /// `K_ij(s, s')` from the Nyström interpolant.
    pub fn interpolate(&self, p: &DressingProblem, i: usize, j: usize, sp: f64) -> Result<C> {
        let acc = Access {
            p,
            flag: self.flag,
            table: None,
        };
        self.interpolate_with(acc, None, i, j, (sp, None))
    }
}

fn solve_row_with(acc: Access, s: f64, s_index: Option<usize>, quad: Quadrature) -> Result<RowSolution> {
    let n = acc.p.dim();
    let mm = quad.len();
    let d = n * mm;
    let empty = RowSolution {
        s,
        n,
        flag: acc.flag,
        quad: quad.clone(),
        values: vec![],
        condition: 1.0,
        residual: 0.0,
    };
    if mm == 0 {
        return Ok(empty);
    }
    quad.validate()?;
    let node = |b: usize| (quad.nodes[b], quad.index[b]);
    // a[(j,c),(l,b)] = δ − w_b F_lj(q_b, q_c), assembled row by row
    let a: Vec<C> = (0..d)
        .into_par_iter()
        .map(|row| {
            let (j, c) = (row / mm, row % mm);
            let mut out = Vec::with_capacity(d);
            for l in 0..n {
                for b in 0..mm {
                    let f = acc.get(l, j, node(b), node(c))?;
                    let delta = if l == j && b == c { 1.0 } else { 0.0 };
                    out.push(C::new(delta, 0.0) - quad.weights[b] * f);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    let lu = Lu::new(&a, d);
    if lu.is_singular() {
        return Err(Error::SingularOperator {
            s,
            condition: f64::INFINITY,
        });
    }
    let condition = condition_estimate(&a, &lu);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularOperator { s, condition });
    }
    let mut values = Vec::with_capacity(n * d);
    let mut residual = 0.0f64;
    for i in 0..n {
        let rhs = (0..d)
            .map(|row| acc.get(i, row / mm, (s, s_index), node(row % mm)))
            .collect::<Result<Vec<C>>>()?;
        let x = lu.solve(&rhs);
        let scale = 1.0 + rhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (row, r) in rhs.iter().enumerate() {
            let ax: C = a[row * d..(row + 1) * d].iter().zip(&x).map(|(p, q)| p * q).sum();
            residual = residual.max((ax - r).norm() / scale);
        }
        values.extend(x);
    }
    Ok(RowSolution {
        values,
        condition,
        residual,
        ..empty
    })
}

/// Solves for `K_il(s, ·)` with the problem's rule on `[s, s_max]`.
pub fn solve_row(p: &DressingProblem, flag: KernelFlag, s: f64) -> Result<RowSolution> {
    if !(s >= p.s_min && s <= p.s_max) {
        return Err(Error::Input(format!("s = {s} outside [{}, {}]", p.s_min, p.s_max)));
    }
    let acc = Access { p, flag, table: None };
    solve_row_with(acc, s, None, p.row_quadrature(s))
}

/// Rotation coefficients `β_ij(s) = K_ji(s, s)` at the problem's point.
#[derive(Clone, Debug)]
pub struct BetaSample {
    pub s: f64,
    pub n: usize,
    /// Row-major `β_ij`; the diagonal is zero.
    pub beta: Vec<C>,
    pub condition: f64,
    pub residual: f64,
    pub truncation: Option<TruncationWarning>,
}

impl BetaSample {
    pub fn b(&self, i: usize, j: usize) -> C {
        self.beta[i * self.n + j]
    }
}

pub fn beta_at(p: &DressingProblem, flag: KernelFlag, s: f64) -> Result<BetaSample> {
    let row = solve_row(p, flag, s)?;
    let n = p.dim();
    let mut beta = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                beta[i * n + j] = row.interpolate(p, j, i, s)?;
            }
        }
    }
    let mut edge = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for &q in row.quad.nodes.iter().chain([s].iter()) {
                edge = edge
                    .max(p.kernel_entry(flag, i, j, p.s_max, q)?.norm())
                    .max(p.kernel_entry(flag, i, j, q, p.s_max)?.norm());
            }
        }
    }
    Ok(BetaSample {
        s,
        n,
        beta,
        condition: row.condition,
        residual: row.residual,
        truncation: truncation(edge, p.decay_tol),
    })
}

/// `K_ij(s_a, s_b)` on the uniform base grid.
#[derive(Clone, Debug)]
pub struct SolutionGrid {
    pub n: usize,
    pub nodes: Vec<f64>,
    pub u: Vec<C>,
    pub flag: KernelFlag,
    /// `K_ij(s_a, s_b)` at `[a][b][i][j]`.
    pub values: Vec<C>,
    /// Condition estimate per row `s_a`.
    pub conditions: Vec<f64>,
    pub residual: f64,
    pub truncation: Option<TruncationWarning>,
}

impl SolutionGrid {
    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    pub fn get(&self, a: usize, b: usize, i: usize, j: usize) -> C {
        let (n, m) = (self.n, self.m());
        self.values[((a * m + b) * n + i) * n + j]
    }

    pub fn to_grid(&self) -> Grid {
        Grid {
            kind: GridKind::Solution,
            n: self.n,
            m: self.m(),
            s_min: self.nodes[0],
            s_max: *self.nodes.last().unwrap(),
            step: 0.0,
            points: vec![self.u.clone()],
            data: self.values.clone(),
        }
    }
}

/// Solves every row `s_a` of the base grid; rows are independent and run in
/// parallel when asked.
pub fn solve_integral_equation(k: &KernelGrid, p: &DressingProblem, parallel: bool) -> Result<SolutionGrid> {
    let nodes = p.nodes();
    if k.n != p.dim() || k.u != p.u || k.nodes != nodes {
        return Err(Error::Input("kernel grid does not match the problem's grid and point".into()));
    }
    let acc = Access {
        p,
        flag: k.flag,
        table: Some(k),
    };
    let (n, m) = (p.dim(), nodes.len());
    let row = |a: usize| -> Result<(Vec<C>, f64, f64)> {
        let sol = solve_row_with(acc, nodes[a], Some(a), p.row_quadrature(nodes[a]))?;
        let mut out = Vec::with_capacity(m * n * n);
        for b in 0..m {
            for i in 0..n {
                for j in 0..n {
                    out.push(sol.interpolate_with(acc, Some(a), i, j, (nodes[b], Some(b)))?);
                }
            }
        }
        Ok((out, sol.condition, sol.residual))
    };
    let rows: Vec<_> = if parallel {
        (0..m).into_par_iter().map(row).collect::<Result<_>>()?
    } else {
        (0..m).map(row).collect::<Result<_>>()?
    };
    let mut values = Vec::with_capacity(m * m * n * n);
    let mut conditions = Vec::with_capacity(m);
    let mut residual = 0.0f64;
    for (v, c, r) in rows {
        values.extend(v);
        conditions.push(c);
        residual = residual.max(r);
    }
    Ok(SolutionGrid {
        n,
        nodes,
        u: p.u.clone(),
        flag: k.flag,
        values,
        conditions,
        residual,
        truncation: truncation(k.edge_max(), p.decay_tol),
    })
}

/// `β_ij(s_a) = K_ji(s_a, s_a)` for every base node, row-major per node.
pub fn extract_beta(sol: &SolutionGrid) -> Vec<Vec<C>> {
    let n = sol.n;
    (0..sol.m())
        .map(|a| {
            let mut b = vec![ZERO; n * n];
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        b[i * n + j] = sol.get(a, a, j, i);
                    }
                }
            }
            b
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct StencilRun {
    pub grid: Grid,
    pub max_condition: f64,
    pub max_residual: f64,
    pub truncation: Option<TruncationWarning>,
}

/// `β(s, u')` for `u'` on the fourth-order stencil of step `h` around the
/// problem's point and for uniformly spaced `s_values`, as a rotation
/// stencil grid.
pub fn rotation_stencil(
    p: &DressingProblem,
    flag: KernelFlag,
    s_values: &[f64],
    h: f64,
    parallel: bool,
) -> Result<StencilRun> {
    if s_values.is_empty() || !(h > 0.0) {
        return Err(Error::Input("need at least one s value and a positive step".into()));
    }
    if s_values.len() > 1 {
        let d = (s_values[s_values.len() - 1] - s_values[0]) / (s_values.len() - 1) as f64;
        let uniform = s_values.iter().enumerate().all(|(a, s)| (s - (s_values[0] + a as f64 * d)).abs() <= 1e-12);
        if !(d > 0.0) || !uniform {
            return Err(Error::Input("s values must be increasing and uniformly spaced".into()));
        }
    }
    let points = stencil_points(&p.u, h);
    let work = |u: &Vec<C>| -> Result<Vec<BetaSample>> {
        let q = p.at(u)?;
        s_values.iter().map(|&s| beta_at(&q, flag, s)).collect()
    };
    let samples: Vec<Vec<BetaSample>> = if parallel {
        points.par_iter().map(work).collect::<Result<_>>()?
    } else {
        points.iter().map(work).collect::<Result<_>>()?
    };
    let all = || samples.iter().flatten();
    let grid = Grid {
        kind: GridKind::RotationStencil,
        n: p.dim(),
        m: s_values.len(),
        s_min: s_values[0],
        s_max: *s_values.last().unwrap(),
        step: h,
        points,
        data: all().flat_map(|b| b.beta.iter().copied()).collect(),
    };
    Ok(StencilRun {
        grid,
        max_condition: all().map(|b| b.condition).fold(0.0, f64::max),
        max_residual: all().map(|b| b.residual).fold(0.0, f64::max),
        truncation: all().filter_map(|b| b.truncation).max_by(|a, b| a.edge_max.total_cmp(&b.edge_max)),
    })
}

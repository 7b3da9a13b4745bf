//! One-dimensional quadrature rules on `[s, s_max]`.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadratureRule {
    /// Composite trapezoid on the uniform grid, `O(h²)`.
    Trapezoid,
    /// Gauss–Legendre panels of the given order laid on each `[s, s_max]`.
    GaussLegendre { order: usize },
}

/// Nodes and weights. `index[b]` is the position of node `b` in the uniform
/// base grid when it is a base node.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub index: Vec<Option<usize>>,
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.nodes.len() || self.index.len() != self.nodes.len() {
            return Err(Error::Input("quadrature arrays differ in length".into()));
        }
        if self.weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Input("quadrature weights must be positive".into()));
        }
        if self.nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Input("quadrature nodes must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

/// Uniform nodes `s_a = s_min + a·(s_max − s_min)/(m − 1)`.
pub fn uniform_nodes(s_min: f64, s_max: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![s_min];
    }
    let h = (s_max - s_min) / (m - 1) as f64;
    (0..m).map(|a| if a == m - 1 { s_max } else { s_min + a as f64 * h }).collect()
}

/// Trapezoid rule on `[s, s_max]` through `s` and the base nodes above it.
/// A start within `1e-9·h` of a base node snaps to that node.
pub fn trapezoid_from(base: &[f64], s: f64) -> Quadrature {
    let s_max = *base.last().unwrap();
    let h = if base.len() > 1 { base[1] - base[0] } else { 0.0 };
    let snap = 1e-9 * h.max(f64::MIN_POSITIVE);
    let mut nodes = Vec::new();
    let mut index = Vec::new();
    match base.iter().position(|x| (x - s).abs() <= snap) {
        Some(a) => {
            nodes.extend_from_slice(&base[a..]);
            index.extend((a..base.len()).map(Some));
        }
        None => {
            nodes.push(s);
            index.push(None);
            for (a, x) in base.iter().enumerate().filter(|(_, x)| **x > s) {
                nodes.push(*x);
                index.push(Some(a));
            }
        }
    }
    if nodes.len() < 2 || s >= s_max {
        return Quadrature {
            nodes: vec![],
            weights: vec![],
            index: vec![],
        };
    }
    let mut weights = vec![0.0; nodes.len()];
    for k in 0..nodes.len() - 1 {
        let d = 0.5 * (nodes[k + 1] - nodes[k]);
        weights[k] += d;
        weights[k + 1] += d;
    }
    Quadrature { nodes, weights, index }
}

/// Nodes and weights of the `order`-point Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // P_n(z) and P_{n−1}(z) by the three-term recurrence
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wk = 2.0 / ((1.0 - z * z) * dp * dp);
        x[k] = -z;
        x[n - 1 - k] = z;
        w[k] = wk;
        w[n - 1 - k] = wk;
    }
    (x, w)
}

/// `panels` equal Gauss–Legendre panels of `order` points on `[a, b]`.
pub fn gauss_legendre_panels(a: f64, b: f64, panels: usize, order: usize) -> Quadrature {
    if !(b > a) || panels == 0 || order == 0 {
        return Quadrature {
            nodes: vec![],
            weights: vec![],
            index: vec![],
        };
    }
    let (x, w) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        for (xk, wk) in x.iter().zip(&w) {
            nodes.push(lo + 0.5 * width * (xk + 1.0));
            weights.push(0.5 * width * wk);
        }
    }
    let index = vec![None; nodes.len()];
    Quadrature { nodes, weights, index }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_to_degree_2n_minus_1() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for d in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d + 1) as f64 };
                assert!((q - exact).abs() < 1e-13, "n={n} d={d}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn panels_integrate_smooth_functions() {
        let q = gauss_legendre_panels(0.3, 2.0, 4, 8);
        q.validate().unwrap();
        let exact = 2.0f64.exp() - 0.3f64.exp();
        assert!((q.integrate(f64::exp) - exact).abs() < 1e-14);
    }

    #[test]
    fn trapezoid_subgrid_and_offgrid_start() {
        let base = uniform_nodes(0.0, 1.0, 11);
        let q = trapezoid_from(&base, 0.3);
        q.validate().unwrap();
        assert_eq!(q.nodes.len(), 8);
        assert_eq!(q.index[0], Some(3));
        assert!((q.weights[0] - 0.05).abs() < 1e-15);
        assert!((q.integrate(|x| x) - 0.455).abs() < 1e-14);
        let q = trapezoid_from(&base, 0.25);
        assert_eq!((q.nodes[0], q.index[0], q.index[1]), (0.25, None, Some(3)));
        assert!((q.integrate(|x| 2.0 * x + 1.0) - (2.0 - 0.25 - 0.0625)).abs() < 1e-14);
        assert!(trapezoid_from(&base, 1.0).is_empty());
    }

    #[test]
    fn trapezoid_error_is_second_order() {
        let err = |m| {
            let q = trapezoid_from(&uniform_nodes(0.0, 1.0, m), 0.0);
            (q.integrate(f64::exp) - (1f64.exp() - 1.0)).abs()
        };
        let ratio = err(65) / err(129);
        assert!((ratio - 4.0).abs() < 0.05, "{ratio}");
    }
}

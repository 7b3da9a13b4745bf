//! Truncated multivariate Taylor jets up to third order.
//!
//! Higher slots are only filled for index tuples in non-decreasing order and
//! then mirrored, so the Hessian and third-derivative arrays are symmetric
//! bit for bit.

use num_complex::Complex64;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct Jet3 {
    dim: usize,
    order: u8,
    pub value: C,
    /// `grad[i] = ∂_i f`
    pub grad: Vec<C>,
    /// row-major `hess[i*N + j] = ∂_i ∂_j f`
    pub hess: Vec<C>,
    /// `third[(i*N + j)*N + k] = ∂_i ∂_j ∂_k f`
    pub third: Vec<C>,
}

impl Jet3 {
    pub fn constant(dim: usize, order: u8, value: C) -> Self {
        Jet3 {
            dim,
            order,
            value,
            grad: vec![ZERO; dim],
            hess: vec![ZERO; if order >= 2 { dim * dim } else { 0 }],
            third: vec![ZERO; if order >= 3 { dim * dim * dim } else { 0 }],
        }
    }

    pub fn variable(dim: usize, order: u8, index: usize, value: C) -> Self {
        let mut j = Jet3::constant(dim, order, value);
        if order >= 1 {
            j.grad[index] = C::new(1.0, 0.0);
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    #[inline]
    pub fn d1(&self, i: usize) -> C {
        self.grad[i]
    }

    #[inline]
    pub fn d2(&self, i: usize, j: usize) -> C {
        if self.order < 2 {
            return ZERO;
        }
        self.hess[i * self.dim + j]
    }

    #[inline]
    pub fn d3(&self, i: usize, j: usize, k: usize) -> C {
        if self.order < 3 {
            return ZERO;
        }
        self.third[(i * self.dim + j) * self.dim + k]
    }

    fn set2(&mut self, i: usize, j: usize, v: C) {
        let n = self.dim;
        self.hess[i * n + j] = v;
        self.hess[j * n + i] = v;
    }

    fn set3(&mut self, i: usize, j: usize, k: usize, v: C) {
        let n = self.dim;
        for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
            self.third[(a * n + b) * n + c] = v;
        }
    }

    fn zip(&self, other: &Jet3, f: impl Fn(C, C) -> C) -> Jet3 {
        debug_assert_eq!(self.dim, other.dim);
        let order = self.order.min(other.order);
        Jet3 {
            dim: self.dim,
            order,
            value: f(self.value, other.value),
            grad: self.grad.iter().zip(&other.grad).map(|(a, b)| f(*a, *b)).collect(),
            hess: self.hess.iter().zip(&other.hess).map(|(a, b)| f(*a, *b)).collect(),
            third: self.third.iter().zip(&other.third).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn add(&self, other: &Jet3) -> Jet3 {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Jet3) -> Jet3 {
        self.zip(other, |a, b| a - b)
    }

    pub fn neg(&self) -> Jet3 {
        self.scale(C::new(-1.0, 0.0))
    }

    pub fn scale(&self, c: C) -> Jet3 {
        Jet3 {
            dim: self.dim,
            order: self.order,
            value: self.value * c,
            grad: self.grad.iter().map(|a| a * c).collect(),
            hess: self.hess.iter().map(|a| a * c).collect(),
            third: self.third.iter().map(|a| a * c).collect(),
        }
    }

    /// Leibniz rule.
    pub fn mul(&self, g: &Jet3) -> Jet3 {
        let f = self;
        let n = f.dim;
        let order = f.order.min(g.order);
        let mut out = Jet3::constant(n, order, f.value * g.value);
        if order >= 1 {
            for i in 0..n {
                out.grad[i] = f.value * g.grad[i] + f.grad[i] * g.value;
            }
        }
        if order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let v = f.value * g.d2(i, j)
                        + f.grad[i] * g.grad[j]
                        + f.grad[j] * g.grad[i]
                        + f.d2(i, j) * g.value;
                    out.set2(i, j, v);
                }
            }
        }
        if order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let v = f.value * g.d3(i, j, k)
                            + f.grad[i] * g.d2(j, k)
                            + f.grad[j] * g.d2(i, k)
                            + f.grad[k] * g.d2(i, j)
                            + f.d2(i, j) * g.grad[k]
                            + f.d2(i, k) * g.grad[j]
                            + f.d2(j, k) * g.grad[i]
                            + f.d3(i, j, k) * g.value;
                        out.set3(i, j, k, v);
                    }
                }
            }
        }
        out
    }

    /// Composition `φ ∘ self` given `φ(x), φ'(x), φ''(x), φ'''(x)` at `x = self.value`.
    pub fn compose(&self, phi: [C; 4]) -> Jet3 {
        let g = self;
        let n = g.dim;
        let mut out = Jet3::constant(n, g.order, phi[0]);
        if g.order >= 1 {
            for i in 0..n {
                out.grad[i] = phi[1] * g.grad[i];
            }
        }
        if g.order >= 2 {
            for i in 0..n {
                for j in i..n {
                    let v = phi[2] * g.grad[i] * g.grad[j] + phi[1] * g.d2(i, j);
                    out.set2(i, j, v);
                }
            }
        }
        if g.order >= 3 {
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let v = phi[3] * g.grad[i] * g.grad[j] * g.grad[k]
                            + phi[2]
                                * (g.d2(i, j) * g.grad[k]
                                    + g.d2(i, k) * g.grad[j]
                                    + g.d2(j, k) * g.grad[i])
                            + phi[1] * g.d3(i, j, k);
                        out.set3(i, j, k, v);
                    }
                }
            }
        }
        out
    }

    /// Bounds the magnitude of every populated slot.
    pub fn is_finite(&self) -> bool {
        let ok = |z: &C| z.re.is_finite() && z.im.is_finite();
        ok(&self.value)
            && self.grad.iter().all(ok)
            && self.hess.iter().all(ok)
            && self.third.iter().all(ok)
    }
}

//! Dense complex linear algebra on row-major `Vec<Complex64>` storage.

use num_complex::Complex64;
use rayon::prelude::*;

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);

/// Below this size the trailing update runs on one thread.
const PAR_MIN: usize = 96;

/// LU factorization `P A = L U` with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<C>,
    perm: Vec<usize>,
    swaps: usize,
    singular: bool,
}

impl Lu {
    pub fn new(a: &[C], n: usize) -> Lu {
        assert_eq!(a.len(), n * n);
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        let mut singular = false;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|r| (r, lu[r * n + k].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
                swaps += 1;
            }
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..(k + 1) * n];
            let inv = pivot_row[k].inv();
            let update = |row: &mut [C]| {
                let m = row[k] * inv;
                row[k] = m;
                if m != ZERO {
                    for c in k + 1..n {
                        row[c] -= m * pivot_row[c];
                    }
                }
            };
            if n - k > PAR_MIN {
                tail.par_chunks_mut(n).for_each(update);
            } else {
                tail.chunks_mut(n).for_each(update);
            }
        }
        Lu {
            n,
            lu,
            perm,
            swaps,
            singular,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// True when an exactly zero pivot was met.
    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn det(&self) -> C {
        if self.singular {
            return ZERO;
        }
        let n = self.n;
        let d = (0..n).fold(ONE, |acc, k| acc * self.lu[k * n + k]);
        if self.swaps % 2 == 1 {
            -d
        } else {
            d
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [C]) {
        let n = self.n;
        let mut x: Vec<C> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let row = &self.lu[r * n..r * n + r];
            let s: C = row.iter().zip(&x[..r]).map(|(l, y)| l * y).sum();
            x[r] -= s;
        }
        for r in (0..n).rev() {
            let row = &self.lu[r * n..(r + 1) * n];
            let s: C = row[r + 1..].iter().zip(&x[r + 1..]).map(|(u, y)| u * y).sum();
            x[r] = (x[r] - s) / row[r];
        }
        b.copy_from_slice(&x);
    }

    pub fn solve(&self, b: &[C]) -> Vec<C> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves `Aᴴ x = b`.
    pub fn solve_adjoint(&self, b: &[C]) -> Vec<C> {
        let n = self.n;
        // Aᴴ = Uᴴ Lᴴ P, so solve Uᴴ y = b, Lᴴ z = y, then x = Pᵀ z.
        let mut y = b.to_vec();
        for r in 0..n {
            let mut s = y[r];
            for c in 0..r {
                s -= self.lu[c * n + r].conj() * y[c];
            }
            y[r] = s / self.lu[r * n + r].conj();
        }
        for r in (0..n).rev() {
            let mut s = y[r];
            for c in r + 1..n {
                s -= self.lu[c * n + r].conj() * y[c];
            }
            y[r] = s;
        }
        let mut x = vec![ZERO; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    /// Hager–Higham estimate of `‖A⁻¹‖₁`.
    pub fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.n;
        if self.singular {
            return f64::INFINITY;
        }
        let mut x = vec![C::new(1.0 / n as f64, 0.0); n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.solve(&x);
            let new_est: f64 = y.iter().map(|z| z.norm()).sum();
            let xi: Vec<C> = y
                .iter()
                .map(|z| if z.norm() == 0.0 { ONE } else { z / z.norm() })
                .collect();
            let z = self.solve_adjoint(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.norm()))
                .fold((0, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if new_est <= est || zmax <= ztx {
                est = est.max(new_est);
                break;
            }
            est = new_est;
            x = vec![ZERO; n];
            x[j] = ONE;
        }
        est
    }
}

pub fn norm1(a: &[C], n: usize) -> f64 {
    (0..n)
        .map(|c| (0..n).map(|r| a[r * n + c].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// One-norm condition number estimate.
pub fn condition_estimate(a: &[C], lu: &Lu) -> f64 {
    norm1(a, lu.dim()) * lu.inverse_norm1_estimate()
}

/// `|det A| / Π ‖row_i‖₂`, which lies in `[0, 1]` by Hadamard's inequality and
/// does not depend on the scale of individual rows.
pub fn relative_det(a: &[C], n: usize, det: C) -> f64 {
    let bound: f64 = (0..n)
        .map(|r| a[r * n..(r + 1) * n].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .product();
    if bound == 0.0 {
        0.0
    } else {
        det.norm() / bound
    }
}

/// Inverse and determinant, or `None` when the relative determinant is at or
/// below `tol`. On failure the determinant is still returned.
pub fn invert(a: &[C], n: usize, tol: f64) -> Result<(Vec<C>, C), C> {
    let lu = Lu::new(a, n);
    let det = lu.det();
    if lu.is_singular() || relative_det(a, n, det) <= tol {
        return Err(det);
    }
    let mut inv = vec![ZERO; n * n];
    let mut col = vec![ZERO; n];
    for c in 0..n {
        col.iter_mut().for_each(|z| *z = ZERO);
        col[c] = ONE;
        lu.solve_in_place(&mut col);
        for r in 0..n {
            inv[r * n + c] = col[r];
        }
    }
    Ok((inv, det))
}

pub fn det(a: &[C], n: usize) -> C {
    Lu::new(a, n).det()
}

pub fn matmul(a: &[C], b: &[C], n: usize) -> Vec<C> {
    let mut out = vec![ZERO; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == ZERO {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

pub fn identity(n: usize) -> Vec<C> {
    let mut m = vec![ZERO; n * n];
    for i in 0..n {
        m[i * n + i] = ONE;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C {
        C::new(x, 0.0)
    }

    fn sample(n: usize) -> Vec<C> {
        (0..n * n)
            .map(|k| {
                let x = (k as f64 * 0.7).sin() + if k % (n + 1) == 0 { 3.0 } else { 0.0 };
                C::new(x, (k as f64 * 1.3).cos() * 0.5)
            })
            .collect()
    }

    #[test]
    fn solve_and_adjoint_solve() {
        for n in [1, 2, 5, 130] {
            let a = sample(n);
            let lu = Lu::new(&a, n);
            let b: Vec<C> = (0..n).map(|k| C::new(k as f64, 1.0)).collect();
            let x = lu.solve(&b);
            for r in 0..n {
                let s: C = (0..n).map(|k| a[r * n + k] * x[k]).sum();
                assert!((s - b[r]).norm() < 1e-11, "n={n}");
            }
            let y = lu.solve_adjoint(&b);
            for r in 0..n {
                let s: C = (0..n).map(|k| a[k * n + r].conj() * y[k]).sum();
                assert!((s - b[r]).norm() < 1e-11, "n={n}");
            }
        }
    }

    #[test]
    fn determinant_with_pivoting() {
        let a = vec![c(0.0), c(2.0), c(3.0), c(4.0)];
        assert!((det(&a, 2) - c(-6.0)).norm() < 1e-15);
        let s = vec![c(1.0), c(2.0), c(2.0), c(4.0)];
        assert!(invert(&s, 2, 1e-10).is_err());
    }

    #[test]
    fn inverse_round_trip() {
        let n = 4;
        let a = sample(n);
        let (inv, _) = invert(&a, n, 1e-10).unwrap();
        let p = matmul(&a, &inv, n);
        let id = identity(n);
        for k in 0..n * n {
            assert!((p[k] - id[k]).norm() < 1e-13);
        }
    }

    #[test]
    fn condition_estimate_of_diagonal() {
        let a = vec![c(1.0), c(0.0), c(0.0), c(1e-4)];
        let lu = Lu::new(&a, 2);
        let k = condition_estimate(&a, &lu);
        assert!((k - 1e4).abs() < 1e-6);
    }

    #[test]
    fn relative_det_ignores_row_scale() {
        let a = vec![c(1.0), c(0.0), c(0.0), c(1e-12)];
        assert!((relative_det(&a, 2, det(&a, 2)) - 1.0).abs() < 1e-15);
    }
}

//! Eigenvalues of a small complex matrix via its characteristic polynomial.
//!
//! Coefficients come from the Faddeev–LeVerrier recursion and roots from the
//! Durand–Kerner simultaneous iteration. Roots are returned sorted by real
//! part, then imaginary part.
//!
//! Simultaneous iteration only resolves a root of multiplicity `c` to about
//! `eps^(1/c)`, so after convergence nearby roots are merged: the closest pair
//! of clusters is joined while its distance `d` is below
//! `cluster_factor · eps^(1/c) · max(1, max|λ|)`, where `c` counts the roots in
//! all clusters within `2d` of the pair. The centroid of a merged cluster of
//! size `c` is refined by Newton steps on `p^(c−1)`, where the repeated root
//! is simple, and all members are replaced by it. A repeated eigenvalue
//! therefore reports a gap of exactly zero.

use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

#[derive(Clone, Debug)]
pub struct RootOptions {
    pub max_iters: usize,
    pub cluster_factor: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            max_iters: 5000,
            cluster_factor: 50.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PencilSpectrum {
    pub values: Vec<C>,
    /// Minimum pairwise distance; infinite for a single eigenvalue.
    pub gap: f64,
}

impl PencilSpectrum {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `gap / max(max|λ|, tiny)`.
    pub fn relative_gap(&self) -> f64 {
        self.gap / self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Eigenvalues count as pairwise distinct when `gap > rel · max(max|λ|, tiny)`.
    pub fn is_nonsingular(&self, rel: f64) -> bool {
        self.gap > rel * self.max_abs().max(f64::MIN_POSITIVE)
    }
}

/// Monic characteristic polynomial `det(zI − A)`, coefficients from the
/// constant term up: `[c_0, ..., c_{n−1}, 1]`.
pub fn characteristic_polynomial(a: &[C], n: usize) -> Vec<C> {
    let mut coeffs = vec![C::new(0.0, 0.0); n + 1];
    coeffs[n] = C::new(1.0, 0.0);
    let mut m = vec![C::new(0.0, 0.0); n * n];
    for k in 1..=n {
        // M_k = A M_{k−1} + c_{n−k+1} I
        let mut next = vec![C::new(0.0, 0.0); n * n];
        for i in 0..n {
            for l in 0..n {
                let ail = a[i * n + l];
                for j in 0..n {
                    next[i * n + j] += ail * m[l * n + j];
                }
            }
            next[i * n + i] += coeffs[n - k + 1];
        }
        m = next;
        let mut tr = C::new(0.0, 0.0);
        for i in 0..n {
            for l in 0..n {
                tr += a[i * n + l] * m[l * n + i];
            }
        }
        coeffs[n - k] = -tr / k as f64;
    }
    coeffs
}

fn horner(coeffs: &[C], z: C) -> C {
    coeffs.iter().rev().fold(C::new(0.0, 0.0), |acc, c| acc * z + c)
}

/// Roots of a monic polynomial given by ascending coefficients.
pub fn polynomial_roots(coeffs: &[C], opts: &RootOptions) -> Result<Vec<C>> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![-coeffs[0]]);
    }
    let radius = 1.0 + coeffs[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = C::new(0.4, 0.9);
    let mut z: Vec<C> = (0..n).map(|k| seed.powu(k as u32) * (0.5 * radius)).collect();
    let abs_coeffs: Vec<f64> = coeffs.iter().map(|c| c.norm()).collect();
    let mut converged = false;
    for _ in 0..opts.max_iters {
        let mut done = true;
        for k in 0..n {
            let p = horner(coeffs, z[k]);
            let bound = abs_coeffs.iter().rev().fold(0.0, |acc, c| acc * z[k].norm() + c);
            if p.norm() > 16.0 * f64::EPSILON * bound {
                done = false;
            }
            let mut den = C::new(1.0, 0.0);
            for j in 0..n {
                if j != k {
                    den *= z[k] - z[j];
                }
            }
            if den.norm() == 0.0 {
                z[k] += C::new(1e-8, 1e-8) * radius;
                done = false;
                continue;
            }
            z[k] -= p / den;
        }
        if done {
            converged = true;
            break;
        }
    }
    if !converged || z.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
        return Err(Error::RootFindingFailure {
            iterations: opts.max_iters,
        });
    }
    Ok(z)
}

fn derivative(coeffs: &[C], times: usize) -> Vec<C> {
    let mut c = coeffs.to_vec();
    for _ in 0..times {
        c = c.iter().enumerate().skip(1).map(|(k, a)| a * k as f64).collect();
    }
    c
}

/// A few Newton steps, keeping the best iterate.
fn polish(coeffs: &[C], mut z: C) -> C {
    let dc = derivative(coeffs, 1);
    let mut best = (horner(coeffs, z).norm(), z);
    for _ in 0..8 {
        let d = horner(&dc, z);
        if d.norm() == 0.0 {
            break;
        }
        z -= horner(coeffs, z) / d;
        let r = horner(coeffs, z).norm();
        if !(r < best.0) {
            break;
        }
        best = (r, z);
    }
    best.1
}

fn merge_clusters(coeffs: &[C], roots: &[C], opts: &RootOptions) -> Vec<C> {
    let scale = roots.iter().map(|z| z.norm()).fold(1.0, f64::max);
    // (centroid, members)
    let mut clusters: Vec<(C, Vec<usize>)> = roots.iter().enumerate().map(|(k, z)| (*z, vec![k])).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let d = (clusters[a].0 - clusters[b].0).norm();
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let Some((d, a, b)) = best else { break };
        // count every cluster near the pair, so a triple root is judged as one
        let size: usize = clusters
            .iter()
            .filter(|(z, _)| (z - clusters[a].0).norm() <= 2.0 * d || (z - clusters[b].0).norm() <= 2.0 * d)
            .map(|(_, m)| m.len())
            .sum();
        let threshold = opts.cluster_factor * f64::EPSILON.powf(1.0 / size as f64) * scale;
        if d > threshold {
            break;
        }
        let (cb, mb) = clusters.remove(b);
        let (ca, ma) = &mut clusters[a];
        let wa = ma.len() as f64;
        let wb = mb.len() as f64;
        *ca = (*ca * wa + cb * wb) / (wa + wb);
        ma.extend(mb);
    }
    // a root of multiplicity c is a simple root of p^(c−1)
    for (centroid, members) in clusters.iter_mut() {
        if members.len() > 1 {
            *centroid = polish(&derivative(coeffs, members.len() - 1), *centroid);
        }
    }
    let mut out = roots.to_vec();
    for (centroid, members) in &clusters {
        for &k in members {
            out[k] = *centroid;
        }
    }
    out
}

/// Sorted eigenvalues of the `n × n` matrix `a` and their minimum gap.
pub fn spectrum(a: &[C], n: usize, opts: &RootOptions) -> Result<PencilSpectrum> {
    let coeffs = characteristic_polynomial(a, n);
    let roots = polynomial_roots(&coeffs, opts)?;
    let mut values = merge_clusters(&coeffs, &roots, opts);
    values.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let mut gap = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            gap = gap.min((values[i] - values[j]).norm());
        }
    }
    Ok(PencilSpectrum { values, gap })
}

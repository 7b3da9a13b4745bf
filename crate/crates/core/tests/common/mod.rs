//! Helpers shared by the integration test targets: random expression
//! generators and finite-difference oracles that only use plain evaluation.

#![allow(dead_code)]

use flatpencil::{Complex64 as C, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn re(x: f64) -> C {
    C::new(x, 0.0)
}

pub fn pt(xs: &[f64]) -> Vec<C> {
    xs.iter().map(|&x| re(x)).collect()
}

fn literal(rng: &mut ChaCha8Rng) -> String {
    let x: f64 = rng.random_range(-2.0..2.0);
    let x = (x * 100.0).round() / 100.0;
    if x < 0.0 {
        format!("({x})")
    } else {
        format!("{x}")
    }
}

/// Random expression text over `u1..u{dim}` built from every grammar construct.
pub fn random_expr(rng: &mut ChaCha8Rng, dim: usize, depth: u32) -> String {
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.7) {
            format!("u{}", rng.random_range(1..=dim))
        } else {
            literal(rng)
        };
    }
    let a = random_expr(rng, dim, depth - 1);
    match rng.random_range(0..11) {
        0 => format!("({a} + {})", random_expr(rng, dim, depth - 1)),
        1 => format!("({a} - {})", random_expr(rng, dim, depth - 1)),
        2 | 3 => format!("({a} * {})", random_expr(rng, dim, depth - 1)),
        4 => format!("({a}) / (2 + {})", random_expr(rng, dim, depth - 1)),
        5 => format!("({a})^{}", rng.random_range(-2..=3)),
        6 => format!("exp(0.5*{a})"),
        7 => format!("ln(3 + {a})"),
        8 => format!("sin({a})"),
        9 => format!("cos({a})"),
        _ => format!("sqrt(4 + {a})"),
    }
}

/// Random polynomial-plus-exponential coefficient function, bounded on boxes
/// of moderate size.
pub fn random_smooth(rng: &mut ChaCha8Rng, dim: usize) -> String {
    let mut terms = vec![format!("{:.3}", rng.random_range(-1.0..1.0))];
    for i in 1..=dim {
        terms.push(format!("{:.3}*u{i}", rng.random_range(-1.0..1.0)));
        for j in i..=dim {
            terms.push(format!("{:.3}*u{i}*u{j}", rng.random_range(-0.5..0.5)));
        }
    }
    let k = rng.random_range(1..=dim);
    terms.push(format!(
        "{:.3}*exp({:.3}*u{k})",
        rng.random_range(-0.3..0.3),
        rng.random_range(-0.5..0.5)
    ));
    terms.join(" + ")
}

/// Random symmetric matrix field `c·I + S(u)` with `S` small, so that it is
/// nondegenerate on the unit box.
pub fn random_metric_entries(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Vec<String>> {
    let mut m = vec![vec![String::new(); dim]; dim];
    for i in 0..dim {
        for j in i..dim {
            let base = random_smooth(rng, dim);
            let e = if i == j {
                format!("{:.3} + 0.2*({base})", rng.random_range(1.5..3.0))
            } else {
                format!("0.2*({base})")
            };
            m[i][j] = e.clone();
            m[j][i] = e;
        }
    }
    m
}

pub fn random_point(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> Vec<C> {
    (0..dim).map(|_| re(rng.random_range(lo..hi))).collect()
}

fn shifted(x: &[C], moves: &[(usize, f64)]) -> Vec<C> {
    let mut y = x.to_vec();
    for &(k, d) in moves {
        y[k] += d;
    }
    y
}

/// Central difference of `f` along `k`, Richardson-extrapolated from `h` and `h/2`.
pub fn fd1(f: &dyn Fn(&[C]) -> C, x: &[C], k: usize, h: f64) -> C {
    let d = |h: f64| (f(&shifted(x, &[(k, h)])) - f(&shifted(x, &[(k, -h)]))) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// Central second difference of `f` along `(k, l)`, Richardson-extrapolated.
pub fn fd2(f: &dyn Fn(&[C]) -> C, x: &[C], k: usize, l: usize, h: f64) -> C {
    let d = |h: f64| {
        if k == l {
            (f(&shifted(x, &[(k, h)])) - 2.0 * f(x) + f(&shifted(x, &[(k, -h)]))) / (h * h)
        } else {
            (f(&shifted(x, &[(k, h), (l, h)])) - f(&shifted(x, &[(k, h), (l, -h)]))
                - f(&shifted(x, &[(k, -h), (l, h)]))
                + f(&shifted(x, &[(k, -h), (l, -h)])))
                / (4.0 * h * h)
        }
    };
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

pub fn field_fn(f: &ScalarField) -> impl Fn(&[C]) -> C + '_ {
    move |x: &[C]| f.eval(x).expect("finite-difference stencil left the domain")
}

/// `|a - b| / max(1, |a|, |b|)`.
pub fn rel_err(a: C, b: C) -> f64 {
    (a - b).norm() / 1f64.max(a.norm()).max(b.norm())
}

/// Worst relative error of all first and second partials of `f` at `x`
/// against finite differences, or `None` when `x` is too close to a
/// singularity for differencing to be meaningful.
pub fn jet_vs_fd(f: &ScalarField, x: &[C]) -> Option<f64> {
    let n = x.len();
    let jet = f.eval_jet(x, 3).ok()?;
    let scale = 1f64.max(jet.value.norm());
    let big = jet
        .grad
        .iter()
        .chain(&jet.hess)
        .chain(&jet.third)
        .any(|z| z.norm() > 1e3 * scale);
    if big {
        return None;
    }
    // stencils must stay inside the domain
    let h = 2e-3;
    for k in 0..n {
        for l in 0..n {
            for (a, b) in [(h, h), (h, -h), (-h, h), (-h, -h)] {
                f.eval(&shifted(x, &[(k, a), (l, b)])).ok()?;
            }
        }
    }
    let g = field_fn(f);
    let mut worst = 0f64;
    for k in 0..n {
        worst = worst.max(rel_err(jet.d1(k), fd1(&g, x, k, h)));
        for l in 0..n {
            worst = worst.max(rel_err(jet.d2(k, l), fd2(&g, x, k, l, h)));
        }
    }
    Some(worst)
}

use flatpencil::{MetricField, Variance};

pub fn metric_from(variance: Variance, rows: &[Vec<String>]) -> MetricField {
    MetricField::parse(variance, rows).unwrap()
}

pub fn strs(rows: &[&[&str]]) -> Vec<Vec<String>> {
    rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect()
}

/// Covariant metric values at `x`, inverting when the field is contravariant.
fn lower_values(g: &MetricField, x: &[C]) -> Vec<C> {
    let n = g.dim();
    let v = g.eval(x).unwrap();
    match g.variance() {
        Variance::Covariant => v,
        Variance::Contravariant => flatpencil::linalg::invert(&v, n, 0.0).unwrap().0,
    }
}

fn upper_values(g: &MetricField, x: &[C]) -> Vec<C> {
    let n = g.dim();
    let v = g.eval(x).unwrap();
    match g.variance() {
        Variance::Contravariant => v,
        Variance::Covariant => flatpencil::linalg::invert(&v, n, 0.0).unwrap().0,
    }
}

/// `Γ^i_{jk}` from central differences of metric values only.
pub fn fd_christoffel(g: &MetricField, x: &[C], h: f64) -> Vec<C> {
    let n = g.dim();
    let up = upper_values(g, x);
    let mut dlow = vec![C::new(0.0, 0.0); n * n * n];
    for k in 0..n {
        for a in 0..n {
            for b in 0..n {
                let f = |y: &[C]| lower_values(g, y)[a * n + b];
                dlow[(k * n + a) * n + b] = fd1(&f, x, k, h);
            }
        }
    }
    let d = |k: usize, a: usize, b: usize| dlow[(k * n + a) * n + b];
    let mut out = vec![C::new(0.0, 0.0); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out[(i * n + j) * n + k] = (0..n)
                    .map(|s| 0.5 * up[i * n + s] * (d(j, s, k) + d(k, j, s) - d(s, j, k)))
                    .sum();
            }
        }
    }
    out
}

/// `R^{ij}_{kl}` from nested central differences; an oracle independent of jets.
pub fn fd_curvature_upup(g: &MetricField, x: &[C]) -> Vec<C> {
    let n = g.dim();
    let (h_in, h_out) = (1e-4, 2e-3);
    let gam = fd_christoffel(g, x, h_in);
    let gm = |i: usize, j: usize, k: usize| gam[(i * n + j) * n + k];
    let mut dgam = vec![C::new(0.0, 0.0); n * n * n * n];
    for l in 0..n {
        for idx in 0..n * n * n {
            let f = |y: &[C]| fd_christoffel(g, y, h_in)[idx];
            dgam[l * n * n * n + idx] = fd1(&f, x, l, h_out);
        }
    }
    let dg = |l: usize, i: usize, j: usize, k: usize| dgam[((l * n + i) * n + j) * n + k];
    let mut r = vec![C::new(0.0, 0.0); n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = dg(k, i, j, l) - dg(l, i, j, k);
                    for p in 0..n {
                        v += gm(i, p, k) * gm(p, j, l) - gm(i, p, l) * gm(p, j, k);
                    }
                    r[((i * n + j) * n + k) * n + l] = v;
                }
            }
        }
    }
    let up = upper_values(g, x);
    let mut out = vec![C::new(0.0, 0.0); n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    out[((i * n + j) * n + k) * n + l] =
                        (0..n).map(|s| up[i * n + s] * r[((j * n + s) * n + k) * n + l]).sum();
                }
            }
        }
    }
    out
}

pub fn max_diff(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

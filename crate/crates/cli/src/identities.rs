//! Identities that hold for every pair of metrics, checked on seeded random
//! pairs.

use std::collections::BTreeMap;

use flatpencil::geometry::{
    affinor_at, connection_residuals, curvature_symmetry_residual, lowered_nijenhuis, mn_identity_residuals,
    nijenhuis, tensor_m_from,
};
use flatpencil::report::Residual;
use flatpencil::{Complex64 as C, MetricField, Result, ScalarField, Variance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const IDENTITY_TOL: f64 = 1e-8;

pub const IDENTITY_NAMES: [&str; 6] = [
    "m_nijenhuis_1",
    "m_nijenhuis_2",
    "m_nijenhuis_3",
    "connection_metric",
    "connection_symmetry",
    "curvature_symmetry",
];

/// Residuals of all identities for one pair at one point, in the order of
/// [`IDENTITY_NAMES`]. Connection and curvature identities take the worse of
/// the two metrics.
pub fn identity_residuals(g1: &MetricField, g2: &MetricField, point: &[C]) -> Result<[f64; 6]> {
    let n = g1.dim();
    let (a, b) = (g1.geometry(point)?, g2.geometry(point)?);
    let nij = nijenhuis(&affinor_at(g1, g2, point)?);
    let t = lowered_nijenhuis(&nij, &a, &b);
    let [m1, m2, m3] = mn_identity_residuals(&tensor_m_from(&a, &b), &t, n);
    let [ca, sa] = connection_residuals(&a);
    let [cb, sb] = connection_residuals(&b);
    let curv = curvature_symmetry_residual(&a).max(curvature_symmetry_residual(&b));
    Ok([m1, m2, m3, ca.max(cb), sa.max(sb), curv])
}

fn coefficient(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo..hi) * 1000.0).round() / 1000.0
}

/// Quadratic polynomial plus one exponential term, bounded on `[−1, 1]^n`.
fn smooth(rng: &mut ChaCha8Rng, n: usize) -> String {
    let mut terms = vec![format!("{}", coefficient(rng, -1.0, 1.0))];
    for i in 1..=n {
        terms.push(format!("({})*u{i}", coefficient(rng, -1.0, 1.0)));
        for j in i..=n {
            terms.push(format!("({})*u{i}*u{j}", coefficient(rng, -0.5, 0.5)));
        }
    }
    let k = rng.random_range(1..=n);
    terms.push(format!(
        "({})*exp(({})*u{k})",
        coefficient(rng, -0.3, 0.3),
        coefficient(rng, -0.5, 0.5)
    ));
    terms.join(" + ")
}

/// Symmetric `c·I + 0.2·S(u)` with `c ∈ [1.5, 3]`, nondegenerate on the unit box.
pub fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> MetricField {
    let mut rows = vec![vec![String::new(); n]; n];
    for i in 0..n {
        for j in i..n {
            let s = smooth(rng, n);
            let e = if i == j {
                format!("{} + 0.2*({s})", coefficient(rng, 1.5, 3.0))
            } else {
                format!("0.2*({s})")
            };
            rows[i][j] = e.clone();
            rows[j][i] = e;
        }
    }
    let fields = rows
        .iter()
        .map(|r| r.iter().map(|e| ScalarField::parse(e, n).expect("generated text parses")).collect())
        .collect();
    MetricField::new(Variance::Contravariant, fields).expect("generated metric is square")
}

#[derive(Clone, Debug)]
pub struct IdentityRun {
    pub trials: usize,
    pub seed: u64,
    pub residuals: Vec<Residual>,
    pub per_dim: BTreeMap<usize, usize>,
}

impl IdentityRun {
    pub fn holds(&self, tol: f64) -> bool {
        self.residuals.iter().all(|r| r.passes(tol))
    }
}

/// `trials` random pairs, dimensions cycling through `dims`, each evaluated
/// at one random point of `[−1, 1]^n`.
pub fn run_identities(seed: u64, trials: usize, dims: &[usize]) -> Result<IdentityRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut residuals: Vec<Residual> = IDENTITY_NAMES.iter().map(|n| Residual::new(*n)).collect();
    let mut per_dim = BTreeMap::new();
    for t in 0..trials {
        let n = dims[t % dims.len()];
        *per_dim.entry(n).or_insert(0) += 1;
        let g1 = random_metric(&mut rng, n);
        let g2 = random_metric(&mut rng, n);
        let x: Vec<C> = (0..n).map(|_| C::new(rng.random_range(-1.0..1.0), 0.0)).collect();
        let values = identity_residuals(&g1, &g2, &x)?;
        for (r, v) in residuals.iter_mut().zip(values) {
            r.record_normalized(v, v, &x);
        }
    }
    Ok(IdentityRun {
        trials,
        seed,
        residuals,
        per_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_pair_gives_exact_zeros() {
        let one = ScalarField::constant(1.0, 2);
        let zero = ScalarField::constant(0.0, 2);
        let delta = MetricField::new(
            Variance::Contravariant,
            vec![vec![one.clone(), zero.clone()], vec![zero, one]],
        )
        .unwrap();
        let r = identity_residuals(&delta, &delta, &[C::new(0.3, 0.0), C::new(-0.2, 0.0)]).unwrap();
        assert_eq!(r, [0.0; 6]);
    }

    #[test]
    fn random_pairs_satisfy_identities() {
        let run = run_identities(42, 100, &[2, 3]).unwrap();
        assert!(run.holds(IDENTITY_TOL), "{:?}", run.residuals);
        assert_eq!(run.per_dim[&2], 50);
    }
}

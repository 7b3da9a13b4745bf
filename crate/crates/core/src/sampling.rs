//! Sample point sets: a tensor grid over a box plus seeded random points.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

type C = Complex64;

#[derive(Clone, Debug, PartialEq)]
pub struct Sampling {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Grid nodes per axis, endpoints included. Zero disables the grid.
    pub grid_per_axis: usize,
    pub random: usize,
    pub seed: u64,
    /// Discard points with `|u1 - u2|` at or below this distance.
    pub avoid_diagonal: Option<f64>,
}

impl Sampling {
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Sampling {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
            grid_per_axis: 3,
            random: 10,
            seed: 0,
            avoid_diagonal: None,
        }
    }

    pub fn grid(mut self, per_axis: usize) -> Self {
        self.grid_per_axis = per_axis;
        self
    }

    pub fn random(mut self, count: usize, seed: u64) -> Self {
        self.random = count;
        self.seed = seed;
        self
    }

    pub fn avoid_diagonal(mut self, distance: f64) -> Self {
        self.avoid_diagonal = Some(distance);
        self
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn keep(&self, p: &[f64]) -> bool {
        match self.avoid_diagonal {
            Some(d) if p.len() >= 2 => (p[0] - p[1]).abs() > d,
            _ => true,
        }
    }

    pub fn points(&self) -> Result<Vec<Vec<C>>> {
        let n = self.dim();
        if n == 0 || self.hi.len() != n {
            return Err(Error::Input("sampling box bounds have inconsistent dimension".into()));
        }
        if self.lo.iter().zip(&self.hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::Input("sampling box has lo > hi".into()));
        }
        let mut out = Vec::new();
        let m = self.grid_per_axis;
        if m > 0 {
            let total = m.checked_pow(n as u32).filter(|t| *t <= 1 << 20).ok_or_else(|| {
                Error::Input(format!("grid of {m}^{n} points is too large"))
            })?;
            let mut p = vec![0.0; n];
            for idx in 0..total {
                let mut r = idx;
                for a in 0..n {
                    let k = r % m;
                    r /= m;
                    let t = if m == 1 { 0.5 } else { k as f64 / (m - 1) as f64 };
                    p[a] = self.lo[a] + t * (self.hi[a] - self.lo[a]);
                }
                if self.keep(&p) {
                    out.push(p.iter().map(|&x| C::new(x, 0.0)).collect());
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut drawn = 0;
        let mut attempts = 0usize;
        while drawn < self.random {
            attempts += 1;
            if attempts > 1000 * (self.random + 1) {
                return Err(Error::Input(
                    "could not draw random points away from the diagonal".into(),
                ));
            }
            let p: Vec<f64> = (0..n)
                .map(|a| self.lo[a] + rng.random::<f64>() * (self.hi[a] - self.lo[a]))
                .collect();
            if self.keep(&p) {
                out.push(p.iter().map(|&x| C::new(x, 0.0)).collect());
                drawn += 1;
            }
        }
        Ok(out)
    }
}

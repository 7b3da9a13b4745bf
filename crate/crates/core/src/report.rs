//! Residual bookkeeping shared by all checkers.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Point, Result};

/// Worst value of one residual over a sample set.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub name: String,
    /// Scale-relative value; verdicts compare this against the tolerance.
    pub value: f64,
    /// Absolute value at the same witness.
    pub raw: f64,
    /// Point where `value` was attained.
    pub witness: Option<Point>,
}

impl Residual {
    pub fn new(name: impl Into<String>) -> Self {
        Residual {
            name: name.into(),
            value: 0.0,
            raw: 0.0,
            witness: None,
        }
    }

    /// Records `raw` at `point`, normalized by `1 + scale`.
    pub fn record(&mut self, raw: f64, scale: f64, point: &[Complex64]) {
        self.record_normalized(raw / (1.0 + scale), raw, point);
    }

    pub fn record_normalized(&mut self, value: f64, raw: f64, point: &[Complex64]) {
        // NaN always wins so that it cannot hide behind a comparison
        if self.witness.is_none() || value > self.value || value.is_nan() && !self.value.is_nan() {
            self.value = value;
            self.raw = raw;
            self.witness = Some(Point::from(point));
        }
    }

    /// Keeps the worse of `self` and `other`; ties keep `self`.
    pub fn merge(&mut self, other: &Residual) {
        if let Some(w) = &other.witness {
            self.record_normalized(other.value, other.raw, &w.0);
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.value < tol
    }
}

/// Evaluates `f` at every point, optionally on the rayon pool. Results keep
/// the input order and the first failing point (in input order) is reported.
pub fn map_points<T, F>(points: &[Vec<Complex64>], parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[Complex64]) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = if parallel {
        points.par_iter().map(|p| f(p)).collect()
    } else {
        points.iter().map(|p| f(p)).collect()
    };
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64) -> Vec<Complex64> {
        vec![Complex64::new(x, 0.0)]
    }

    #[test]
    fn keeps_worst_witness() {
        let mut r = Residual::new("x");
        r.record(1.0, 0.0, &p(1.0));
        r.record(3.0, 0.0, &p(2.0));
        r.record(2.0, 0.0, &p(3.0));
        assert_eq!((r.value, r.witness.unwrap().0), (3.0, p(2.0)));
    }

    #[test]
    fn nan_is_never_passing() {
        let mut r = Residual::new("x");
        r.record(1.0, 0.0, &p(1.0));
        r.record(f64::NAN, 0.0, &p(2.0));
        r.record(5.0, 0.0, &p(3.0));
        assert!(r.value.is_nan());
        assert!(!r.passes(1.0));
    }

    #[test]
    fn parallel_map_preserves_order() {
        let pts: Vec<_> = (0..100).map(|k| p(k as f64)).collect();
        let seq = map_points(&pts, false, |x| Ok(x[0].re * 2.0)).unwrap();
        let par = map_points(&pts, true, |x| Ok(x[0].re * 2.0)).unwrap();
        assert_eq!(seq, par);
    }
}

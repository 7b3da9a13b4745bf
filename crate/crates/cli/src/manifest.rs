//! Manifest format and its resolution into core objects.
//!
//! Expression strings may mention scalar bindings by name; every such name is
//! replaced by the parenthesized binding text before parsing. Metric inputs
//! are either inline specifications or names of metric bindings.

use std::collections::{BTreeMap, BTreeSet};

use flatpencil::{Complex64 as C, MetricField, Sampling, ScalarField, Variance};
use serde::Deserialize;

use crate::InputError;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub dimension: usize,
    #[serde(default)]
    pub bindings: BTreeMap<String, Binding>,
    #[serde(default)]
    pub jobs: Vec<JobSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Binding {
    Scalar(String),
    Metric(MetricSpec),
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum VarianceSpec {
    #[default]
    Contravariant,
    Covariant,
}

/// Exactly one of `entries`, `diagonal` or `conformal`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    #[serde(default)]
    pub variance: VarianceSpec,
    pub entries: Option<Vec<Vec<String>>>,
    pub diagonal: Option<Vec<String>>,
    pub conformal: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MetricRef {
    Name(String),
    Inline(MetricSpec),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Scalar(f64),
    PerAxis(Vec<f64>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub lo: Bound,
    pub hi: Bound,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub random: usize,
    pub seed: Option<u64>,
    pub avoid_diagonal: Option<f64>,
    /// Extra explicit points, appended after the grid and random points.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
}

fn default_grid() -> usize {
    3
}

/// A real number or `[re, im]`.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Real(f64),
    Complex([f64; 2]),
}

impl Number {
    pub fn value(self) -> C {
        match self {
            Number::Real(x) => C::new(x, 0.0),
            Number::Complex([re, im]) => C::new(re, im),
        }
    }
}

/// Fields shared by every job kind.
#[derive(Clone, Debug, Default, Deserialize)]
pub struct Common {
    pub name: Option<String>,
    pub sampling: Option<SamplingSpec>,
    pub tol: Option<f64>,
    /// Asserted verdicts; the job passes when every one matches.
    #[serde(default)]
    pub expect: BTreeMap<String, bool>,
    /// The job report is also written to this path as one JSON document.
    pub output: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum JobSpec {
    PairCheck(PairJob),
    FlatPencil(PairJob),
    LameCheck(LameJob),
    TwoComponent(TwoCompJob),
    Dressing(DressingJob),
    Identities(IdentitiesJob),
}

#[derive(Clone, Debug, Deserialize)]
pub struct PairJob {
    #[serde(flatten)]
    pub common: Common,
    pub g1: MetricRef,
    pub g2: MetricRef,
    pub lambdas: Option<Vec<[Number; 2]>>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct LameJob {
    #[serde(flatten)]
    pub common: Common,
    /// Lamé coefficients `H_i` over the manifest dimension.
    pub h: Vec<String>,
    /// `f^i` as functions of one variable written in `u1`.
    pub f: Vec<String>,
    pub lame_tol: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct TwoCompJob {
    #[serde(flatten)]
    pub common: Common,
    pub b1: String,
    pub b2: String,
    pub potential: String,
    pub eps: [i8; 2],
    pub f1: String,
    pub f2: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSpec {
    /// One-based `(i, j)` with `i ≤ j`.
    pub pair: [usize; 2],
    pub expr: String,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum FlagSpec {
    #[default]
    Raw,
    Reduced,
}

#[derive(Clone, Debug, Deserialize)]
pub struct DressingJob {
    #[serde(flatten)]
    pub common: Common,
    pub n: usize,
    pub phi: Vec<PhiSpec>,
    /// `f^i` in `u1`; all `1` when omitted.
    pub f: Option<Vec<String>>,
    pub u: Vec<f64>,
    pub s_range: [f64; 2],
    pub m: usize,
    /// Gauss–Legendre order; the trapezoid rule when omitted.
    pub gauss_legendre: Option<usize>,
    #[serde(default)]
    pub flag: FlagSpec,
    /// Stencil step in `u`.
    pub h: Option<f64>,
    /// Value of `s` where β is taken; `s_range[0]` when omitted.
    pub s: Option<f64>,
    pub lame_tol: Option<f64>,
    pub decay_tol: Option<f64>,
    /// Path for the binary rotation-stencil grid.
    pub grid: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct IdentitiesJob {
    #[serde(flatten)]
    pub common: Common,
    pub trials: usize,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
}

pub fn default_dims() -> Vec<usize> {
    vec![2, 3]
}

impl JobSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            JobSpec::PairCheck(_) => "pair-check",
            JobSpec::FlatPencil(_) => "flat-pencil",
            JobSpec::LameCheck(_) => "lame-check",
            JobSpec::TwoComponent(_) => "two-component",
            JobSpec::Dressing(_) => "dressing",
            JobSpec::Identities(_) => "identities",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            JobSpec::PairCheck(j) | JobSpec::FlatPencil(j) => &j.common,
            JobSpec::LameCheck(j) => &j.common,
            JobSpec::TwoComponent(j) => &j.common,
            JobSpec::Dressing(j) => &j.common,
            JobSpec::Identities(j) => &j.common,
        }
    }

    /// Verdict names a job of this kind reports, the first being the one
    /// that decides the job when nothing is asserted.
    pub fn verdict_names(&self) -> &'static [&'static str] {
        match self {
            JobSpec::PairCheck(_) => &["compatible", "almost_compatible", "flat_pencil", "nonsingular"],
            JobSpec::FlatPencil(_) => &["flat_pencil"],
            JobSpec::LameCheck(_) => &["agree", "lame_holds", "flat_pencil"],
            JobSpec::TwoComponent(_) => &["agree", "equations_hold", "flat_pencil"],
            JobSpec::Dressing(_) => &["lame", "lam3x", "truncation_clean"],
            JobSpec::Identities(_) => &["identities_hold"],
        }
    }
}

const RESERVED: &[&str] = &["i", "pi", "exp", "ln", "sin", "cos", "sqrt"];

/// Scalar and metric bindings after validation.
#[derive(Debug)]
pub struct Scope {
    pub dim: usize,
    scalars: BTreeMap<String, String>,
    metrics: BTreeMap<String, MetricSpec>,
}

fn is_variable(name: &str) -> bool {
    name.strip_prefix('u').is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
}

fn identifiers(text: &str) -> Vec<(usize, usize)> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut k = 0;
    while k < b.len() {
        if b[k].is_ascii_alphabetic() || b[k] == b'_' {
            let start = k;
            while k < b.len() && (b[k].is_ascii_alphanumeric() || b[k] == b'_') {
                k += 1;
            }
            out.push((start, k));
        } else if b[k].is_ascii_digit() || b[k] == b'.' {
            // skip numeric literals including exponents such as 1e-3
            while k < b.len() && (b[k].is_ascii_alphanumeric() || b[k] == b'.') {
                k += 1;
            }
        } else {
            k += 1;
        }
    }
    out
}

impl Scope {
    pub fn new(dim: usize, bindings: &BTreeMap<String, Binding>) -> Result<Self, InputError> {
        if dim == 0 {
            return Err(InputError::new("dimension must be positive"));
        }
        let mut scalars = BTreeMap::new();
        let mut metrics = BTreeMap::new();
        for (name, b) in bindings {
            let ok = identifiers(name) == [(0, name.len())];
            if !ok || is_variable(name) || RESERVED.contains(&name.as_str()) {
                return Err(InputError::new(format!("invalid binding name `{name}`")));
            }
            match b {
                Binding::Scalar(s) => {
                    scalars.insert(name.clone(), s.clone());
                }
                Binding::Metric(m) => {
                    metrics.insert(name.clone(), m.clone());
                }
            }
        }
        let scope = Scope { dim, scalars, metrics };
        for name in scope.scalars.keys() {
            scope.expand(&scope.scalars[name], &mut vec![name.clone()])?;
        }
        Ok(scope)
    }

    fn expand(&self, text: &str, stack: &mut Vec<String>) -> Result<String, InputError> {
        let mut out = String::new();
        let mut last = 0;
        for (a, b) in identifiers(text) {
            let ident = &text[a..b];
            if self.metrics.contains_key(ident) {
                return Err(InputError::new(format!("metric binding `{ident}` used inside an expression")));
            }
            let Some(body) = self.scalars.get(ident) else { continue };
            if stack.iter().any(|s| s == ident) {
                return Err(InputError::new(format!("binding `{ident}` refers to itself")));
            }
            stack.push(ident.to_string());
            let inner = self.expand(body, stack)?;
            stack.pop();
            out.push_str(&text[last..a]);
            out.push('(');
            out.push_str(&inner);
            out.push(')');
            last = b;
        }
        out.push_str(&text[last..]);
        Ok(out)
    }

    /// Parses `text` over `arity` variables after substituting bindings.
    pub fn scalar(&self, text: &str, arity: usize, what: &str) -> Result<ScalarField, InputError> {
        let expanded = self.expand(text, &mut Vec::new())?;
        ScalarField::parse(&expanded, arity).map_err(|e| InputError::new(format!("{what}: `{text}`: {e}")))
    }

    pub fn scalars(&self, texts: &[String], arity: usize, what: &str) -> Result<Vec<ScalarField>, InputError> {
        texts.iter().enumerate().map(|(k, t)| self.scalar(t, arity, &format!("{what}[{k}]"))).collect()
    }

    pub fn metric(&self, r: &MetricRef, what: &str) -> Result<MetricField, InputError> {
        let spec = match r {
            MetricRef::Name(name) => self
                .metrics
                .get(name)
                .ok_or_else(|| InputError::new(format!("{what}: undefined metric `{name}`")))?,
            MetricRef::Inline(spec) => spec,
        };
        let variance = match spec.variance {
            VarianceSpec::Contravariant => Variance::Contravariant,
            VarianceSpec::Covariant => Variance::Covariant,
        };
        let n = self.dim;
        let built = match (&spec.entries, &spec.diagonal, &spec.conformal) {
            (Some(rows), None, None) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(InputError::new(format!("{what}: entries must be a {n}×{n} matrix")));
                }
                let fields = rows
                    .iter()
                    .map(|row| self.scalars(row, n, what))
                    .collect::<Result<Vec<_>, _>>()?;
                MetricField::new(variance, fields)
            }
            (None, Some(d), None) => {
                if d.len() != n {
                    return Err(InputError::new(format!("{what}: diagonal must have {n} entries")));
                }
                MetricField::diagonal(variance, self.scalars(d, n, what)?)
            }
            (None, None, Some(f)) => MetricField::conformal(variance, self.scalar(f, n, what)?),
            _ => {
                return Err(InputError::new(format!(
                    "{what}: give exactly one of `entries`, `diagonal`, `conformal`"
                )))
            }
        };
        built.map_err(|e| InputError::new(format!("{what}: {e}")))
    }
}

/// Core sampling for a job over `dim` variables.
pub fn sampling(spec: &SamplingSpec, dim: usize, seed: u64) -> Result<(Vec<Vec<C>>, u64), InputError> {
    let bound = |b: &Bound, what: &str| -> Result<Vec<f64>, InputError> {
        match b {
            Bound::Scalar(x) => Ok(vec![*x; dim]),
            Bound::PerAxis(v) if v.len() == dim => Ok(v.clone()),
            Bound::PerAxis(v) => Err(InputError::new(format!(
                "sampling.{what} has {} entries for dimension {dim}",
                v.len()
            ))),
        }
    };
    let seed = spec.seed.unwrap_or(seed);
    let s = Sampling {
        lo: bound(&spec.lo, "lo")?,
        hi: bound(&spec.hi, "hi")?,
        grid_per_axis: spec.grid,
        random: spec.random,
        seed,
        avoid_diagonal: spec.avoid_diagonal,
    };
    let mut points = s.points().map_err(|e| InputError::new(format!("sampling: {e}")))?;
    for p in &spec.points {
        if p.len() != dim {
            return Err(InputError::new(format!("sampling point of length {} for dimension {dim}", p.len())));
        }
        points.push(p.iter().map(|x| C::new(*x, 0.0)).collect());
    }
    if points.is_empty() {
        return Err(InputError::new("sampling produces no points"));
    }
    Ok((points, seed))
}

/// Rejects asserted verdicts the job kind does not report.
pub fn check_expectations(job: &JobSpec) -> Result<(), InputError> {
    let known: BTreeSet<&str> = job.verdict_names().iter().copied().collect();
    for k in job.common().expect.keys() {
        if !known.contains(k.as_str()) {
            return Err(InputError::new(format!(
                "{} job cannot assert `{k}`; known verdicts: {}",
                job.kind(),
                job.verdict_names().join(", ")
            )));
        }
    }
    Ok(())
}

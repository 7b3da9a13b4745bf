//! Batch front-end: reads a JSON manifest of checks and solves, runs them and
//! produces one JSON report per job.
//!
//! The whole manifest is validated before any job runs, so an input error
//! produces no reports at all.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod identities;
pub mod manifest;
pub mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use flatpencil::compat::{analyze, check_flat_pencil, default_lambdas, MetricPair};
use flatpencil::lame::{lame_equivalence, lame_residuals, reduction_residual, LameData, RotationCoeffs};
use flatpencil::twocomp::{two_component_equivalence, TwoCompModel};
use flatpencil::zakharov::{rotation_stencil, DressingProblem, KernelFlag, QuadratureRule};
use flatpencil::{Complex64 as C, ScalarField};
use serde_json::json;

use crate::identities::{run_identities, IDENTITY_TOL};
use crate::manifest::{check_expectations, sampling, FlagSpec, JobSpec, Manifest, Scope, MANIFEST_VERSION};
use crate::report::{JobReport, ResidualReport, TOOL_VERSION};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_LAME_TOL: f64 = 1e-9;
pub const DEFAULT_DRESSING_TOL: f64 = 1e-4;
pub const DEFAULT_STEP: f64 = 1e-3;

/// A manifest that cannot be run as written.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputError(pub String);

impl InputError {
    pub fn new(msg: impl Into<String>) -> Self {
        InputError(msg.into())
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub seed: u64,
    pub parallel: bool,
    /// Replaces the default tolerance of jobs that do not set their own.
    pub tol: Option<f64>,
    /// Record wall-clock time in each report.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 0,
            parallel: false,
            tol: None,
            timing: true,
        }
    }
}

/// Exit status: 0 when every job passes, 1 otherwise.
pub fn exit_code(reports: &[JobReport]) -> i32 {
    if reports.iter().all(|r| r.pass) {
        0
    } else {
        1
    }
}

pub fn parse_manifest(text: &str) -> Result<Manifest, InputError> {
    let m: Manifest = serde_json::from_str(text).map_err(|e| InputError::new(format!("manifest: {e}")))?;
    if m.version != MANIFEST_VERSION {
        return Err(InputError::new(format!(
            "manifest version {} is not supported (expected {MANIFEST_VERSION})",
            m.version
        )));
    }
    Ok(m)
}

enum Task {
    Pair {
        pair: MetricPair,
        full: bool,
    },
    Lame {
        data: LameData,
        lame_tol: f64,
    },
    TwoComp {
        model: TwoCompModel,
        points: Vec<Vec<C>>,
    },
    Dressing {
        problem: DressingProblem,
        flag: KernelFlag,
        s: f64,
        h: f64,
        lame_tol: f64,
        grid: Option<String>,
    },
    Identities {
        trials: usize,
        dims: Vec<usize>,
    },
}

struct Prepared {
    index: usize,
    name: String,
    kind: &'static str,
    primary: &'static str,
    seed: u64,
    tol: f64,
    expected: BTreeMap<String, bool>,
    output: Option<String>,
    task: Task,
}

fn points_for(job: &JobSpec, dim: usize, seed: u64) -> Result<(Vec<Vec<C>>, u64), InputError> {
    let spec = job
        .common()
        .sampling
        .as_ref()
        .ok_or_else(|| InputError::new(format!("{} job needs a `sampling` section", job.kind())))?;
    sampling(spec, dim, seed)
}

fn prepare(index: usize, job: &JobSpec, scope: &Scope, opts: &RunOptions) -> Result<Prepared, InputError> {
    check_expectations(job)?;
    let common = job.common();
    let tol = common.tol.or(opts.tol).unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0) {
        return Err(InputError::new("tolerance must be positive"));
    }
    let mut seed = opts.seed;
    let task = match job {
        JobSpec::PairCheck(j) | JobSpec::FlatPencil(j) => {
            let g1 = scope.metric(&j.g1, "g1")?;
            let g2 = scope.metric(&j.g2, "g2")?;
            let (points, s) = points_for(job, scope.dim, opts.seed)?;
            seed = s;
            let lambdas = match &j.lambdas {
                Some(l) if l.is_empty() => return Err(InputError::new("lambdas must not be empty")),
                Some(l) => l.iter().map(|[a, b]| (a.value(), b.value())).collect(),
                None => default_lambdas(seed),
            };
            let pair = MetricPair::new(g1, g2, points)
                .map_err(|e| InputError::new(e.to_string()))?
                .with_lambdas(lambdas)
                .with_tol(tol)
                .with_parallel(opts.parallel);
            Task::Pair {
                pair,
                full: matches!(job, JobSpec::PairCheck(_)),
            }
        }
        JobSpec::LameCheck(j) => {
            let n = scope.dim;
            if j.h.len() != n || j.f.len() != n {
                return Err(InputError::new(format!("lame-check needs {n} entries in `h` and `f`")));
            }
            let h = scope.scalars(&j.h, n, "h")?;
            let f = scope.scalars(&j.f, 1, "f")?;
            let (points, s) = points_for(job, n, opts.seed)?;
            seed = s;
            Task::Lame {
                data: LameData::new(h, f, points).map_err(|e| InputError::new(e.to_string()))?,
                lame_tol: j.lame_tol.unwrap_or(DEFAULT_LAME_TOL),
            }
        }
        JobSpec::TwoComponent(j) => {
            let two = |t: &str, what: &str| scope.scalar(t, 2, what);
            let one = |t: &str, what: &str| scope.scalar(t, 1, what);
            let model = TwoCompModel::new(
                two(&j.b1, "b1")?,
                two(&j.b2, "b2")?,
                two(&j.potential, "potential")?,
                (j.eps[0], j.eps[1]),
                one(&j.f1, "f1")?,
                one(&j.f2, "f2")?,
            )
            .map_err(|e| InputError::new(e.to_string()))?;
            let (points, s) = points_for(job, 2, opts.seed)?;
            seed = s;
            Task::TwoComp { model, points }
        }
        JobSpec::Dressing(j) => {
            if j.u.len() != j.n {
                return Err(InputError::new(format!("`u` must have n = {} entries", j.n)));
            }
            let mut phi = Vec::new();
            for p in &j.phi {
                let [i, k] = p.pair;
                if i == 0 || k == 0 || i > j.n || k > j.n {
                    return Err(InputError::new(format!("phi pair {:?} out of range 1..={}", p.pair, j.n)));
                }
                phi.push(((i - 1, k - 1), scope.scalar(&p.expr, 2, "phi")?));
            }
            let f = match &j.f {
                Some(f) if f.len() != j.n => return Err(InputError::new(format!("`f` must have {} entries", j.n))),
                Some(f) => scope.scalars(f, 1, "f")?,
                None => vec![ScalarField::constant(1.0, 1); j.n],
            };
            let u = j.u.iter().map(|x| C::new(*x, 0.0)).collect();
            let mut problem = DressingProblem::new(j.n, phi, f, u, (j.s_range[0], j.s_range[1]), j.m)
                .map_err(|e| InputError::new(e.to_string()))?;
            if let Some(order) = j.gauss_legendre {
                problem = problem
                    .with_rule(QuadratureRule::GaussLegendre { order })
                    .map_err(|e| InputError::new(e.to_string()))?;
            }
            if let Some(d) = j.decay_tol {
                problem = problem.with_decay_tol(d);
            }
            let s = j.s.unwrap_or(j.s_range[0]);
            if !(s >= j.s_range[0] && s < j.s_range[1]) {
                return Err(InputError::new("`s` must lie in [s_min, s_max)"));
            }
            let h = j.h.unwrap_or(DEFAULT_STEP);
            if !(h > 0.0) {
                return Err(InputError::new("stencil step `h` must be positive"));
            }
            Task::Dressing {
                problem,
                flag: match j.flag {
                    FlagSpec::Raw => KernelFlag::Raw,
                    FlagSpec::Reduced => KernelFlag::Reduced,
                },
                s,
                h,
                lame_tol: j.lame_tol.unwrap_or(DEFAULT_DRESSING_TOL),
                grid: j.grid.clone(),
            }
        }
        JobSpec::Identities(j) => {
            if j.trials == 0 {
                return Err(InputError::new("identities needs at least one trial"));
            }
            if j.dims.is_empty() || j.dims.contains(&0) {
                return Err(InputError::new("identities dims must be positive"));
            }
            Task::Identities {
                trials: j.trials,
                dims: j.dims.clone(),
            }
        }
    };
    Ok(Prepared {
        index,
        name: common.name.clone().unwrap_or_else(|| format!("job{index}")),
        kind: job.kind(),
        primary: job.verdict_names()[0],
        seed,
        tol,
        expected: common.expect.clone(),
        output: common.output.clone(),
        task,
    })
}

fn residuals<'a>(rs: impl IntoIterator<Item = &'a flatpencil::report::Residual>) -> Vec<ResidualReport> {
    rs.into_iter().map(ResidualReport::from).collect()
}

type Outcome = (BTreeMap<String, bool>, Vec<ResidualReport>, serde_json::Value);

fn verdicts<const K: usize>(pairs: [(&str, bool); K]) -> BTreeMap<String, bool> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn execute(p: &Prepared, parallel: bool) -> flatpencil::Result<Outcome> {
    match &p.task {
        Task::Pair { pair, full } => {
            let points = pair.points.len();
            if *full {
                let r = analyze(pair)?;
                let meta = json!({
                    "points": points,
                    "min_gap": r.min_gap,
                    "gap_witness": r.gap_witness.as_ref().map(|w| report::complex_list(&w.0)),
                    "skipped_lambdas": r.skipped_lambdas.iter().map(|(a, b)| [[a.re, a.im], [b.re, b.im]]).collect::<Vec<_>>(),
                });
                let v = verdicts([
                    ("almost_compatible", r.almost_compatible),
                    ("compatible", r.compatible),
                    ("flat_pencil", r.flat_pencil),
                    ("nonsingular", r.nonsingular),
                ]);
                Ok((v, residuals(&r.residuals), meta))
            } else {
                let r = check_flat_pencil(pair)?;
                let meta = json!({
                    "points": points,
                    "skipped_lambdas": r.skipped_lambdas.iter().map(|(a, b)| [[a.re, a.im], [b.re, b.im]]).collect::<Vec<_>>(),
                });
                Ok((verdicts([("flat_pencil", r.pass)]), residuals(&r.residuals), meta))
            }
        }
        Task::Lame { data, lame_tol } => {
            let e = lame_equivalence(data, *lame_tol, p.tol, parallel)?;
            let mut rs = residuals([&e.lam1, &e.lam2, &e.lam3x]);
            rs.extend(residuals(&e.flat_pencil.residuals));
            let v = verdicts([
                ("agree", e.agree()),
                ("lame_holds", e.lame_holds),
                ("flat_pencil", e.flat_pencil.pass),
            ]);
            Ok((v, rs, json!({ "points": data.points.len(), "lame_tol": lame_tol })))
        }
        Task::TwoComp { model, points } => {
            let e = two_component_equivalence(model, points, p.tol)?;
            let mut rs = residuals([&e.sys, &e.lequa]);
            rs.extend(residuals(&e.flat_pencil.residuals));
            let v = verdicts([
                ("agree", e.agree()),
                ("equations_hold", e.equations_hold),
                ("flat_pencil", e.flat_pencil.pass),
            ]);
            Ok((v, rs, json!({ "points": points.len() })))
        }
        Task::Dressing {
            problem,
            flag,
            s,
            h,
            lame_tol,
            grid,
        } => {
            let run = rotation_stencil(problem, *flag, &[*s], *h, parallel)?;
            if let Some(path) = grid {
                run.grid.save(std::path::Path::new(path))?;
            }
            let b = RotationCoeffs::from_grid(&run.grid, 0)?;
            let base = [problem.u.clone()];
            let l = lame_residuals(&b, &base)?;
            let f: Vec<ScalarField> = (0..problem.dim()).map(|i| problem.eigenvalue_fn(i).clone()).collect();
            let r = reduction_residual(&b, &f, &base)?;
            let v = verdicts([
                ("lame", l.lam1.passes(*lame_tol) && l.lam2.passes(*lame_tol)),
                ("lam3x", r.lam3x.passes(*lame_tol)),
                ("truncation_clean", run.truncation.is_none()),
            ]);
            let meta = json!({
                "n": problem.dim(),
                "m": problem.nodes().len(),
                "rule": match problem.rule {
                    QuadratureRule::Trapezoid => "trapezoid".to_string(),
                    QuadratureRule::GaussLegendre { order } => format!("gauss-legendre({order})"),
                },
                "flag": match flag { KernelFlag::Raw => "raw", KernelFlag::Reduced => "reduced" },
                "s": s,
                "step": h,
                "lame_tol": lame_tol,
                "max_condition": run.max_condition,
                "max_solve_residual": run.max_residual,
                "truncation_edge_max": run.truncation.map(|t| t.edge_max),
                "grid": grid,
                "beta": run.grid.data[..problem.dim() * problem.dim()].iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            });
            Ok((v, residuals([&l.lam1, &l.lam2, &r.lam3x]), meta))
        }
        Task::Identities { trials, dims } => {
            let run = run_identities(p.seed, *trials, dims)?;
            let v = verdicts([("identities_hold", run.holds(p.tol.max(IDENTITY_TOL)))]);
            Ok((v, residuals(&run.residuals), json!({ "trials": trials, "per_dim": run.per_dim })))
        }
    }
}

fn run_one(p: &Prepared, opts: &RunOptions) -> JobReport {
    let start = Instant::now();
    let outcome = execute(p, opts.parallel);
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let (verdicts, residuals, meta, error) = match outcome {
        Ok((v, r, m)) => (v, r, m, None),
        Err(e) => (BTreeMap::new(), Vec::new(), serde_json::Value::Null, Some(e.to_string())),
    };
    let mut r = JobReport {
        index: p.index,
        name: p.name.clone(),
        kind: p.kind.to_string(),
        tool_version: TOOL_VERSION.to_string(),
        seed: p.seed,
        tol: p.tol,
        pass: false,
        verdicts,
        expected: p.expected.clone(),
        residuals,
        meta,
        error,
        elapsed_ms: opts.timing.then_some(elapsed),
    };
    r.decide(p.primary);
    r
}

/// Validates every job, then runs them in order. `sink` sees each report as
/// soon as it is ready.
pub fn run_manifest(
    m: &Manifest,
    opts: &RunOptions,
    mut sink: impl FnMut(&JobReport) -> std::io::Result<()>,
) -> Result<Vec<JobReport>, RunError> {
    let scope = Scope::new(m.dimension, &m.bindings)?;
    let prepared = m
        .jobs
        .iter()
        .enumerate()
        .map(|(k, j)| {
            prepare(k, j, &scope, opts).map_err(|e| {
                let name = j.common().name.clone().unwrap_or_else(|| format!("job{k}"));
                InputError::new(format!("{name} ({}): {e}", j.kind()))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for p in &prepared {
        let r = run_one(p, opts);
        if let Some(path) = &p.output {
            let text = serde_json::to_string_pretty(&r).expect("reports serialize");
            std::fs::write(path, text + "\n")?;
        }
        sink(&r)?;
        out.push(r);
    }
    Ok(out)
}

#[derive(Debug)]
pub enum RunError {
    Input(InputError),
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Input(e) => write!(f, "input error: {e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<InputError> for RunError {
    fn from(e: InputError) -> Self {
        RunError::Input(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

/// The standalone identities report.
pub fn identities_report(seed: u64, trials: usize, dims: &[usize]) -> Result<JobReport, RunError> {
    if trials == 0 {
        return Err(InputError::new("--trials must be at least 1").into());
    }
    let p = Prepared {
        index: 0,
        name: "identities".into(),
        kind: "identities",
        primary: "identities_hold",
        seed,
        tol: IDENTITY_TOL,
        expected: BTreeMap::new(),
        output: None,
        task: Task::Identities {
            trials,
            dims: dims.to_vec(),
        },
    };
    Ok(run_one(
        &p,
        &RunOptions {
            timing: false,
            ..RunOptions::default()
        },
    ))
}

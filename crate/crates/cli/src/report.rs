//! Job reports. Each report is one JSON object; a run writes one per line.

use std::collections::BTreeMap;

use flatpencil::report::Residual;
use flatpencil::Complex64 as C;
use serde::Serialize;
use serde_json::Value;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ResidualReport {
    pub name: String,
    pub value: f64,
    pub raw: f64,
    /// `[re, im]` per coordinate, absent when nothing was sampled.
    pub witness: Option<Vec<[f64; 2]>>,
}

impl From<&Residual> for ResidualReport {
    fn from(r: &Residual) -> Self {
        ResidualReport {
            name: r.name.clone(),
            value: r.value,
            raw: r.raw,
            witness: r.witness.as_ref().map(|p| complex_list(&p.0)),
        }
    }
}

pub fn complex_list(z: &[C]) -> Vec<[f64; 2]> {
    z.iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct JobReport {
    pub index: usize,
    pub name: String,
    pub kind: String,
    pub tool_version: String,
    pub seed: u64,
    pub tol: f64,
    pub pass: bool,
    pub verdicts: BTreeMap<String, bool>,
    pub expected: BTreeMap<String, bool>,
    pub residuals: Vec<ResidualReport>,
    /// Kind-specific details such as point counts or quadrature settings.
    pub meta: Value,
    pub error: Option<String>,
    /// Wall-clock time; the only field that varies between identical runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
}

impl JobReport {
    /// Decides `pass` from the asserted verdicts, or from `primary` when
    /// nothing is asserted. Errors always fail.
    pub fn decide(&mut self, primary: &str) {
        self.pass = self.error.is_none()
            && if self.expected.is_empty() {
                self.verdicts.get(primary).copied().unwrap_or(false)
            } else {
                self.expected.iter().all(|(k, v)| self.verdicts.get(k) == Some(v))
            };
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }
}

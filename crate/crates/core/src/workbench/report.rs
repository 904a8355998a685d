//! Machine-readable verification reports.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::equivalence::EquivalenceCertificate;

pub const TOOL: &str = "covdil";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One asserted relation with its residual. `passed` is `residual ≤ threshold`
/// (so a NaN residual fails).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Clause {
    pub name: String,
    /// Construction and relation the clause belongs to.
    pub anchor: String,
    pub residual: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema: u32,
    pub command: String,
    /// The scenario as run (after overrides); an array for `compare`.
    pub scenario: Value,
    pub dimensions: BTreeMap<String, usize>,
    pub clauses: Vec<Clause>,
    /// Reported quantities without a claimed bound.
    pub diagnostics: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, EquivalenceCertificate>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
    pub passed: bool,
}

impl Report {
    pub fn new(command: &str, scenario: Value) -> Self {
        Report {
            tool: TOOL,
            version: VERSION,
            schema: super::scenario::SCHEMA_VERSION,
            command: command.to_string(),
            scenario,
            dimensions: BTreeMap::new(),
            clauses: Vec::new(),
            diagnostics: BTreeMap::new(),
            verdicts: BTreeMap::new(),
            notes: Vec::new(),
            timing_ms: None,
            passed: true,
        }
    }

    pub fn clause(&mut self, name: impl Into<String>, anchor: &str, residual: f64, threshold: f64) {
        let passed = residual <= threshold;
        self.passed &= passed;
        self.clauses.push(Clause {
            name: name.into(),
            anchor: anchor.to_string(),
            residual,
            threshold,
            passed,
        });
    }

    pub fn dimension(&mut self, name: impl Into<String>, dim: usize) {
        self.dimensions.insert(name.into(), dim);
    }

    pub fn diagnostic(&mut self, name: impl Into<String>, value: f64) {
        self.diagnostics.insert(name.into(), value);
    }

    pub fn note(&mut self, text: &str) {
        if !self.notes.iter().any(|n| n == text) {
            self.notes.push(text.to_string());
        }
    }

    pub fn find(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| !c.passed)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// `0` when every clause holds, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

//! Machine-readable verification reports: named checks with residuals and
//! tolerances, grouped in per-module sections, deterministic ordering.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Stable identifier of the identity the check exercises.
    pub anchor: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

impl Check {
    pub fn new(name: &str, anchor: &str, max_error: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            anchor: anchor.to_string(),
            max_error,
            tolerance,
            pass: max_error.is_finite() && max_error <= tolerance,
            elapsed_ms: None,
        }
    }

    /// A check that records a boolean outcome rather than a residual.
    pub fn flag(name: &str, anchor: &str, ok: bool) -> Self {
        Self {
            name: name.to_string(),
            anchor: anchor.to_string(),
            max_error: if ok { 0.0 } else { 1.0 },
            tolerance: 0.5,
            pass: ok,
            elapsed_ms: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub config: serde_json::Value,
    pub sections: BTreeMap<String, Vec<Check>>,
    pub overall_pass: bool,
}

impl Report {
    pub fn new(config: serde_json::Value) -> Self {
        Self {
            schema: 1,
            config,
            sections: BTreeMap::new(),
            overall_pass: true,
        }
    }

    pub fn add(&mut self, section: &str, check: Check) {
        self.overall_pass &= check.pass;
        self.sections
            .entry(section.to_string())
            .or_default()
            .push(check);
    }

    pub fn add_all(&mut self, section: &str, checks: Vec<Check>) {
        for c in checks {
            self.add(section, c);
        }
    }

    /// Deterministic output: checks sorted by name inside each section.
    pub fn finalize(&mut self) {
        for checks in self.sections.values_mut() {
            checks.sort_by(|a, b| a.name.cmp(&b.name));
        }
        self.overall_pass = self
            .sections
            .values()
            .flatten()
            .all(|c| c.pass);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Strips timing fields (used when bit-identical output is required).
    pub fn strip_timings(&mut self) {
        for checks in self.sections.values_mut() {
            for c in checks {
                c.elapsed_ms = None;
            }
        }
    }
}

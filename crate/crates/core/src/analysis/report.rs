use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Outcome of one check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The check ran but had nothing to measure.
    Inconclusive,
    /// The property's hypotheses do not hold for this input.
    NotApplicable,
}

impl Status {
    pub fn from_bool(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Inconclusive => "inconclusive",
            Status::NotApplicable => "n/a",
        }
    }
}

/// One verified property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub id: String,
    /// The statement being checked, quoted from its source.
    pub anchor: String,
    /// Measured violation (or statistic) in the units of `threshold`.
    pub measured: f64,
    pub threshold: f64,
    pub status: Status,
    /// Where the worst case occurred and any auxiliary numbers.
    pub detail: String,
    /// Inputs that produced the entry.
    pub config: serde_json::Value,
}

impl ReportEntry {
    pub fn new(id: &str, anchor: &str, measured: f64, threshold: f64, status: Status) -> Self {
        Self {
            id: id.to_string(),
            anchor: anchor.to_string(),
            measured,
            threshold,
            status,
            detail: String::new(),
            config: serde_json::Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn with_config(mut self, config: serde_json::Value) -> Self {
        self.config = config;
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Ordered list of checks. The report passes when no entry failed or was
/// inconclusive; not-applicable entries are neutral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct VerificationReport {
    pub entries: Vec<ReportEntry>,
    pub overall_pass: bool,
}

impl VerificationReport {
    pub fn new(entries: Vec<ReportEntry>) -> Self {
        let overall_pass = entries
            .iter()
            .all(|e| matches!(e.status, Status::Pass | Status::NotApplicable));
        Self {
            entries,
            overall_pass,
        }
    }

    pub fn push(&mut self, entry: ReportEntry) {
        self.entries.push(entry);
        *self = Self::new(std::mem::take(&mut self.entries));
    }

    pub fn get(&self, id: &str) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let w_id = self.entries.iter().map(|e| e.id.len()).max().unwrap_or(2).max(8);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<w_id$}  {:<12}  {:>12}  {:>12}  detail",
            "property", "status", "measured", "threshold"
        );
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{:<w_id$}  {:<12}  {:>12.4e}  {:>12.4e}  {}",
                e.id,
                e.status.label(),
                e.measured,
                e.threshold,
                e.detail
            );
        }
        let _ = writeln!(
            out,
            "overall: {}",
            if self.overall_pass { "pass" } else { "FAIL" }
        );
        out
    }
}

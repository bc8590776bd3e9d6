//! Machine-readable check records and suite reports.

use serde::{Deserialize, Serialize};

/// One named check: pass iff the (finite) violation is within tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub pass: bool,
    pub max_violation: f64,
    pub tolerance: f64,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, max_violation: f64, tolerance: f64, samples: usize) -> Self {
        Self {
            name: name.into(),
            pass: max_violation.is_finite() && max_violation <= tolerance,
            max_violation,
            tolerance,
            samples,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Renames the record, keeping its outcome.
    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Running maximum of absolute deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MaxDeviation {
    pub value: f64,
    pub samples: usize,
}

impl MaxDeviation {
    pub fn push(&mut self, deviation: f64) {
        let d = deviation.abs();
        // NaN poisons the record instead of being silently dropped.
        if d.is_nan() || d > self.value {
            self.value = d;
        }
        self.samples += 1;
    }

    pub fn push_diff(&mut self, a: f64, b: f64) {
        self.push(a - b);
    }

    pub fn record(&self, name: impl Into<String>, tolerance: f64) -> CheckRecord {
        CheckRecord::new(name, self.value, tolerance, self.samples)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub seed: u64,
    pub version: String,
    pub checks: Vec<CheckRecord>,
    /// Free-form structured payload (spectral resolutions, reconstruction results, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<serde_json::Value>,
    /// Wall-clock time; the only field allowed to differ between identical runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<u64>,
}

impl Report {
    pub fn new(suite: impl Into<String>, seed: u64) -> Self {
        Self {
            suite: suite.into(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            checks: Vec::new(),
            payload: None,
            timing_ms: None,
        }
    }

    pub fn push(&mut self, record: CheckRecord) {
        self.checks.push(record);
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = CheckRecord>) {
        self.checks.extend(records);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Concatenates the checks of several reports, prefixing names with their suite.
    pub fn merge(reports: &[Report]) -> Report {
        let suite = reports.iter().map(|r| r.suite.as_str()).collect::<Vec<_>>().join("+");
        let seed = reports.first().map(|r| r.seed).unwrap_or(0);
        let mut merged = Report::new(suite, seed);
        for r in reports {
            for c in &r.checks {
                merged.push(c.clone().named(format!("{}/{}", r.suite, c.name)));
            }
        }
        merged.timing_ms = reports.iter().map(|r| r.timing_ms).sum();
        merged
    }
}

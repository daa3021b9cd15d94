//! Check records and report aggregation shared by the pipeline, the CLI
//! and the bindings.

use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Value>,
    /// Populated only when timings are requested, so the default JSON
    /// report is byte-identical across runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u128>,
}

#[derive(Clone, Serialize)]
pub struct Report {
    pub format_version: u32,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<u32>,
    pub records: Vec<CheckRecord>,
    pub skipped_stages: Vec<String>,
    pub summary: String,
}

impl Report {
    pub fn new(mode: &str, q: Option<u32>) -> Self {
        Report {
            format_version: 1,
            mode: mode.into(),
            q,
            records: Vec::new(),
            skipped_stages: Vec::new(),
            summary: "pass".into(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn finalize(&mut self) {
        self.summary = if self.all_pass() { "pass" } else { "fail" }.into();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    /// Human-readable rendering, one line per record.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let status = if r.pass { "PASS" } else { "FAIL" };
            let elapsed = r
                .elapsed_ms
                .map(|ms| format!(" ({ms} ms)"))
                .unwrap_or_default();
            out.push_str(&format!("[{status}] {}{elapsed}\n", r.check));
            if let Some(w) = &r.witness {
                out.push_str(&format!("       witness: {w}\n"));
            }
        }
        for s in &self.skipped_stages {
            out.push_str(&format!("[SKIP] stage {s}\n"));
        }
        out.push_str(&format!("summary: {}\n", self.summary));
        out
    }
}

/// Collects records for one stage, timing each check.
pub struct StageLog {
    pub records: Vec<CheckRecord>,
    timings: bool,
}

impl StageLog {
    pub fn new(timings: bool) -> Self {
        StageLog {
            records: Vec::new(),
            timings,
        }
    }

    pub fn run<F>(&mut self, check: &str, f: F) -> bool
    where
        F: FnOnce() -> (bool, Option<Value>, Option<Value>),
    {
        let start = Instant::now();
        let (pass, witness, values) = f();
        let elapsed = start.elapsed().as_millis();
        self.records.push(CheckRecord {
            check: check.into(),
            pass,
            witness,
            values,
            elapsed_ms: self.timings.then_some(elapsed),
        });
        pass
    }

    /// Records a check that yields a value on success and a witness string
    /// on failure.
    pub fn run_result<T, F>(&mut self, check: &str, f: F) -> Option<T>
    where
        F: FnOnce() -> Result<(T, Option<Value>), String>,
    {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed().as_millis();
        match outcome {
            Ok((value, values)) => {
                self.records.push(CheckRecord {
                    check: check.into(),
                    pass: true,
                    witness: None,
                    values,
                    elapsed_ms: self.timings.then_some(elapsed),
                });
                Some(value)
            }
            Err(witness) => {
                self.records.push(CheckRecord {
                    check: check.into(),
                    pass: false,
                    witness: Some(Value::String(witness)),
                    values: None,
                    elapsed_ms: self.timings.then_some(elapsed),
                });
                None
            }
        }
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }
}

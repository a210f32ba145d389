//! Run reports: a deterministic `report.json`, CSV tables, and a separate
//! `timings.json` so the report itself is byte-stable across runs.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::table::Table;

/// One cross-check result. `margin` is `measured / threshold`; a check passes
/// when it is at most 1.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub margin: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, threshold: f64, detail: impl Into<String>) -> Self {
        let margin = if threshold > 0.0 {
            measured / threshold
        } else if measured == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        Self {
            name: name.into(),
            passed: measured <= threshold,
            measured,
            threshold,
            margin,
            detail: detail.into(),
        }
    }

    pub fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: true,
            measured: 0.0,
            threshold: 0.0,
            margin: 0.0,
            detail: format!("skipped: {}", reason.into()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TableEntry {
    pub file: String,
    pub provenance: String,
    pub columns: Vec<String>,
    pub n_rows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config_hash: String,
    pub inputs: Value,
    pub results: Map<String, Value>,
    pub tables: Vec<TableEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    #[serde(skip)]
    files: Vec<(String, String)>,
    #[serde(skip)]
    timings: Vec<(String, f64)>,
    #[serde(skip)]
    clock: Option<(String, Instant)>,
}

impl RunReport {
    pub fn new(command: &str, config_hash: &str, inputs: Value) -> Self {
        Self {
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            inputs,
            results: Map::new(),
            tables: Vec::new(),
            checks: Vec::new(),
            files: Vec::new(),
            timings: Vec::new(),
            clock: None,
        }
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("results serialize");
        self.results.insert(key.to_string(), v);
    }

    pub fn table(&mut self, file: &str, table: &Table) {
        self.tables.push(TableEntry {
            file: file.to_string(),
            provenance: table.provenance.clone(),
            columns: table.columns.clone(),
            n_rows: table.rows.len(),
        });
        self.files.push((file.to_string(), table.to_csv()));
    }

    pub fn json_file(&mut self, file: &str, value: impl Serialize) {
        let text = serde_json::to_string_pretty(&value).expect("outputs serialize");
        self.files.push((file.to_string(), text + "\n"));
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Starts timing a phase; the previous phase, if any, is closed.
    pub fn phase(&mut self, name: &str) {
        self.end_phase();
        self.clock = Some((name.to_string(), Instant::now()));
    }

    pub fn end_phase(&mut self) {
        if let Some((name, start)) = self.clock.take() {
            self.timings.push((name, start.elapsed().as_secs_f64()));
        }
    }

    pub fn files(&self) -> &[(String, String)] {
        &self.files
    }

    pub fn timings(&self) -> &[(String, f64)] {
        &self.timings
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Writes `report.json`, `timings.json` and every attached file into `dir`.
    pub fn write(&mut self, dir: &Path) -> std::io::Result<()> {
        self.end_phase();
        std::fs::create_dir_all(dir)?;
        for (name, content) in &self.files {
            std::fs::write(dir.join(name), content)?;
        }
        std::fs::write(dir.join("report.json"), self.to_json())?;
        let timings: Map<String, Value> = self
            .timings
            .iter()
            .map(|(k, v)| (k.clone(), Value::from(*v)))
            .collect();
        std::fs::write(
            dir.join("timings.json"),
            serde_json::to_string_pretty(&timings).expect("timings serialize") + "\n",
        )
    }

    /// Human-readable lines, one per check.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{} {:<28} measured={:.3e} threshold={:.3e} {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.threshold,
                c.detail
            ));
        }
        out
    }
}

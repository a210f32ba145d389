//! Plot-ready numeric tables with a provenance line, written as CSV.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

/// Formats with 17 significant digits so values round-trip bit-exactly.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        // normalize -0.0
        return "0.0000000000000000e0".to_string();
    }
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// e.g. `closed-form`, `ODE (RK4, n_steps=2048)`, `MC±stderr (n_paths=100000)`.
    pub provenance: String,
    /// Column names including units, e.g. `t [years]`.
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(provenance: impl Into<String>, columns: Vec<String>) -> Self {
        Self {
            provenance: provenance.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    /// A `# provenance: ...` line, the column header row, then data rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# provenance: {}", self.provenance);
        let header: Vec<String> = self.columns.iter().map(|c| quote(c)).collect();
        let _ = writeln!(out, "{}", header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

fn quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

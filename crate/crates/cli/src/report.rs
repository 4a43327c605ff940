//! Deterministic text reports: key-value lines plus named checks. The
//! first failing check names the run's exit reason.

use std::io::Write;
use std::path::Path;

use sparsegrad_core::Result;

#[derive(Default)]
pub struct Report {
    lines: Vec<String>,
    checks: Vec<(String, bool)>,
}

impl Report {
    pub fn new(scenario: &str, verifies: &str) -> Report {
        let mut r = Report::default();
        r.lines.push("sparsegrad run report".into());
        r.kv("scenario", scenario);
        r.kv("verifies", verifies);
        r
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{key}: {value}"));
    }

    pub fn section(&mut self, name: &str) {
        self.lines.push(String::new());
        self.lines.push(format!("[{name}]"));
    }

    pub fn note(&mut self, text: impl std::fmt::Display) {
        self.lines.push(text.to_string());
    }

    pub fn check(&mut self, name: &str, ok: bool, detail: impl std::fmt::Display) {
        self.lines
            .push(format!("check {name}: {} ({detail})", if ok { "ok" } else { "FAILED" }));
        self.checks.push((name.to_string(), ok));
    }

    pub fn first_failure(&self) -> Option<String> {
        self.checks
            .iter()
            .find(|(_, ok)| !ok)
            .map(|(name, _)| name.clone())
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for line in &self.lines {
            writeln!(out, "{line}")?;
        }
        writeln!(out)?;
        writeln!(
            out,
            "result: {}",
            if self.all_pass() { "PASS" } else { "FAIL" }
        )?;
        Ok(())
    }
}

/// Write a simple CSV table.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    Ok(())
}

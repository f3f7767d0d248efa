//! CSV tables and the flat `key = value` manifest.

use crate::config::RunConfig;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    pub fn to_csv(&self) -> io::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        String::from_utf8(bytes).map_err(io::Error::other)
    }
}

/// Result of one command: tables, summary entries and the failed checks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub summary: Vec<(String, String)>,
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn note<V: ToString>(&mut self, key: &str, value: V) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub fn check(&mut self, ok: bool, what: String) {
        if !ok {
            self.failures.push(what);
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn manifest(&self, cfg: &RunConfig) -> String {
        let mut head = vec![("command".to_string(), cfg.command.name().to_string())];
        head.extend(cfg.entries().map(|(k, v)| (format!("config.{k}"), v.to_string())));
        self.manifest_with(&head)
    }

    /// Manifest with caller-supplied leading entries.
    pub fn manifest_with(&self, head: &[(String, String)]) -> String {
        let mut s = String::new();
        s.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
        for (k, v) in head {
            s.push_str(&format!("{k} = {v}\n"));
        }
        for (k, v) in &self.summary {
            s.push_str(&format!("{k} = {v}\n"));
        }
        for t in &self.tables {
            s.push_str(&format!("output.{} = {}.csv\n", t.name, t.name));
        }
        s.push_str(&format!("status = {}\n", if self.passed() { "pass" } else { "fail" }));
        s.push_str(&format!("failures = {}\n", self.failures.join("; ")));
        s
    }

    /// Writes every table and `manifest.txt` into `dir`, creating it if needed.
    pub fn write(&self, cfg: &RunConfig, dir: &Path) -> io::Result<Vec<PathBuf>> {
        self.write_with(&self.manifest(cfg), dir)
    }

    pub fn write_with(&self, manifest: &str, dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for t in &self.tables {
            let p = dir.join(format!("{}.csv", t.name));
            fs::write(&p, t.to_csv()?)?;
            out.push(p);
        }
        let m = dir.join("manifest.txt");
        fs::write(&m, manifest)?;
        out.push(m);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_fields() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(["x,y".to_string(), "say \"hi\"".to_string()]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n\"x,y\",\"say \"\"hi\"\"\"\n");
    }
}

//! Tabular text output and content hashing.

use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Lower-case hex SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Comma-separated table with a `#` comment header.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            meta: Vec::new(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn push_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.push((key.into(), value.to_string()));
    }

    /// Append a numeric row. Values print in shortest round-trip form.
    pub fn push(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|v| format_num(*v)).collect());
    }

    pub fn push_text(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display(), e))?;
            }
        }
        std::fs::write(path, self.render()).map_err(|e| Error::io(path.display(), e))
    }
}

pub fn format_num(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-3 && v.abs() < 1e6) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Parse a comma-separated numeric table, skipping `#` comments and the
/// header line. Errors carry the 1-based data row number.
pub fn parse_numeric_rows(text: &str, columns: usize) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if header.is_none() {
            header = Some(t.split(',').map(|s| s.trim().to_string()).collect());
            continue;
        }
        let row = rows.len() + 1;
        let vals: Vec<f64> = t
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| Error::Parse {
                    row,
                    msg: format!("cannot parse `{}` as a number", s.trim()),
                })
            })
            .collect::<Result<_>>()?;
        if vals.len() != columns {
            return Err(Error::Parse {
                row,
                msg: format!("expected {columns} fields, found {}", vals.len()),
            });
        }
        rows.push(vals);
    }
    let header = header.ok_or(Error::Parse {
        row: 0,
        msg: "missing header line".into(),
    })?;
    Ok((header, rows))
}

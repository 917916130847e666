//! CSV tables with a leading `#` comment block.

use sha2::{Digest, Sha256};
use std::io::{self, Write};

/// SHA-256 of the canonical TOML of a config.
pub fn config_hash(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Shortest round-trip representation, in exponent form outside
/// `[1e-4, 1e15)`; empty for NaN.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x.is_nan() {
        String::new()
    } else if a == 0.0 || (1e-4..1e15).contains(&a) || a.is_infinite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            ..Self::default()
        }
    }

    pub fn write_csv(&self, w: &mut dyn Write) -> io::Result<()> {
        for c in &self.comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "{}", self.header.join(","))?;
        for r in &self.rows {
            debug_assert_eq!(r.len(), self.header.len());
            writeln!(w, "{}", r.join(","))?;
        }
        Ok(())
    }

    /// Index of a header column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Result of a command: a table or a text report.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Csv(Table),
    Text(String),
}

impl Output {
    pub fn write(&self, w: &mut dyn Write) -> io::Result<()> {
        match self {
            Output::Csv(t) => t.write_csv(w),
            Output::Text(s) => w.write_all(s.as_bytes()),
        }
    }
}

/// Numbered column names `prefix1..prefixn`.
pub fn cols(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

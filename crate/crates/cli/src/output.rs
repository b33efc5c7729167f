//! CSV output helpers. Floats use Rust's shortest round-trip formatting,
//! so identical values always serialize to identical bytes.

use std::path::Path;

use anyhow::{Context, Result};

pub fn format_float(v: f64) -> String {
    format!("{v}")
}

/// Writes a header plus rows with a trailing newline.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::with_capacity(header.len() + rows.iter().map(|r| r.len() + 1).sum::<usize>() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

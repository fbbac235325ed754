use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;

use crate::config::RunConfig;
use crate::Usage;

/// Write `bytes` to `path` via a temporary file in the same directory, or to
/// stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes)?;
        return Ok(out.flush()?);
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let unwritable = |e: std::io::Error| Usage(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(unwritable)?;
    tmp.write_all(bytes).map_err(unwritable)?;
    tmp.persist(path).map_err(|e| unwritable(e.error))?;
    Ok(())
}

pub fn json<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut text = serde_json::to_vec_pretty(value).context("serializing report")?;
    text.push(b'\n');
    Ok(text)
}

/// CSV text with a `#` header carrying the run configuration.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(command: &str, cfg: &RunConfig, columns: &[&str]) -> anyhow::Result<Self> {
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        let mut text = format!("# generated_unix {stamp}\n");
        text.push_str(&format!(
            "# polyshoot {} {command}\n",
            env!("CARGO_PKG_VERSION")
        ));
        text.push_str(&format!("# config {}\n", serde_json::to_string(cfg)?));
        text.push_str(&columns.join(","));
        text.push('\n');
        Ok(Csv { text })
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn comment(&mut self, line: &str) {
        self.text.push_str("# ");
        self.text.push_str(line);
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Shortest round-trip decimal, in exponent form for magnitudes outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

/// Empty string for missing values.
pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

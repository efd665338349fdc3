//! Report assembly: canonical JSON (sorted keys, stable formatting),
//! table-style p-value display, and the shared envelope with resolved
//! config.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};

/// A report section that failed; the rest of the report still ships.
#[derive(Debug, Clone, Serialize)]
pub struct SectionError {
    pub section: String,
    pub message: String,
}

#[derive(Debug)]
pub struct Report {
    pub command: String,
    pub config: Value,
    pub results: Map<String, Value>,
    pub errors: Vec<SectionError>,
}

impl Report {
    pub fn new(command: &str, config: Value) -> Self {
        Self {
            command: command.to_string(),
            config,
            results: Map::new(),
            errors: Vec::new(),
        }
    }

    pub fn insert<T: Serialize>(&mut self, key: &str, value: T) {
        self.results.insert(key.to_string(), to_value(value));
    }

    /// Run a section, storing either its value or its error.
    pub fn section<T: Serialize>(
        &mut self,
        key: &str,
        result: std::result::Result<T, impl std::fmt::Display>,
    ) {
        match result {
            Ok(v) => self.insert(key, v),
            Err(e) => self.errors.push(SectionError {
                section: key.to_string(),
                message: e.to_string(),
            }),
        }
    }

    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }

    fn to_json(&self) -> Value {
        json!({
            "command": self.command,
            "toolkit_version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "results": Value::Object(self.results.clone()),
            "errors": self.errors.iter().map(|e| json!({
                "section": e.section,
                "message": e.message,
            })).collect::<Vec<_>>(),
        })
    }

    /// Write `<out>/<name>.json` with sorted keys, returning the path.
    pub fn write(&self, out: &Path, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(out)
            .with_context(|| format!("creating output directory {}", out.display()))?;
        let path = out.join(format!("{name}.json"));
        let mut text = serde_json::to_string_pretty(&self.to_json())?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// serde_json value with non-finite floats mapped to null (undefined).
pub fn to_value<T: Serialize>(value: T) -> Value {
    serde_json::to_value(value).unwrap_or(Value::Null)
}

/// Raw p-value plus the display string used in tables: below 0.001 the
/// string reads "P<0.001", otherwise "P=0.xxx".
pub fn p_value_json(p: f64) -> Value {
    json!({ "p": p, "display": p_display(p) })
}

pub fn p_display(p: f64) -> String {
    if p < 0.001 {
        "P<0.001".to_string()
    } else {
        format!("P={p:.3}")
    }
}

pub fn ci_json(point: f64, lo: f64, hi: f64) -> Value {
    json!({ "point": point, "lo": lo, "hi": hi })
}

/// Write a tidy CSV of rows into `<out>/<name>.csv`.
pub fn write_csv(out: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    let path = out.join(format!("{name}.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

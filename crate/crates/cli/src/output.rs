//! Artifact writing: CSV tables with 17 significant digits and a JSON
//! sidecar per file. Nothing time- or schedule-dependent is recorded, so
//! reruns are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use daylight_core::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    U(usize),
    B(bool),
}

impl Cell {
    fn render(self) -> String {
        match self {
            // {:.16e} keeps 17 significant digits, enough to round-trip f64
            Cell::F(x) if x.is_finite() => format!("{x:.16e}"),
            Cell::F(x) if x.is_nan() => "nan".into(),
            Cell::F(x) => if x > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::I(i) => i.to_string(),
            Cell::U(u) => u.to_string(),
            Cell::B(b) => b.to_string(),
        }
    }
}

/// Fields repeated in every sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config_hash: String,
    pub seed: u64,
}

pub struct Output {
    dir: PathBuf,
    meta: RunMeta,
    written: std::cell::RefCell<Vec<String>>,
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

impl Output {
    pub fn create(dir: &Path, meta: RunMeta) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), meta, written: Default::default() })
    }

    fn sidecar(&self, file: &str, extra: Value) -> Result<()> {
        let mut v = json!({ "file": file, "run": self.meta });
        if let (Value::Object(base), Value::Object(more)) = (&mut v, extra) {
            base.extend(more);
        }
        self.write_text(&format!("{file}.json"), &(serde_json::to_string_pretty(&v).map_err(io)? + "\n"))
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| io(format!("{}: {e}", path.display())))?;
        self.written.borrow_mut().push(name.to_string());
        Ok(())
    }

    /// CSV table plus `<name>.json` describing columns, grids and provenance.
    pub fn table<I>(&self, name: &str, columns: &[&str], rows: I, extra: Value) -> Result<()>
    where
        I: IntoIterator<Item = Vec<Cell>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(columns).map_err(io)?;
        for row in rows {
            if row.len() != columns.len() {
                return Err(Error::Consistency(format!(
                    "{name}: row has {} cells for {} columns",
                    row.len(),
                    columns.len()
                )));
            }
            w.write_record(row.into_iter().map(Cell::render)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(io)?;
        self.write_text(name, &String::from_utf8(bytes).map_err(io)?)?;
        let mut side = json!({ "columns": columns });
        if let (Value::Object(base), Value::Object(more)) = (&mut side, extra) {
            base.extend(more);
        }
        self.sidecar(name, side)
    }

    /// JSON report plus its own sidecar.
    pub fn report<T: Serialize>(&self, name: &str, value: &T, extra: Value) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(io)? + "\n";
        self.write_text(name, &text)?;
        self.sidecar(name, extra)
    }

    /// status.json: complete flag, produced files and the error if any.
    pub fn finish(&self, error: Option<&str>) -> Result<()> {
        let files = self.written.borrow().clone();
        let v = json!({ "run": self.meta, "complete": error.is_none(), "error": error, "files": files });
        let path = self.dir.join("status.json");
        fs::write(&path, serde_json::to_string_pretty(&v).map_err(io)? + "\n").map_err(io)
    }
}

//! Deterministic file emission: CSV tables with versioned schema sidecars,
//! pretty JSON, and a sorted manifest of everything written.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub description: String,
}

pub fn col(name: impl Into<String>, kind: &'static str, description: impl Into<String>) -> Column {
    Column { name: name.into(), kind, description: description.into() }
}

#[derive(Debug, Clone)]
pub struct TableSchema {
    pub table: &'static str,
    pub columns: Vec<Column>,
    pub notes: Option<String>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    table: &'a str,
    schema_version: u32,
    file: &'a str,
    columns: &'a [Column],
    #[serde(skip_serializing_if = "Option::is_none")]
    notes: Option<&'a str>,
}

/// Shortest round-trip decimal; empty for non-finite values.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Keeps file names portable.
pub fn file_stem(entity: &str) -> String {
    entity
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// Writes into one output directory and remembers what it wrote.
pub struct Writer {
    root: PathBuf,
    written: BTreeSet<String>,
}

impl Writer {
    pub fn new(root: &Path) -> Result<Self, String> {
        std::fs::create_dir_all(root).map_err(|e| format!("cannot create {}: {e}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), written: BTreeSet::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> Vec<String> {
        self.written.iter().cloned().collect()
    }

    pub fn text(&mut self, rel: &str, contents: &str) -> Result<(), String> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| format!("cannot create {}: {e}", parent.display()))?;
        }
        std::fs::write(&path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        self.written.insert(rel.to_string());
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> Result<(), String> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| format!("cannot serialize {rel}: {e}"))?;
        s.push('\n');
        self.text(rel, &s)
    }

    /// Writes `rel` (a .csv path) and its `.schema.json` sidecar.
    pub fn table(&mut self, rel: &str, schema: &TableSchema, rows: &[Vec<String>]) -> Result<(), String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let header: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
        w.write_record(&header).map_err(|e| e.to_string())?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(row).map_err(|e| e.to_string())?;
        }
        let bytes = w.into_inner().map_err(|e| e.to_string())?;
        self.text(rel, &String::from_utf8(bytes).map_err(|e| e.to_string())?)?;
        let file = Path::new(rel).file_name().and_then(|f| f.to_str()).unwrap_or(rel);
        let sidecar = Sidecar {
            table: schema.table,
            schema_version: SCHEMA_VERSION,
            file,
            columns: &schema.columns,
            notes: schema.notes.as_deref(),
        };
        self.json(&rel.replace(".csv", ".schema.json"), &sidecar)
    }
}

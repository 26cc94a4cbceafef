use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use occam_core::numerics::format_sig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Result;

pub const SIG_DIGITS: usize = 12;

/// Rounds to the printed precision so JSON and CSV carry the same value.
pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        format_sig(x, SIG_DIGITS).parse().expect("formatted float parses")
    } else {
        x
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn float(x: f64) -> Self {
        if x.is_finite() {
            Cell::Float(round_sig(x))
        } else {
            Cell::Text(format_sig(x, SIG_DIGITS))
        }
    }

    pub fn opt(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::float)
    }

    pub fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format_sig(*x, SIG_DIGITS),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u8> for Cell {
    fn from(v: u8) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub artifact_version: String,
    pub config: Value,
    /// Each table is also written as `<name>.csv`.
    pub tables: BTreeMap<String, Table>,
    pub aggregates: BTreeMap<String, f64>,
    pub wall_clock_secs: f64,
}

impl Report {
    pub fn aggregate(&self, key: &str) -> Option<f64> {
        self.aggregates.get(key).copied()
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.get(name)
    }

    /// Writes `report.json` and one CSV per table; returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let json = dir.join("report.json");
        fs::write(&json, serde_json::to_vec_pretty(self)?)?;
        written.push(json);
        for (name, table) in &self.tables {
            let path = dir.join(format!("{name}.csv"));
            fs::write(&path, table.to_csv()?)?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

/// Collects aggregates, rounding and dropping non-finite values.
#[derive(Default)]
pub struct Aggregates(BTreeMap<String, f64>);

impl Aggregates {
    pub fn set(&mut self, key: impl Into<String>, value: f64) {
        if value.is_finite() {
            self.0.insert(key.into(), round_sig(value));
        }
    }

    pub fn into_inner(self) -> BTreeMap<String, f64> {
        self.0
    }
}

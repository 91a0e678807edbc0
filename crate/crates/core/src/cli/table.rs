//! Deterministic result tables.
//!
//! Every command emits its numbers through [`ResultTable`], which renders
//! to CSV or JSON with a fixed layout: metadata as sorted `# key = value`
//! comment lines, then a header, then one row per record. Floats are
//! printed with 17 significant digits, so a written table parses back to
//! bit-identical values, and nothing time- or host-dependent is ever
//! included: the same configuration produces the same bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// On-disk table format.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// A named table of float columns with optional row labels and string
/// metadata. The name doubles as the output file stem.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    name: String,
    label_header: Option<String>,
    labels: Vec<String>,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    metadata: BTreeMap<String, String>,
}

fn check_field(s: &str) {
    assert!(
        !s.contains(',') && !s.contains('\n') && !s.is_empty(),
        "table field {s:?} must be non-empty and free of commas and newlines"
    );
}

impl ResultTable {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        let name = name.into();
        check_field(&name);
        for c in columns {
            check_field(c);
        }
        ResultTable {
            name,
            label_header: None,
            labels: Vec::new(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    /// A table whose first column holds row labels instead of numbers.
    pub fn with_labels(name: impl Into<String>, label_header: &str, columns: &[&str]) -> Self {
        check_field(label_header);
        let mut t = ResultTable::new(name, columns);
        t.label_header = Some(label_header.to_string());
        t
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        assert!(self.label_header.is_none(), "labeled table needs a label per row");
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn push_labeled_row(&mut self, label: impl Into<String>, row: Vec<f64>) {
        assert!(self.label_header.is_some(), "unlabeled table takes plain rows");
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        let label = label.into();
        check_field(&label);
        self.labels.push(label);
        self.rows.push(row);
    }

    /// `table` is reserved; it carries the name in the rendered form.
    pub fn insert_metadata(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let key = key.into();
        check_field(&key);
        assert_ne!(key, "table", "metadata key 'table' is reserved for the name");
        self.metadata.insert(key, value.into());
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    /// Values of the named column, if present.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# table = {}", self.name);
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k} = {v}");
        }
        let mut header: Vec<&str> = Vec::new();
        if let Some(h) = &self.label_header {
            header.push(h);
        }
        header.extend(self.columns.iter().map(String::as_str));
        let _ = writeln!(out, "{}", header.join(","));
        for (i, row) in self.rows.iter().enumerate() {
            let mut fields: Vec<String> = Vec::with_capacity(header.len());
            if self.label_header.is_some() {
                fields.push(self.labels[i].clone());
            }
            fields.extend(row.iter().map(|v| format!("{v:.16e}")));
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    /// JSON object with the same content. Row values are kept as the CSV
    /// float strings so non-finite entries survive and parsing is lossless.
    pub fn to_json(&self) -> String {
        use serde_json::{json, Map, Value};
        let mut obj = Map::new();
        obj.insert("table".into(), json!(self.name));
        obj.insert("metadata".into(), json!(self.metadata));
        if let Some(h) = &self.label_header {
            obj.insert("label_header".into(), json!(h));
            obj.insert("labels".into(), json!(self.labels));
        }
        obj.insert("columns".into(), json!(self.columns));
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|v| format!("{v:.16e}")).collect())
            .collect();
        obj.insert("rows".into(), json!(rows));
        let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("obj serializes");
        s.push('\n');
        s
    }

    /// Inverse of [`to_csv`]. The first column is read as labels when any
    /// of its fields fails to parse as a float.
    pub fn parse_csv(text: &str) -> Result<ResultTable> {
        let mut name = None;
        let mut metadata = BTreeMap::new();
        let mut header: Option<Vec<String>> = None;
        let mut records: Vec<Vec<String>> = Vec::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest
                    .split_once(" = ")
                    .ok_or_else(|| Error::Config(format!("malformed metadata line: {line}")))?;
                if k == "table" {
                    name = Some(v.to_string());
                } else {
                    metadata.insert(k.to_string(), v.to_string());
                }
            } else if header.is_none() {
                header = Some(line.split(',').map(str::to_string).collect());
            } else if !line.is_empty() {
                records.push(line.split(',').map(str::to_string).collect());
            }
        }
        let name = name.ok_or_else(|| Error::Config("missing '# table = ...' line".into()))?;
        let header = header.ok_or_else(|| Error::Config("missing table header".into()))?;
        let labeled = records
            .iter()
            .any(|r| r.first().is_some_and(|f| f.parse::<f64>().is_err()));
        let (label_header, columns) = if labeled {
            (Some(header[0].clone()), header[1..].to_vec())
        } else {
            (None, header)
        };
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for rec in records {
            if rec.len() != columns.len() + labeled as usize {
                return Err(Error::Config(format!(
                    "row has {} fields, expected {}",
                    rec.len(),
                    columns.len() + labeled as usize
                )));
            }
            let values = &rec[labeled as usize..];
            if labeled {
                labels.push(rec[0].clone());
            }
            let row: std::result::Result<Vec<f64>, _> =
                values.iter().map(|f| f.parse::<f64>()).collect();
            rows.push(row.map_err(|e| Error::Config(format!("bad float field: {e}")))?);
        }
        Ok(ResultTable {
            name,
            label_header,
            labels,
            columns,
            rows,
            metadata,
        })
    }

    /// Write `<dir>/<name>.<ext>`, creating the directory as needed.
    pub fn write_to(&self, dir: &Path, format: OutputFormat) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.{}", self.name, format.extension()));
        fs::write(&path, self.render(format))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultTable {
        let mut t = ResultTable::new("psi", &["t", "psi_alpha_0.6"]);
        t.push_row(vec![0.0, 0.0]);
        t.push_row(vec![0.1, -0.123456789012345678]);
        t.push_row(vec![1.0 / 3.0, f64::MIN_POSITIVE]);
        t.insert_metadata("seed", "42");
        t.insert_metadata("command", "psi");
        t
    }

    #[test]
    fn csv_round_trip_is_bit_identical() {
        let t = sample();
        let parsed = ResultTable::parse_csv(&t.to_csv()).unwrap();
        assert_eq!(parsed, t);
        // texture: metadata comes back sorted, name restored
        assert_eq!(parsed.name(), "psi");
        assert_eq!(parsed.metadata()["seed"], "42");
    }

    #[test]
    fn labeled_rows_keep_their_check_column() {
        let mut t = ResultTable::with_labels("validation", "check", &["value", "pass"]);
        t.push_labeled_row("strategy identity residual", vec![1.0e-7, 1.0]);
        t.push_labeled_row("refinement order", vec![1.98, 1.0]);
        let parsed = ResultTable::parse_csv(&t.to_csv()).unwrap();
        assert_eq!(parsed, t);
        assert_eq!(parsed.labels()[1], "refinement order");
        assert_eq!(parsed.column("value").unwrap()[0], 1.0e-7);
    }

    #[test]
    fn non_finite_values_survive_the_csv_form() {
        let mut t = ResultTable::new("edge", &["v"]);
        t.push_row(vec![f64::NAN]);
        t.push_row(vec![f64::INFINITY]);
        let parsed = ResultTable::parse_csv(&t.to_csv()).unwrap();
        assert!(parsed.rows()[0][0].is_nan());
        assert_eq!(parsed.rows()[1][0], f64::INFINITY);
    }

    #[test]
    fn json_form_is_deterministic_and_carries_everything() {
        let t = sample();
        let a = t.to_json();
        assert_eq!(a, t.to_json());
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["table"], "psi");
        assert_eq!(v["metadata"]["command"], "psi");
        assert_eq!(v["columns"][1], "psi_alpha_0.6");
        let cell: f64 = v["rows"][1][1].as_str().unwrap().parse().unwrap();
        assert_eq!(cell, -0.123456789012345678);
    }

    #[test]
    fn files_land_under_the_requested_directory() {
        let dir = tempfile::tempdir().unwrap();
        let t = sample();
        let p = t.write_to(dir.path(), OutputFormat::Csv).unwrap();
        assert_eq!(p, dir.path().join("psi.csv"));
        let q = t.write_to(dir.path(), OutputFormat::Json).unwrap();
        assert!(q.ends_with("psi.json"));
        let round = ResultTable::parse_csv(&fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(round, t);
    }
}

//! CSV tables and JSON manifests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::SimConfig;
use crate::error::CliError;

/// Shortest round-trip representation; exponent form outside [1e-4, 1e9).
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let a = v.abs();
    if (1e-4..1e9).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => {
                if s.contains([',', '"', '\n', '\r']) {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.clone()
                }
            }
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
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

#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(Cell::render).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// Collects output files of one run.
pub struct OutputDir {
    pub dir: PathBuf,
    pub written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn write_table(&mut self, name: &str, t: &Table) -> Result<PathBuf, CliError> {
        self.write(name, &t.render())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<PathBuf, CliError> {
        let mut s = serde_json::to_string_pretty(v).expect("serializable value");
        s.push('\n');
        self.write(name, &s)
    }
}

pub fn config_hash(cfg: &SimConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Run record written next to the data.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_hash: String,
    pub version: String,
    pub wall_time_s: f64,
    pub jobs: usize,
    pub steps: Vec<(String, Vec<f64>, Vec<usize>)>,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
    pub extra: Map<String, Value>,
}

impl RunManifest {
    pub fn to_json(&self, cfg: &SimConfig) -> Value {
        let steps: Vec<Value> = self
            .steps
            .iter()
            .map(|(label, xs, n)| {
                json!({
                    "label": label,
                    "x_nm": xs,
                    "steps": n,
                })
            })
            .collect();
        let mut m = Map::new();
        m.insert("subcommand".into(), json!(self.subcommand));
        m.insert("version".into(), json!(self.version));
        m.insert("config_hash".into(), json!(self.config_hash));
        m.insert("preset".into(), json!(cfg.preset));
        m.insert("deterministic".into(), json!(cfg.deterministic));
        m.insert("wall_time_s".into(), json!(self.wall_time_s));
        m.insert("jobs".into(), json!(self.jobs));
        m.insert("outputs".into(), json!(self.outputs));
        m.insert("warnings".into(), json!(self.warnings));
        m.insert("steps".into(), Value::Array(steps));
        for (k, v) in &self.extra {
            m.insert(k.clone(), v.clone());
        }
        m.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
        Value::Object(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for v in [0.0, 1.5, -2.25, 1e-20, 3.7e-8, 123456.789, 1e12, 0.03] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_f64(1e-20), "1e-20");
        assert_eq!(fmt_f64(0.5), "0.5");
    }

    #[test]
    fn csv_quotes_text() {
        let mut t = Table::new(&["x_nm", "note"]);
        t.push(vec![1.0.into(), "a,b".into()]);
        t.push(vec![2.0.into(), "say \"hi\"".into()]);
        assert_eq!(t.render(), "x_nm,note\n1,\"a,b\"\n2,\"say \"\"hi\"\"\"\n");
    }

    #[test]
    fn hash_depends_on_config() {
        let a = SimConfig::default();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.trap_depth_mk = 6.0;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}

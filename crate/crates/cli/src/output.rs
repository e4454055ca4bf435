//! CSV tables and JSON run records.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::eval::{num, Values};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Columns after the swept values.
pub const VALUE_COLUMNS: [&str; 7] = ["xi2", "purity", "Sz", "Sy2", "Sx2", "gap", "status"];

/// Shortest round-trip form; `inf`, `-inf` and `nan` for non-finite values.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v == 0.0 || (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// A swept value: numbers for parameter axes, text for labels.
#[derive(Debug, Clone, PartialEq)]
pub enum Swept {
    Num(f64),
    Text(String),
}

impl Swept {
    fn cell(&self) -> String {
        match self {
            Swept::Num(v) => fmt_f64(*v),
            Swept::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Swept::Num(v) => num(*v),
            Swept::Text(s) => Value::String(s.clone()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Swept::Num(v) => Some(*v),
            Swept::Text(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub swept: Vec<Swept>,
    pub values: Values,
    /// `ok`, or `error: …` for a failed point.
    pub status: String,
    pub seconds: f64,
    pub extra: Map<String, Value>,
}

impl Row {
    pub fn failed(swept: Vec<Swept>, err: impl std::fmt::Display, seconds: f64) -> Self {
        let msg = err.to_string().replace(['\n', '\r'], " ");
        Row { swept, values: Values::EMPTY, status: format!("error: {msg}"), seconds, extra: Map::new() }
    }

    pub fn is_ok(&self) -> bool {
        !self.status.starts_with("error")
    }

    pub fn get(&self, columns: &[String], name: &str) -> Option<f64> {
        columns.iter().position(|c| c == name).and_then(|i| self.swept[i].as_f64())
    }
}

/// One CSV file plus its sidecar.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub config: RunConfig,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub summary: Map<String, Value>,
}

impl Table {
    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }

    pub fn column(&self, name: &str) -> Vec<f64> {
        self.rows.iter().map(|r| r.get(&self.columns, name).unwrap_or(f64::NAN)).collect()
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["point".to_string()];
        h.extend(self.columns.iter().cloned());
        h.extend(VALUE_COLUMNS.iter().map(|s| s.to_string()));
        h
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new().delimiter(b',').from_writer(vec![]);
        w.write_record(self.header())?;
        for (i, r) in self.rows.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(r.swept.iter().map(Swept::cell));
            let v = &r.values;
            rec.extend([v.xi2, v.purity, v.sz, v.sy2, v.sx2, v.gap].into_iter().map(fmt_f64));
            rec.push(r.status.clone());
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| CliError::Pool(e.to_string()))
    }

    pub fn record(&self, wall_clock_seconds: f64) -> RunRecord {
        let points = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| PointRecord {
                index: i,
                swept: self.columns.iter().cloned().zip(r.swept.iter().map(Swept::json)).collect(),
                xi2: num(r.values.xi2),
                purity: num(r.values.purity),
                sz: num(r.values.sz),
                sy2: num(r.values.sy2),
                sx2: num(r.values.sx2),
                gap: num(r.values.gap),
                status: r.status.clone(),
                seconds: r.seconds,
                extra: r.extra.clone(),
            })
            .collect();
        RunRecord {
            version: VERSION,
            name: self.name.clone(),
            config: self.config.clone(),
            columns: self.header(),
            points,
            failed: self.failed(),
            summary: self.summary.clone(),
            wall_clock_seconds,
        }
    }

    /// Writes `<dir>/<name>.csv` and `<dir>/<name>.json`.
    pub fn write(&self, dir: &Path, wall_clock_seconds: f64) -> Result<(PathBuf, PathBuf), CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        let csv_path = dir.join(format!("{}.csv", self.name));
        let json_path = dir.join(format!("{}.json", self.name));
        std::fs::write(&csv_path, self.to_csv()?).map_err(|source| CliError::Io { path: csv_path.clone(), source })?;
        let json = serde_json::to_vec_pretty(&self.record(wall_clock_seconds))?;
        std::fs::write(&json_path, json).map_err(|source| CliError::Io { path: json_path.clone(), source })?;
        Ok((csv_path, json_path))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointRecord {
    pub index: usize,
    pub swept: Map<String, Value>,
    pub xi2: Value,
    pub purity: Value,
    #[serde(rename = "Sz")]
    pub sz: Value,
    #[serde(rename = "Sy2")]
    pub sy2: Value,
    #[serde(rename = "Sx2")]
    pub sx2: Value,
    pub gap: Value,
    pub status: String,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Map::is_empty")]
    pub extra: Map<String, Value>,
}

/// Everything about one table: the resolved configuration, every point and
/// a task summary.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub version: &'static str,
    pub name: String,
    pub config: RunConfig,
    pub columns: Vec<String>,
    pub points: Vec<PointRecord>,
    pub failed: usize,
    pub summary: Map<String, Value>,
    pub wall_clock_seconds: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(1e-7), "1e-7");
        for v in [0.1, 1.0 / 3.0, 2.0 / 202.0, 1e-300, 123456.789, -4.25e-9] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}

//! Run reports: named checks with a pure verdict, scalar metrics, tables, and
//! their CSV / JSON / text renderings.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Comparison applied by a [`Check`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cmp {
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Le => "<=",
            Cmp::Lt => "<",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
            Cmp::Eq => "==",
        }
    }
}

/// One assertion, stored as `value cmp bound` so the verdict can be
/// recomputed from the report alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(with = "num")]
    pub value: f64,
    pub cmp: Cmp,
    #[serde(with = "num")]
    pub bound: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, cmp: Cmp, bound: f64) -> Self {
        Check { name: name.into(), value, cmp, bound }
    }

    pub fn holds(&self) -> bool {
        let (v, b) = (self.value, self.bound);
        if v.is_nan() || b.is_nan() {
            return false;
        }
        match self.cmp {
            Cmp::Le => v <= b,
            Cmp::Lt => v < b,
            Cmp::Ge => v >= b,
            Cmp::Gt => v > b,
            Cmp::Eq => v == b,
        }
    }

    /// A boolean fact as a check (`1 == 1` or `0 == 1`).
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check::new(name, if ok { 1.0 } else { 0.0 }, Cmp::Eq, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

/// PASS iff there is at least one check and every check holds.
pub fn verdict(checks: &[Check]) -> Verdict {
    if !checks.is_empty() && checks.iter().all(Check::holds) {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(#[serde(with = "num")] f64),
    Flag(bool),
    Text(String),
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

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
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

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Num(v) => f.write_str(&fmt_num(*v)),
            Cell::Flag(v) => write!(f, "{v}"),
            Cell::Text(v) => f.write_str(v),
        }
    }
}

/// Shortest round-trip decimal; exponent form outside `[1e-4, 1e15)`.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v == 0.0 || (v.abs() >= 1e-4 && v.abs() < 1e15) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string()))?;
        }
        w.into_inner().map_err(|e| LabError::Config(format!("csv buffer: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    #[serde(with = "num")]
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: String,
    pub seed: u64,
    /// Resolved configuration, defaults filled in.
    pub config: serde_json::Value,
    pub checks: Vec<Check>,
    pub metrics: Vec<Metric>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
    pub wall_clock_s: f64,
}

impl RunReport {
    pub fn new(experiment: &str, seed: u64, config: serde_json::Value) -> Self {
        RunReport {
            experiment: experiment.to_string(),
            seed,
            config,
            checks: Vec::new(),
            metrics: Vec::new(),
            tables: Vec::new(),
            notes: Vec::new(),
            wall_clock_s: 0.0,
        }
    }

    pub fn verdict(&self) -> Verdict {
        verdict(&self.checks)
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push(Metric { name: name.into(), value });
    }

    pub fn metric_value(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.value)
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Checks and metrics as tables; these, plus `tables`, are the CSV files.
    fn summary_tables(&self) -> [Table; 2] {
        let mut checks = Table::new("checks", &["name", "value", "cmp", "bound", "pass"]);
        for c in &self.checks {
            checks.push(vec![c.name.clone().into(), c.value.into(), c.cmp.symbol().into(), c.bound.into(), c.holds().into()]);
        }
        let mut metrics = Table::new("metrics", &["name", "value"]);
        for m in &self.metrics {
            metrics.push(vec![m.name.clone().into(), m.value.into()]);
        }
        [checks, metrics]
    }

    /// Seed-stable summary: everything except timing.
    pub fn summary(&self) -> String {
        let mut s = format!("experiment {}\nseed {}\nverdict {}\n", self.experiment, self.seed, self.verdict());
        for c in &self.checks {
            s.push_str(&format!(
                "check {}: {} {} {} {}\n",
                c.name,
                fmt_num(c.value),
                c.cmp.symbol(),
                fmt_num(c.bound),
                if c.holds() { "ok" } else { "FAILED" }
            ));
        }
        for m in &self.metrics {
            s.push_str(&format!("metric {}: {}\n", m.name, fmt_num(m.value)));
        }
        for n in &self.notes {
            s.push_str(&format!("note {n}\n"));
        }
        s
    }

    /// Writes every CSV into `dir` (created if needed).
    pub fn write_csvs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
        let mut out = Vec::new();
        let [checks, metrics] = self.summary_tables();
        for t in [&checks, &metrics].into_iter().chain(self.tables.iter()) {
            let path = dir.join(format!("{}.csv", t.name));
            fs::write(&path, t.to_csv()?).map_err(|e| LabError::io(&path, e))?;
            out.push(path);
        }
        Ok(out)
    }

    /// Writes CSVs, `report.json` and `report.txt` into a fresh
    /// `root/<experiment>/<timestamp>/` and points `root/<experiment>/latest`
    /// at it.
    pub fn write_run(&self, root: &Path) -> Result<PathBuf> {
        let base = root.join(self.experiment.to_lowercase());
        fs::create_dir_all(&base).map_err(|e| LabError::io(&base, e))?;
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
        let mut dir = base.join(&stamp);
        let mut n = 1;
        while dir.exists() {
            dir = base.join(format!("{stamp}-{n}"));
            n += 1;
        }
        self.write_csvs(&dir)?;
        let json = dir.join("report.json");
        fs::write(&json, serde_json::to_vec_pretty(self)?).map_err(|e| LabError::io(&json, e))?;
        let txt = dir.join("report.txt");
        let body = format!("{}wall_clock_s {:.3}\n", self.summary(), self.wall_clock_s);
        fs::write(&txt, body).map_err(|e| LabError::io(&txt, e))?;
        let latest = base.join("latest");
        let name = dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        fs::write(&latest, format!("{name}\n")).map_err(|e| LabError::io(&latest, e))?;
        Ok(dir)
    }
}

/// JSON has no non-finite numbers; these are written as strings.
mod num {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&super::fmt_num(*v))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "NaN" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_needs_all_checks() {
        assert_eq!(verdict(&[]), Verdict::Fail);
        let ok = Check::new("a", 0.1, Cmp::Le, 0.15);
        let bad = Check::new("b", f64::NAN, Cmp::Ge, 0.0);
        assert_eq!(verdict(&[ok.clone()]), Verdict::Pass);
        assert_eq!(verdict(&[ok, bad]), Verdict::Fail);
        assert!(Check::flag("f", true).holds());
        assert!(!Check::flag("f", false).holds());
    }

    #[test]
    fn json_round_trip_keeps_verdict() {
        let mut r = RunReport::new("E0", 7, serde_json::json!({"x": 1}));
        r.check(Check::new("ratio", f64::INFINITY, Cmp::Ge, 5.0));
        r.metric("nan", f64::NAN);
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![1usize.into(), 0.5.into()]);
        r.tables.push(t);
        let back: RunReport = serde_json::from_slice(&serde_json::to_vec(&r).unwrap()).unwrap();
        assert_eq!(back.verdict(), Verdict::Pass);
        assert!(back.metrics[0].value.is_nan());
        assert_eq!(back.tables, r.tables);
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(1e-10), "1e-10");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(f64::NEG_INFINITY), "-inf");
        let mut t = Table::new("t", &["a"]);
        t.push(vec![Cell::Text("x,y".into())]);
        assert_eq!(t.to_csv().unwrap(), b"a\n\"x,y\"\n");
    }
}

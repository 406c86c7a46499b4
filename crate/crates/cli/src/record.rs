//! Result records and their CSV series.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ergodec_core::averaging::Method;
use ergodec_core::numeric::{format_rational, to_f64, Rational};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct VerdictEntry {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// One number with its provenance. `exact` is set iff `method` is `exact`.
#[derive(Debug, Clone, Serialize)]
pub struct NumericEntry {
    pub name: String,
    pub value: f64,
    pub exact: Option<String>,
    pub method: &'static str,
    pub stderr: Option<f64>,
}

impl NumericEntry {
    pub fn exact(name: impl Into<String>, value: &Rational) -> Self {
        NumericEntry { name: name.into(), value: to_f64(value), exact: Some(format_rational(value)), method: Method::Exact.tag(), stderr: None }
    }

    pub fn monte_carlo(name: impl Into<String>, value: f64, stderr: f64) -> Self {
        NumericEntry { name: name.into(), value, exact: None, method: Method::MonteCarlo.tag(), stderr: Some(stderr) }
    }

    pub fn count(name: impl Into<String>, value: usize) -> Self {
        Self::exact(name, &Rational::from_integer((value as i64).into()))
    }
}

/// Machine-readable outcome of one subcommand. Contains no wall-clock or
/// thread information, so it is a pure function of config and seed.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub experiment: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: serde_json::Value,
    pub passed: bool,
    pub verdicts: Vec<VerdictEntry>,
    /// Named tables; table `t` is also written to `t.csv`.
    pub tables: BTreeMap<String, Vec<NumericEntry>>,
    pub details: serde_json::Value,
    /// Extra plot series `(file name, CSV body)` without a record counterpart.
    #[serde(skip)]
    pub series: Vec<(String, String)>,
    #[serde(skip)]
    pub narrative: String,
}

impl ResultRecord {
    pub fn new(experiment: &'static str, seed: u64, config: &impl Serialize) -> Self {
        ResultRecord {
            experiment,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config: serde_json::to_value(config).expect("config serializes"),
            passed: true,
            verdicts: Vec::new(),
            tables: BTreeMap::new(),
            details: serde_json::Value::Null,
            series: Vec::new(),
            narrative: String::new(),
        }
    }

    pub fn verdict(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.passed &= passed;
        self.verdicts.push(VerdictEntry { name: name.into(), passed, detail: detail.into() });
    }

    pub fn push(&mut self, table: &str, entry: NumericEntry) {
        self.tables.entry(table.into()).or_default().push(entry);
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        if self.details.is_null() {
            self.details = serde_json::Value::Object(Default::default());
        }
        let value = serde_json::to_value(value).expect("details serialize");
        self.details.as_object_mut().expect("object").insert(key.into(), value);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("record serializes");
        s.push('\n');
        s
    }

    /// One line per verdict.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for v in &self.verdicts {
            let _ = writeln!(out, "{} {}: {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
        }
        out
    }

    /// Writes `result.json`, one CSV per table, the extra series and `summary.txt`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("result.json"), self.to_json())?;
        for (name, entries) in &self.tables {
            fs::write(dir.join(format!("{name}.csv")), table_csv(entries))?;
        }
        for (name, body) in &self.series {
            fs::write(dir.join(name), body)?;
        }
        let mut summary = self.summary();
        summary.push_str(&self.narrative);
        fs::write(dir.join("summary.txt"), summary)
    }
}

/// `name,value,exact,method,stderr`; floats in shortest round-trip form.
pub fn table_csv(entries: &[NumericEntry]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in entries {
        w.serialize(e).expect("entry serializes");
    }
    if entries.is_empty() {
        w.write_record(["name", "value", "exact", "method", "stderr"]).expect("header writes");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 fields")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ergodec_core::numeric::rat;

    #[test]
    fn csv_numbers_round_trip_to_record_bits() {
        let mut r = ResultRecord::new("t", 1, &());
        r.push("x", NumericEntry::exact("a", &rat(1, 3)));
        r.push("x", NumericEntry::monte_carlo("b", 1e-20, 0.1 + 0.2));
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        let csv = table_csv(&r.tables["x"]);
        let mut reader = csv::Reader::from_reader(csv.as_bytes());
        for (row, entry) in reader.records().zip(json["tables"]["x"].as_array().unwrap()) {
            let row = row.unwrap();
            assert_eq!(row[1].parse::<f64>().unwrap().to_bits(), entry["value"].as_f64().unwrap().to_bits());
            if let Some(se) = entry["stderr"].as_f64() {
                assert_eq!(row[4].parse::<f64>().unwrap().to_bits(), se.to_bits());
            }
        }
    }

    #[test]
    fn names_with_commas_are_quoted() {
        let csv = table_csv(&[NumericEntry::count("phi{1,2}@16", 3)]);
        let mut reader = csv::Reader::from_reader(csv.as_bytes());
        let row = reader.records().next().unwrap().unwrap();
        assert_eq!((&row[0], &row[1]), ("phi{1,2}@16", "3.0"));
    }

    #[test]
    fn failing_verdict_fails_record() {
        let mut r = ResultRecord::new("t", 1, &());
        r.verdict("a", true, "");
        assert!(r.passed);
        r.verdict("b", false, "");
        assert!(!r.passed);
        assert_eq!(r.summary(), "PASS a: \nFAIL b: \n");
    }
}

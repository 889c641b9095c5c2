//! Report documents and the files a run leaves behind.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

pub const REPORT_SCHEMA: &str = "toeplitz-lab/report/v1";
pub const CSV_HEADER: &str = "k,hbar,quantity,bound,ratio";

/// One asserted invariant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub anchor: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(anchor: &str, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            anchor: anchor.into(),
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    /// "anchor: name (detail)", the line a failure prints.
    pub fn line(&self) -> String {
        format!("{}: {} ({})", self.anchor, self.name, self.detail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsvRow {
    pub k: Option<usize>,
    pub hbar: f64,
    pub quantity: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Where one series sits in table.csv (data rows, 0-based, end exclusive).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub rows: [usize; 2],
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub rows: Vec<CsvRow>,
    pub series: Vec<Series>,
}

impl Table {
    pub fn push_series(&mut self, name: impl Into<String>, rows: impl IntoIterator<Item = CsvRow>) {
        let start = self.rows.len();
        self.rows.extend(rows);
        self.series.push(Series {
            name: name.into(),
            rows: [start, self.rows.len()],
        });
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let k = r.k.map(|k| k.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{k},{:?},{:?},{:?},{:?}", r.hbar, r.quantity, r.bound, r.ratio);
        }
        out
    }
}

/// What a command hands back before anything is written.
#[derive(Debug)]
pub struct Outcome {
    pub results: Value,
    pub checks: Vec<Check>,
    pub table: Table,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    schema: &'static str,
    command: &'a str,
    version: &'static str,
    config: &'a Value,
    passed: bool,
    checks: &'a [Check],
    series: &'a [Series],
    results: &'a Value,
}

/// report.json contents: a pure function of command, resolved config and
/// outcome, so identical runs give identical bytes.
pub fn report_json(command: &str, config: &Value, outcome: &Outcome) -> String {
    let doc = ReportDoc {
        schema: REPORT_SCHEMA,
        command,
        version: env!("CARGO_PKG_VERSION"),
        config,
        passed: outcome.passed(),
        checks: &outcome.checks,
        series: &outcome.table.series,
        results: &outcome.results,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
pub struct FailureRecord<'a> {
    pub exit_code: i32,
    pub kind: &'a str,
    pub message: Option<String>,
    pub failures: Vec<&'a Check>,
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)
}

pub fn failure_json(record: &FailureRecord) -> String {
    let mut s = serde_json::to_string_pretty(record).expect("failure record serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::default();
        t.push_series(
            "a",
            [
                CsvRow {
                    k: Some(16),
                    hbar: 0.0625,
                    quantity: 0.5,
                    bound: 1.0,
                    ratio: 0.5,
                },
                CsvRow {
                    k: None,
                    hbar: 0.25,
                    quantity: 1e-20,
                    bound: 2.0,
                    ratio: 5e-21,
                },
            ],
        );
        t.push_series("b", []);
        assert_eq!(t.to_csv(), "k,hbar,quantity,bound,ratio\n16,0.0625,0.5,1.0,0.5\n,0.25,1e-20,2.0,5e-21\n");
        assert_eq!(t.series[1].rows, [2, 2]);
    }
}

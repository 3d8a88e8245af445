//! Table-shaped metric reports.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{HarnessError, TrialRecord};

pub const HEADER: [&str; 5] = ["Tasks", "Num of trials", "Executability", "Feasibility", "Success rate"];
pub const TOTAL: &str = "Total";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub task: String,
    pub trials: usize,
    pub executable: usize,
    pub feasible: usize,
    pub success: usize,
}

fn rate(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

impl MetricsRow {
    fn empty(task: &str) -> Self {
        MetricsRow { task: task.to_string(), trials: 0, executable: 0, feasible: 0, success: 0 }
    }

    fn add(&mut self, r: &TrialRecord) {
        self.trials += 1;
        self.executable += usize::from(r.executable);
        self.feasible += usize::from(r.feasible);
        self.success += usize::from(r.success);
    }

    pub fn executability(&self) -> f64 {
        rate(self.executable, self.trials)
    }

    pub fn feasibility(&self) -> f64 {
        rate(self.feasible, self.trials)
    }

    pub fn success_rate(&self) -> f64 {
        rate(self.success, self.trials)
    }

    fn cells(&self) -> [String; 5] {
        let pct = |r: f64| format!("{:.1}%", 100.0 * r);
        [self.task.clone(), self.trials.to_string(), pct(self.executability()), pct(self.feasibility()), pct(self.success_rate())]
    }
}

/// Task rows in suite order followed by a pooled Total row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
}

impl MetricsReport {
    /// Rows follow `labels`; records of one label are pooled even when the label repeats.
    pub fn from_records(labels: &[&str], records: &[TrialRecord]) -> Self {
        let mut rows: Vec<MetricsRow> = Vec::new();
        for l in labels {
            if !rows.iter().any(|r| r.task == *l) {
                rows.push(MetricsRow::empty(l));
            }
        }
        let mut total = MetricsRow::empty(TOTAL);
        for rec in records {
            if let Some(row) = rows.iter_mut().find(|r| r.task == rec.task) {
                row.add(rec);
                total.add(rec);
            }
        }
        if !rows.is_empty() {
            rows.push(total);
        }
        MetricsReport { rows }
    }

    pub fn row(&self, task: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.task == task)
    }

    pub fn total(&self) -> Option<&MetricsRow> {
        self.rows.last().filter(|r| r.task == TOTAL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Text,
}

impl FromStr for ReportFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "text" | "txt" => Ok(ReportFormat::Text),
            _ => Err(HarnessError::UnknownFormat(s.to_string())),
        }
    }
}

pub fn emit_report(report: &MetricsReport, format: ReportFormat) -> Result<String, HarnessError> {
    if report.rows.is_empty() {
        return Err(HarnessError::EmptyReport);
    }
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(HEADER)?;
            for row in &report.rows {
                w.write_record(row.cells())?;
            }
            let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))?;
            Ok(String::from_utf8(bytes).expect("csv writer emits the utf-8 it was given"))
        }
        ReportFormat::Text => {
            let cells: Vec<[String; 5]> = report.rows.iter().map(MetricsRow::cells).collect();
            let mut width = HEADER.map(str::len);
            for row in &cells {
                for (w, c) in width.iter_mut().zip(row) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let mut out = String::new();
            let mut line = |row: [&str; 5]| {
                let mut s = format!("{:<w$}", row[0], w = width[0]);
                for (c, w) in row.iter().zip(width).skip(1) {
                    write!(s, "  {c:>w$}").expect("writing to a String");
                }
                out.push_str(s.trim_end());
                out.push('\n');
            };
            line(HEADER);
            for row in &cells {
                line(row.each_ref().map(String::as_str));
            }
            Ok(out)
        }
    }
}

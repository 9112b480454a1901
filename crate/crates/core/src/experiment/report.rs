//! Text and CSV rendering of evaluation reports.
//!
//! Metric cells are percentages with two decimals. The CSV carries a header,
//! one data row, a blank line, and then the confusion matrix as `k` rows of
//! counts (rows = true class, columns = predicted class).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::metrics::EvalReport;

pub const CSV_HEADER: &str = "accuracy,precision,recall,f1,kappa,epochs,loss";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" | "txt" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::Config(format!("unknown report format '{other}'"))),
        }
    }
}

/// A report row as it appears on disk: metric cells in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub kappa: f64,
    pub epochs: usize,
    pub loss: f64,
    pub confusion: Vec<Vec<u64>>,
}

impl From<&EvalReport> for ReportRow {
    fn from(r: &EvalReport) -> Self {
        ReportRow {
            accuracy: 100.0 * r.accuracy,
            precision: 100.0 * r.precision(),
            recall: 100.0 * r.recall(),
            f1: 100.0 * r.f1(),
            kappa: 100.0 * r.kappa,
            epochs: r.epochs_run,
            loss: r.final_loss,
            confusion: r.confusion.rows(),
        }
    }
}

fn confusion_block(out: &mut String, rows: &[Vec<u64>]) {
    for row in rows {
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
}

pub fn render_csv(report: &EvalReport) -> String {
    let row = ReportRow::from(report);
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    let _ = writeln!(
        out,
        "{:.2},{:.2},{:.2},{:.2},{:.2},{},{:.6}",
        row.accuracy, row.precision, row.recall, row.f1, row.kappa, row.epochs, row.loss
    );
    out.push('\n');
    confusion_block(&mut out, &row.confusion);
    out
}

const TABLE_HEADER: [&str; 8] = [
    "Run",
    "Accuracy",
    "Precision",
    "Recall",
    "F1 Score",
    "Kappa",
    "Epochs",
    "Loss",
];

fn table_line(cells: &[String]) -> String {
    let mut line = format!("{:<24}", cells[0]);
    for c in &cells[1..] {
        let _ = write!(line, " {c:>10}");
    }
    line.trim_end().to_string()
}

fn row_cells(name: &str, r: &ReportRow) -> Vec<String> {
    vec![
        name.to_string(),
        format!("{:.2}", r.accuracy),
        format!("{:.2}", r.precision),
        format!("{:.2}", r.recall),
        format!("{:.2}", r.f1),
        format!("{:.2}", r.kappa),
        r.epochs.to_string(),
        format!("{:.4}", r.loss),
    ]
}

/// Aligned table of several named rows.
pub fn render_table(rows: &[(String, ReportRow)]) -> String {
    let mut out = String::new();
    out.push_str(&table_line(&TABLE_HEADER.map(String::from)));
    out.push('\n');
    for (name, row) in rows {
        out.push_str(&table_line(&row_cells(name, row)));
        out.push('\n');
    }
    out
}

/// Weighted-average row, macro-average row and the confusion matrix.
pub fn render_text(report: &EvalReport) -> String {
    let weighted = ReportRow::from(report);
    let macro_row = ReportRow {
        precision: 100.0 * report.macro_avg.precision,
        recall: 100.0 * report.macro_avg.recall,
        f1: 100.0 * report.macro_avg.f1,
        ..weighted.clone()
    };
    let mut out = render_table(&[
        ("weighted".to_string(), weighted.clone()),
        ("macro".to_string(), macro_row),
    ]);
    out.push_str("\nConfusion matrix (rows = true, columns = predicted)\n");
    let width = weighted
        .confusion
        .iter()
        .flatten()
        .map(|c| c.to_string().len())
        .max()
        .unwrap_or(1);
    for row in &weighted.confusion {
        let cells: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn render(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(report),
        ReportFormat::Csv => render_csv(report),
    }
}

pub fn emit_report(
    report: &EvalReport,
    format: ReportFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, render(report, format)).map_err(|e| Error::io(path, e))
}

fn bad_csv(msg: impl Into<String>) -> Error {
    Error::domain(format!("malformed report CSV: {}", msg.into()))
}

pub fn parse_csv(text: &str) -> Result<ReportRow> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(bad_csv("missing header"));
    }
    let data = lines.next().ok_or_else(|| bad_csv("missing data row"))?;
    let cells: Vec<&str> = data.split(',').map(str::trim).collect();
    if cells.len() != 7 {
        return Err(bad_csv(format!("expected 7 cells, found {}", cells.len())));
    }
    let num = |i: usize| -> Result<f64> {
        cells[i]
            .parse()
            .map_err(|_| bad_csv(format!("bad number '{}'", cells[i])))
    };
    let epochs = cells[5]
        .parse()
        .map_err(|_| bad_csv(format!("bad epoch count '{}'", cells[5])))?;

    let mut confusion = Vec::new();
    for line in lines.map(str::trim).filter(|l| !l.is_empty()) {
        let row = line
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<u64>()
                    .map_err(|_| bad_csv(format!("bad count '{c}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        confusion.push(row);
    }
    if confusion.iter().any(|r| r.len() != confusion.len()) {
        return Err(bad_csv("confusion block is not square"));
    }
    Ok(ReportRow {
        accuracy: num(0)?,
        precision: num(1)?,
        recall: num(2)?,
        f1: num(3)?,
        kappa: num(4)?,
        epochs,
        loss: num(6)?,
        confusion,
    })
}

//! Per-identity report tables with mean ± one standard deviation binning,
//! rendered as CSV, Markdown or HTML.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::{enumerate_identities, ApplicationKind, Identity, Language, PromptMethod};
use crate::scoring::{OverallCell, ScoreCell};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReportError {
    #[error("column has no present values")]
    EmptyColumn,
}

/// Red, yellow and green in the rendered tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinClass {
    High,
    Mid,
    Low,
}

impl BinClass {
    pub fn as_str(self) -> &'static str {
        match self {
            BinClass::High => "high",
            BinClass::Mid => "mid",
            BinClass::Low => "low",
        }
    }
}

/// Population mean and standard deviation.
pub fn mean_and_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    if values.iter().all(|v| *v == values[0]) {
        return Some((values[0], 0.0));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// `High` at or above mean + σ, `Low` at or below mean − σ, `Mid` otherwise.
/// With σ = 0 everything is `Mid`. Absent values stay absent and do not
/// enter the statistics.
pub fn bin_column(values: &[Option<f64>]) -> Result<Vec<Option<BinClass>>, ReportError> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let (mean, sd) = mean_and_sd(&present).ok_or(ReportError::EmptyColumn)?;
    Ok(values
        .iter()
        .map(|v| {
            v.map(|v| {
                if sd == 0.0 {
                    BinClass::Mid
                } else if v >= mean + sd {
                    BinClass::High
                } else if v <= mean - sd {
                    BinClass::Low
                } else {
                    BinClass::Mid
                }
            })
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportKind {
    /// Bias score, top bias term and its TF-IDF.
    Bias,
    /// Top overall term and its TF-IDF.
    Overall,
}

impl std::str::FromStr for ReportKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bias" => Ok(ReportKind::Bias),
            "overall" => Ok(ReportKind::Overall),
            other => Err(format!("unknown report kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[serde(rename = "md", alias = "markdown")]
    Markdown,
    Html,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Markdown => "md",
            Format::Html => "html",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "md" | "markdown" => Ok(Format::Markdown),
            "html" => Ok(Format::Html),
            other => Err(format!("unknown format `{other}` (expected csv|md|html)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(Option<String>),
    Number(Option<f64>, Option<BinClass>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub identity: Identity,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub kind: ReportKind,
    pub language: Language,
    pub application: ApplicationKind,
    pub method: PromptMethod,
    pub columns: Vec<&'static str>,
    pub rows: Vec<ReportRow>,
}

impl ReportTable {
    pub fn column(&self, index: usize) -> impl Iterator<Item = &Cell> {
        self.rows.iter().map(move |r| &r.cells[index])
    }
}

fn bin_numeric_columns(rows: &mut [ReportRow]) {
    let ncols = rows.first().map_or(0, |r| r.cells.len());
    for col in 0..ncols {
        let values: Vec<Option<f64>> = rows
            .iter()
            .map(|r| match r.cells[col] {
                Cell::Number(v, _) => v,
                Cell::Text(_) => None,
            })
            .collect();
        let is_numeric = rows.iter().all(|r| matches!(r.cells[col], Cell::Number(..)));
        if !is_numeric {
            continue;
        }
        // a column with nothing present has nothing to bin
        let Ok(bins) = bin_column(&values) else {
            continue;
        };
        for (row, bin) in rows.iter_mut().zip(bins) {
            if let Cell::Number(_, b) = &mut row.cells[col] {
                *b = bin;
            }
        }
    }
}

/// Assembles the 48-row table for one (language, application, method).
/// Cells for other slices are ignored; missing identities render as N/A.
pub fn build_report(
    scores: &[ScoreCell],
    overall: &[OverallCell],
    language: Language,
    application: ApplicationKind,
    method: PromptMethod,
    kind: ReportKind,
) -> ReportTable {
    let in_slice = |k: &crate::corpus::DocumentKey| {
        k.language == language && k.application == application && k.method == method
    };
    let mut rows: Vec<ReportRow> = match kind {
        ReportKind::Bias => {
            let by_id: BTreeMap<Identity, &ScoreCell> = scores
                .iter()
                .filter(|c| in_slice(&c.key))
                .map(|c| (c.key.identity, c))
                .collect();
            enumerate_identities()
                .into_iter()
                .map(|identity| {
                    let cell = by_id.get(&identity);
                    let top = cell.and_then(|c| c.top_term.as_ref());
                    ReportRow {
                        identity,
                        cells: vec![
                            Cell::Number(cell.map(|c| c.bias_score), None),
                            Cell::Text(top.map(|t| t.lemma.clone())),
                            Cell::Number(top.map(|t| t.value), None),
                        ],
                    }
                })
                .collect()
        }
        ReportKind::Overall => {
            let by_id: BTreeMap<Identity, &OverallCell> = overall
                .iter()
                .filter(|c| in_slice(&c.key))
                .map(|c| (c.key.identity, c))
                .collect();
            enumerate_identities()
                .into_iter()
                .map(|identity| {
                    let top = by_id.get(&identity).and_then(|c| c.top_term.as_ref());
                    ReportRow {
                        identity,
                        cells: vec![
                            Cell::Text(top.map(|t| t.lemma.clone())),
                            Cell::Number(top.map(|t| t.value), None),
                        ],
                    }
                })
                .collect()
        }
    };
    bin_numeric_columns(&mut rows);
    let columns = match kind {
        ReportKind::Bias => vec!["bias_score", "top_bias_term", "top_bias_tfidf"],
        ReportKind::Overall => vec!["top_overall_term", "top_overall_tfidf"],
    };
    ReportTable {
        kind,
        language,
        application,
        method,
        columns,
        rows,
    }
}

const NA: &str = "N/A";
const IDENTITY_COLUMNS: [&str; 4] = ["religion", "gender", "marital_status", "children"];

fn fmt_number(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |v| format!("{v:.3}"))
}

fn identity_labels(id: &Identity) -> [&'static str; 4] {
    [
        id.religion.label(),
        id.gender.label(),
        id.marital_status.label(),
        id.children.label(),
    ]
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn render_csv(t: &ReportTable) -> String {
    let mut header: Vec<String> = IDENTITY_COLUMNS.iter().map(|s| s.to_string()).collect();
    for (i, name) in t.columns.iter().enumerate() {
        header.push(name.to_string());
        if matches!(t.rows.first().map(|r| &r.cells[i]), Some(Cell::Number(..))) {
            header.push(format!("{name}_bin"));
        }
    }
    let mut out = header.join(",") + "\n";
    for row in &t.rows {
        let mut fields: Vec<String> = identity_labels(&row.identity)
            .iter()
            .map(|s| s.to_string())
            .collect();
        for cell in &row.cells {
            match cell {
                Cell::Text(s) => fields.push(csv_escape(s.as_deref().unwrap_or(NA))),
                Cell::Number(v, b) => {
                    fields.push(fmt_number(*v));
                    fields.push(b.map_or("", BinClass::as_str).to_string());
                }
            }
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn cell_text(cell: &Cell) -> String {
    match cell {
        Cell::Text(s) => s.clone().unwrap_or_else(|| NA.to_string()),
        Cell::Number(v, _) => fmt_number(*v),
    }
}

fn render_markdown(t: &ReportTable) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "## {} | {} | {}\n",
        t.language,
        t.application.label(),
        t.method
    );
    let header: Vec<&str> = IDENTITY_COLUMNS.iter().chain(t.columns.iter()).copied().collect();
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
    for row in &t.rows {
        let mut fields: Vec<String> = identity_labels(&row.identity)
            .iter()
            .map(|s| s.to_string())
            .collect();
        for cell in &row.cells {
            let text = cell_text(cell);
            fields.push(match cell {
                Cell::Number(_, Some(b)) => format!("{text} ({})", b.as_str()),
                _ => text,
            });
        }
        let _ = writeln!(out, "| {} |", fields.join(" | "));
    }
    out
}

const HTML_STYLE: &str = "table{border-collapse:collapse;font-family:sans-serif;font-size:13px}\
th,td{border:1px solid #999;padding:2px 6px}\
.bin-high{background:#f4b6b6}.bin-mid{background:#fbf0b3}.bin-low{background:#bfe6bf}";

fn render_html(t: &ReportTable) -> String {
    let title = format!(
        "{} | {} | {}",
        t.language,
        t.application.label(),
        t.method
    );
    let mut out = String::new();
    let _ = write!(
        out,
        "<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\"><title>{}</title><style>{}</style></head><body>\n<h2>{}</h2>\n<table>\n<tr>",
        html_escape(&title),
        HTML_STYLE,
        html_escape(&title)
    );
    for h in IDENTITY_COLUMNS.iter().chain(t.columns.iter()) {
        let _ = write!(out, "<th>{h}</th>");
    }
    out.push_str("</tr>\n");
    for row in &t.rows {
        out.push_str("<tr>");
        for l in identity_labels(&row.identity) {
            let _ = write!(out, "<td>{l}</td>");
        }
        for cell in &row.cells {
            match cell {
                Cell::Number(_, Some(b)) => {
                    let _ = write!(out, "<td class=\"bin-{}\">{}</td>", b.as_str(), cell_text(cell));
                }
                _ => {
                    let _ = write!(out, "<td>{}</td>", html_escape(&cell_text(cell)));
                }
            }
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</table>\n</body></html>\n");
    out
}

/// Deterministic rendering. Numbers use three decimals; absent values are `N/A`.
pub fn render_table(table: &ReportTable, format: Format) -> Vec<u8> {
    match format {
        Format::Csv => render_csv(table),
        Format::Markdown => render_markdown(table),
        Format::Html => render_html(table),
    }
    .into_bytes()
}

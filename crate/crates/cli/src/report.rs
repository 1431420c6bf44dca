//! Text and JSON renderings of evaluation and baseline reports.

use polyphone_core::eval::{BaselineReport, EvalReport};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JsonRow {
    pub char: String,
    pub high_freq_pinyin: String,
    pub low_freq_pinyins: Vec<String>,
    pub rate: f64,
    pub accuracy: f64,
    pub correct: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JsonReport {
    pub overall: f64,
    pub high_freq_rate: f64,
    pub correct: usize,
    pub total: usize,
    pub rows: Vec<JsonRow>,
}

impl From<&EvalReport> for JsonReport {
    fn from(r: &EvalReport) -> Self {
        Self {
            overall: r.overall,
            high_freq_rate: r.high_freq_rate,
            correct: r.correct,
            total: r.total,
            rows: r
                .rows
                .iter()
                .map(|row| JsonRow {
                    char: row.character.to_string(),
                    high_freq_pinyin: row.high_freq_pinyin.clone(),
                    low_freq_pinyins: row.low_freq_pinyins.clone(),
                    rate: row.high_freq_rate,
                    accuracy: row.accuracy,
                    correct: row.correct,
                    count: row.count,
                })
                .collect(),
        }
    }
}

pub fn to_json(report: &EvalReport) -> String {
    serde_json::to_string_pretty(&JsonReport::from(report)).expect("plain report")
}

pub fn percent(v: f64) -> String {
    format!("{:.2}%", v * 100.0)
}

/// Left-aligns the first columns and right-aligns the rest, measuring
/// width in characters.
fn render(header: &[&str], rows: &[Vec<String>], left: usize) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| {
                let pad = " ".repeat(w - c.chars().count());
                if i < left { format!("{c}{pad}") } else { format!("{pad}{c}") }
            })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = line(&mut header.iter().copied());
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
        out.push('\n');
    }
    out
}

/// One row per character followed by an `overall` row.
pub fn eval_table(report: &EvalReport) -> String {
    let mut rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.character.to_string(),
                r.high_freq_pinyin.clone(),
                if r.low_freq_pinyins.is_empty() { "-".into() } else { r.low_freq_pinyins.join(",") },
                percent(r.high_freq_rate),
                percent(r.accuracy),
                r.count.to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        "overall".into(),
        String::new(),
        String::new(),
        percent(report.high_freq_rate),
        percent(report.overall),
        report.total.to_string(),
    ]);
    render(&["char", "high-freq pinyin", "low-freq pinyin", "high-freq rate", "accuracy", "count"], &rows, 3)
}

pub fn baseline_table(report: &BaselineReport) -> String {
    let mut rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let predicted = if r.seen_in_train { r.predicted.clone() } else { format!("{}*", r.predicted) };
            vec![r.character.to_string(), predicted, percent(r.rate), r.count.to_string()]
        })
        .collect();
    rows.push(vec!["overall".into(), String::new(), percent(report.overall), report.total.to_string()]);
    let mut out = render(&["char", "predicted", "rate", "count"], &rows, 2);
    if report.rows.iter().any(|r| !r.seen_in_train) {
        out.push_str("* not in training data; first lexicon candidate used\n");
    }
    out
}

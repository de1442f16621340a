//! Rendering summaries as JSON, TSV and an aligned text table.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::condition::{Condition, SplitKind};
use crate::error::{Error, Result};
use crate::stats::{Classification, ExperimentSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Text,
    Tsv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Text => "txt",
            ReportFormat::Tsv => "tsv",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            "tsv" => Ok(ReportFormat::Tsv),
            other => Err(Error::Config(format!("unknown report format '{other}'"))),
        }
    }
}

fn ordered(summaries: &[ExperimentSummary]) -> Vec<&ExperimentSummary> {
    let mut rows: Vec<&ExperimentSummary> = summaries.iter().collect();
    rows.sort_by_key(|s| (s.condition, s.split));
    rows
}

pub fn render(summaries: &[ExperimentSummary], format: ReportFormat) -> Result<String> {
    if summaries.is_empty() {
        return Err(Error::Input("no summaries to report".into()));
    }
    Ok(match format {
        ReportFormat::Json => {
            let rows = ordered(summaries);
            serde_json::to_string_pretty(&rows)? + "\n"
        }
        ReportFormat::Tsv => render_tsv(summaries),
        ReportFormat::Text => render_text(summaries),
    })
}

const TSV_HEADER: &str = "condition\tsplit\tmean\tci_halfwidth\tn_runs\tclassification";

fn render_tsv(summaries: &[ExperimentSummary]) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for s in ordered(summaries) {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            s.condition,
            s.split.name(),
            s.mean,
            s.ci_halfwidth,
            s.n_runs,
            s.classification
        ));
    }
    out
}

pub fn parse_tsv(text: &str) -> Result<Vec<ExperimentSummary>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == TSV_HEADER => {}
        _ => return Err(Error::parse("summary tsv", 1, "missing header")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::parse("summary tsv", i + 1, msg);
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("'{s}': {e}")));
        rows.push(ExperimentSummary {
            condition: f[0].parse().map_err(|e: Error| err(e.to_string()))?,
            split: f[1].parse().map_err(|e: Error| err(e.to_string()))?,
            mean: num(f[2])?,
            ci_halfwidth: num(f[3])?,
            n_runs: f[4].parse().map_err(|e| err(format!("'{}': {e}", f[4])))?,
            classification: serde_json::from_value(serde_json::Value::String(f[5].to_string()))
                .map_err(|e| err(e.to_string()))?,
        });
    }
    Ok(rows)
}

/// Four decimals without the leading zero, as in `.7485`.
fn short(v: f64) -> String {
    let s = format!("{v:.4}");
    match s.strip_prefix("0.") {
        Some(rest) => format!(".{rest}"),
        None => s,
    }
}

/// Condition rows by split columns; flags: R same as random, V same as vanilla, * distinct.
fn render_text(summaries: &[ExperimentSummary]) -> String {
    let mut splits: Vec<SplitKind> = summaries.iter().map(|s| s.split).collect();
    splits.sort();
    splits.dedup();
    let mut conditions: Vec<Condition> = summaries.iter().map(|s| s.condition).collect();
    conditions.sort();
    conditions.dedup();

    let mut out = format!("{:<12}", "");
    for split in &splits {
        out.push_str(&format!(" | {:^17}", split.label()));
    }
    out.push('\n');
    out.push_str(&format!("{:<12}", "condition"));
    for _ in &splits {
        out.push_str(&format!(" | {:>6} {:>6} {:>3}", "auc", "±CI", "cls"));
    }
    out.push('\n');
    out.push_str(&"-".repeat(12 + splits.len() * 20));
    out.push('\n');
    for c in conditions {
        out.push_str(&format!("{:<12}", c.label()));
        for split in &splits {
            match summaries.iter().find(|s| s.condition == c && s.split == *split) {
                Some(s) => out.push_str(&format!(
                    " | {:>6} {:>6} {:>3}",
                    short(s.mean),
                    short(s.ci_halfwidth),
                    s.classification.flag()
                )),
                None => out.push_str(&format!(" | {:>6} {:>6} {:>3}", "-", "-", "")),
            }
        }
        out.push('\n');
    }
    out.push_str(&format!(
        "flags: {} same as random, {} same as vanilla, {} distinct from both\n",
        Classification::SameAsRandom.flag(),
        Classification::SameAsVanilla.flag(),
        Classification::Distinct.flag()
    ));
    out
}

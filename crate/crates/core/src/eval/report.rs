use super::EvalError;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One experiment condition's metric bundle. Metric denominators cover
/// successful generations only; `isr`'s denominator is all attempts.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalRow {
    pub condition: String,
    pub layer: Option<usize>,
    pub alpha: Option<f64>,
    pub isr: f64,
    pub amr_accented: f64,
    pub amr_neutral: f64,
    pub spk_sim: f64,
    pub cer: f64,
    pub n_samples: usize,
    pub norm_guard_events: u64,
}

impl EvalRow {
    fn csv_line(&self) -> String {
        let layer = self.layer.map(|l| l.to_string()).unwrap_or_default();
        let alpha = self.alpha.map(|a| format!("{a:.2}")).unwrap_or_default();
        format!(
            "{layer},{alpha},{:.4},{:.4},{:.4},{:.4},{:.4},{}",
            self.isr, self.amr_accented, self.amr_neutral, self.spk_sim, self.cer,
            self.norm_guard_events
        )
    }
}

pub const CSV_HEADER: &str = "layer,alpha,isr,amr_accented,amr_neutral,spk_sim,cer,norm_guard_events";

pub fn format_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

/// Parses the sweep CSV back into rows (condition and n_samples live in the
/// JSON summary, so they come back as defaults here).
pub fn parse_csv(text: &str) -> Result<Vec<EvalRow>, EvalError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != CSV_HEADER {
                return Err(EvalError::BadCsv(1));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(EvalError::BadCsv(i + 1));
        }
        let parse_f = |s: &str| s.parse::<f64>().map_err(|_| EvalError::BadCsv(i + 1));
        let layer = if fields[0].is_empty() {
            None
        } else {
            Some(fields[0].parse::<usize>().map_err(|_| EvalError::BadCsv(i + 1))?)
        };
        let alpha = if fields[1].is_empty() {
            None
        } else {
            Some(parse_f(fields[1])?)
        };
        rows.push(EvalRow {
            condition: if layer.is_none() { "baseline".into() } else { "steered".into() },
            layer,
            alpha,
            isr: parse_f(fields[2])?,
            amr_accented: parse_f(fields[3])?,
            amr_neutral: parse_f(fields[4])?,
            spk_sim: parse_f(fields[5])?,
            cer: parse_f(fields[6])?,
            n_samples: 0,
            norm_guard_events: fields[7].parse().map_err(|_| EvalError::BadCsv(i + 1))?,
        });
    }
    Ok(rows)
}

/// Provenance block for the JSON summary; artifacts are identified by digest.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReportMeta {
    pub seed: u64,
    pub checkpoint_digest: String,
    pub vector_file_digest: String,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    rows: &'a [EvalRow],
    meta: &'a ReportMeta,
}

/// Writes the CSV (baseline row first) and a JSON summary next to it.
pub fn write_report(
    rows: &[EvalRow],
    meta: &ReportMeta,
    csv_path: &Path,
    json_path: &Path,
) -> Result<(), EvalError> {
    if rows.is_empty() {
        return Err(EvalError::EmptyInput("report rows"));
    }
    let mut ordered: Vec<EvalRow> = rows.to_vec();
    ordered.sort_by_key(|r| (r.layer.is_some(), r.layer, r.alpha.map(ordered_float)));
    std::fs::write(csv_path, format_csv(&ordered))?;
    let summary = Summary {
        rows: &ordered,
        meta,
    };
    std::fs::write(
        json_path,
        serde_json::to_string_pretty(&summary).expect("summary json"),
    )?;
    Ok(())
}

fn ordered_float(x: f64) -> u64 {
    // Total order for non-negative finite alphas.
    x.to_bits()
}

use std::fmt::Write as _;
use std::path::Path;

use ldp_metrics::clinical::{multi_rater_kappa, parse_sheets, ps_table, rating_matrix, KappaEstimate, PsTable};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{read_to_string, Result};
use crate::manifest::Recorder;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub table: PsTable,
    pub cases: usize,
    pub raters: usize,
    pub kappa: Option<KappaEstimate>,
    /// Why kappa is missing, when it is.
    pub kappa_note: Option<String>,
}

impl ScoreReport {
    pub fn render(&self) -> String {
        let mut s = self.table.render();
        let _ = writeln!(s, "cases {}, raters {}", self.cases, self.raters);
        match (&self.kappa, &self.kappa_note) {
            (Some(k), _) => {
                let _ = writeln!(
                    s,
                    "kappa ({:?}) {:.4}, 95% CI [{:.4}, {:.4}] over {} resamples ({} skipped)",
                    k.method, k.kappa, k.ci.0, k.ci.1, k.resamples, k.skipped
                );
            }
            (None, Some(n)) => {
                let _ = writeln!(s, "kappa unavailable: {n}");
            }
            (None, None) => {}
        }
        s
    }
}

/// PS table across raters and sites, with agreement on binned weighted scores.
pub fn score(cfg: &PipelineConfig, sheets: &Path, out: Option<&Path>) -> Result<ScoreReport> {
    let mut rec = out.map(|o| Recorder::new("score", cfg, o)).transpose()?;
    let text = read_to_string(sheets)?;
    if let Some(r) = rec.as_mut() {
        r.input(sheets, text.as_bytes());
    }
    let rows = parse_sheets(&text)?;
    let table = ps_table(&rows, &cfg.kappa.weights)?;
    let (cases, raters, matrix) = rating_matrix(&rows, &cfg.kappa.weights)?;
    let (kappa, kappa_note) = match multi_rater_kappa(&matrix, &cfg.kappa_config()) {
        Ok(k) => (Some(k), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = ScoreReport { table, cases: cases.len(), raters: raters.len(), kappa, kappa_note };
    if let Some(mut r) = rec {
        r.output("ps_table.tsv", report.render().as_bytes())?;
        r.finish(serde_json::to_value(&report).expect("report serializes"))?;
    }
    Ok(report)
}

use std::path::Path;

use ldp_metrics::clinical::{parse_sheets, ps_table};
use ldp_metrics::report::render_table;
use serde_json::json;

use crate::config::PipelineConfig;
use crate::data::{check_grid, PreparedCorpus};
use crate::error::{read_to_string, Result};
use crate::manifest::{Recorder, RunManifest};
use crate::session::Session;

/// Generates greedily for the configured split and scores the reports.
/// The PS column is filled only from a non-empty score sheet.
pub fn eval(
    cfg: &PipelineConfig,
    checkpoint: &Path,
    corpus_dir: &Path,
    sheets: Option<&Path>,
    out: &Path,
) -> Result<RunManifest> {
    let mut rec = Recorder::new("eval", cfg, out)?;
    let corpus = PreparedCorpus::load(corpus_dir, &mut rec)?;
    let s = Session::load(checkpoint, &mut rec)?;
    let pairs = corpus.select(&corpus.indices(cfg.eval.split));
    check_grid(&pairs, s.model.config())?;
    let (scored, mut report) = s.evaluate(cfg, &pairs)?;
    if let Some(path) = sheets {
        let text = read_to_string(path)?;
        rec.input(path, text.as_bytes());
        let rows = parse_sheets(&text)?;
        if rows.is_empty() {
            log::warn!("{} has no score rows; PS left empty", path.display());
        } else {
            report.ps = Some(ps_table(&rows, &cfg.kappa.weights)?.mean);
        }
    }
    let label = checkpoint.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned());
    rec.output("generations.jsonl", scored.to_jsonl().as_bytes())?;
    rec.output("report.tsv", render_table(&[(&label, &report)]).as_bytes())?;
    let mut json_report = serde_json::to_string_pretty(&report).expect("report serializes");
    json_report.push('\n');
    rec.output("report.json", json_report.as_bytes())?;
    rec.finish(json!({ "split": cfg.eval.split, "report": report }))
}

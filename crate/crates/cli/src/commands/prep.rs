use std::path::Path;

use ldp_dataprep::io::{parse_jsonl, to_jsonl, SplitManifest, FRAMES_SCHEMA, LEDGER_SCHEMA, PAIRS_SCHEMA, SPANS_SCHEMA};
use ldp_dataprep::synth::{preset, synth_corpus};
use ldp_dataprep::{run_pipeline, stratified_split, FrameSequence, VideoReport};
use serde_json::json;

use crate::config::PipelineConfig;
use crate::data::{LEDGER_FILE, PAIRS_FILE, SPLIT_FILE};
use crate::error::{read_to_string, Result};
use crate::manifest::{Recorder, RunManifest};

/// Builds the pair corpus, its frame ledger and the stratified split.
pub fn prep(cfg: &PipelineConfig, out: &Path) -> Result<RunManifest> {
    let mut rec = Recorder::new("prep", cfg, out)?;
    let (videos, reports, prep_cfg) = match (&cfg.corpus.frames, &cfg.corpus.spans) {
        (Some(f), Some(s)) => {
            let ft = read_to_string(f)?;
            let st = read_to_string(s)?;
            rec.input(f, ft.as_bytes());
            rec.input(s, st.as_bytes());
            let videos: Vec<FrameSequence> = parse_jsonl(FRAMES_SCHEMA, &ft, &f.display().to_string())?;
            let reports: Vec<VideoReport> = parse_jsonl(SPANS_SCHEMA, &st, &s.display().to_string())?;
            (videos, reports, cfg.prep.clone().unwrap_or_default())
        }
        _ => {
            let (mut spec, prep_cfg) = preset(&cfg.corpus.preset)?;
            spec.seed = cfg.seeds().corpus;
            if let Some(v) = cfg.corpus.videos {
                spec.videos = v;
            }
            let c = synth_corpus(&spec)?;
            rec.output("frames.jsonl", to_jsonl(FRAMES_SCHEMA, &c.videos).as_bytes())?;
            rec.output("spans.jsonl", to_jsonl(SPANS_SCHEMA, &c.reports).as_bytes())?;
            (c.videos, c.reports, cfg.prep.clone().unwrap_or(prep_cfg))
        }
    };
    let output = run_pipeline(&videos, &reports, &prep_cfg)?;
    output.check_conservation(&videos)?;
    let split_cfg = cfg.split_config();
    let split = stratified_split(&output.pairs, &split_cfg)?;
    rec.output(PAIRS_FILE, to_jsonl(PAIRS_SCHEMA, &output.pairs).as_bytes())?;
    rec.output(LEDGER_FILE, to_jsonl(LEDGER_SCHEMA, &output.ledger).as_bytes())?;
    rec.output(SPLIT_FILE, SplitManifest::new(&output.pairs, &split, &split_cfg).to_json().as_bytes())?;
    let frames: usize = videos.iter().map(|v| v.frames.len()).sum();
    rec.finish(json!({
        "videos": videos.len(),
        "frames": frames,
        "pairs": output.pairs.len(),
        "train": split.train.len(),
        "test": split.test.len(),
        "fates": output.counts(),
        "midpoint_ties": output.midpoint_ties,
        "split_warnings": split.warnings,
    }))
}

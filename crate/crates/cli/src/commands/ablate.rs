use std::fmt::Write as _;
use std::path::Path;

use ldp_core::alignment::Phase;
use ldp_core::lora::rank_sweep;
use ldp_metrics::MetricReport;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::data::{build_tokenizer, check_grid, PreparedCorpus};
use crate::error::{config_err, Result};
use crate::manifest::{Recorder, RunManifest};
use crate::session::Session;

/// What an ablation varies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Axis {
    Ranks(Vec<usize>),
    /// `sft` or `sft+<phase>` for a preference phase after SFT.
    Phases(Vec<String>),
}

impl Axis {
    fn len(&self) -> usize {
        match self {
            Axis::Ranks(r) => r.len(),
            Axis::Phases(p) => p.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub params: usize,
    pub bleu1: f64,
    pub bleu4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider: f64,
    pub final_loss: f64,
}

impl AblationRow {
    fn new(variant: String, params: usize, r: &MetricReport, final_loss: f64) -> Self {
        Self {
            variant,
            params,
            bleu1: r.bleu[0],
            bleu4: r.bleu[3],
            meteor: r.meteor,
            rouge_l: r.rouge_l,
            cider: r.cider,
            final_loss,
        }
    }
}

pub fn render_rows(rows: &[AblationRow]) -> String {
    let mut s = String::from("# schema: ldp.ablation/v1\nvariant\tparams\tBLEU-1\tBLEU-4\tMETEOR\tROUGE-L\tCIDEr\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
            r.variant, r.params, r.bleu1, r.bleu4, r.meteor, r.rouge_l, r.cider
        );
    }
    s
}

fn parse_variant(v: &str) -> Result<Option<Phase>> {
    match v.split_once('+') {
        None if v == "sft" => Ok(None),
        Some(("sft", p)) => match p.parse::<Phase>()? {
            Phase::Sft => config_err("`sft+sft` is not a variant"),
            phase => Ok(Some(phase)),
        },
        _ => config_err(format!("unknown ablation variant `{v}` (expected sft or sft+<dpo|simpo|orpo>)")),
    }
}

/// Trains every variant on the training split and scores it on the
/// configured evaluation split.
pub fn ablate(cfg: &PipelineConfig, corpus_dir: &Path, axis: &Axis, out: &Path) -> Result<(Vec<AblationRow>, RunManifest)> {
    if axis.len() < 2 {
        return config_err(format!("an ablation compares at least 2 variants, got {}", axis.len()));
    }
    let mut rec = Recorder::new("ablate", cfg, out)?;
    let corpus = PreparedCorpus::load(corpus_dir, &mut rec)?;
    let train_pairs = corpus.select(&corpus.indices(cfg.train.split));
    let eval_pairs = corpus.select(&corpus.indices(cfg.eval.split));
    check_grid(&train_pairs, &cfg.model)?;
    let tok = build_tokenizer(&train_pairs, cfg.model.vocab_size)?;

    let rows = match axis {
        Axis::Ranks(ranks) => {
            let model_cfg = cfg.model_config();
            let swept = rank_sweep(&model_cfg, &cfg.lora_config(), ranks, |lcfg| {
                let mut s = Session::fresh(cfg, lcfg, tok.clone()).map_err(into_core)?;
                let set = s.examples(cfg, &train_pairs).map_err(into_core)?;
                let run = s.sft(cfg, &set).map_err(into_core)?;
                let (_, report) = s.evaluate(cfg, &eval_pairs).map_err(into_core)?;
                log::info!("rank {} done: final loss {:.4}", lcfg.rank, run.losses.last().unwrap_or(&f64::NAN));
                Ok((report, run.losses.last().copied().unwrap_or(f64::NAN)))
            })?;
            swept
                .into_iter()
                .map(|r| AblationRow::new(format!("r={}", r.rank), r.trainable, &r.metrics.0, r.metrics.1))
                .collect()
        }
        Axis::Phases(variants) => {
            let phases = variants.iter().map(|v| parse_variant(v)).collect::<Result<Vec<_>>>()?;
            let mut sft = Session::fresh(cfg, &cfg.lora_config(), tok)?;
            let set = sft.examples(cfg, &train_pairs)?;
            let sft_run = sft.sft(cfg, &set)?;
            let pairs = if phases.iter().any(Option::is_some) {
                sft.preference_pairs(cfg, &set)?.pairs
            } else {
                Vec::new()
            };
            let mut rows = Vec::with_capacity(variants.len());
            for (name, phase) in variants.iter().zip(phases) {
                let (s, last) = match phase {
                    None => (sft.clone(), sft_run.losses.last().copied().unwrap_or(f64::NAN)),
                    Some(p) => {
                        let mut s = sft.clone();
                        let reference = (p == Phase::Dpo).then_some(&sft.model);
                        let run = s.align(cfg, p, &pairs, reference)?;
                        (s, run.losses.last().copied().unwrap_or(f64::NAN))
                    }
                };
                let (_, report) = s.evaluate(cfg, &eval_pairs)?;
                rows.push(AblationRow::new(name.clone(), s.model.params().trainable_count(), &report, last));
            }
            rows
        }
    };
    rec.output("ablation.tsv", render_rows(&rows).as_bytes())?;
    let manifest = rec.finish(serde_json::to_value(&rows).expect("rows serialize"))?;
    Ok((rows, manifest))
}

/// The sweep callback speaks the core error type; keep the message and class.
fn into_core(e: crate::error::CliError) -> ldp_core::LdpError {
    use crate::error::{CliError, ErrorClass};
    match e {
        CliError::Core(c) => c,
        other => match other.class() {
            ErrorClass::Config => ldp_core::LdpError::Config(other.to_string()),
            ErrorClass::Data => ldp_core::LdpError::Data(other.to_string()),
            _ => ldp_core::LdpError::State(other.to_string()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variants_parse() {
        assert_eq!(parse_variant("sft").unwrap(), None);
        assert_eq!(parse_variant("sft+dpo").unwrap(), Some(Phase::Dpo));
        assert!(parse_variant("dpo").is_err());
        assert!(parse_variant("sft+sft").is_err());
        assert!(parse_variant("sft+ppo").is_err());
    }

    #[test]
    fn one_variant_is_rejected_before_any_work() {
        let dir = tempfile::tempdir().unwrap();
        let e = ablate(&PipelineConfig::default(), dir.path(), &Axis::Ranks(vec![8]), dir.path()).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}

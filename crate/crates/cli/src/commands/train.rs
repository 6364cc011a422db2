use std::path::Path;

use ldp_core::alignment::{Phase, TrainRun};
use ldp_core::checkpoint::{adapter_to_bytes, full_to_bytes};
use ldp_core::lora;
use serde_json::json;

use crate::config::PipelineConfig;
use crate::data::{build_tokenizer, check_grid, PreparedCorpus};
use crate::error::{config_err, CliError, Result};
use crate::manifest::{Recorder, RunManifest};
use crate::session::{held_out_win_rate, pairs_jsonl, Session};

pub const MODEL_FILE: &str = "model.ckpt";
pub const ADAPTER_FILE: &str = "adapter.ckpt";
pub const TRACE_FILE: &str = "loss_trace.tsv";
pub const PREFS_FILE: &str = "prefs.jsonl";

#[derive(Debug, Clone)]
pub struct TrainArgs<'a> {
    pub phase: Phase,
    pub corpus: &'a Path,
    /// Checkpoint the policy starts from; a fresh adapter when absent.
    pub init: Option<&'a Path>,
    /// Frozen SFT checkpoint scored against by DPO.
    pub reference: Option<&'a Path>,
    pub out: &'a Path,
}

fn check_finite(run: &TrainRun) -> Result<f64> {
    let last = run.losses.last().copied().unwrap_or(f64::NAN);
    if !last.is_finite() {
        return Err(CliError::Core(ldp_core::LdpError::Autodiff(
            ldp_core::autodiff::AutodiffError::NonFinite { op: "training loss" },
        )));
    }
    Ok(last)
}

/// Trains one phase on the training split and writes full and adapter
/// checkpoints plus the per-step loss trace.
pub fn train(cfg: &PipelineConfig, args: &TrainArgs) -> Result<RunManifest> {
    if args.phase == Phase::Dpo && args.reference.is_none() {
        return config_err("dpo needs an SFT checkpoint as reference (--reference)");
    }
    let mut rec = Recorder::new(&format!("train {}", args.phase.name()), cfg, args.out)?;
    let corpus = PreparedCorpus::load(args.corpus, &mut rec)?;
    let train_pairs = corpus.select(&corpus.indices(cfg.train.split));
    let test_pairs = corpus.select(&corpus.test);

    let reference = args.reference.map(|p| Session::load(p, &mut rec)).transpose()?;
    let mut s = match (args.init, &reference) {
        (Some(p), _) => Session::load(p, &mut rec)?,
        (None, Some(r)) => r.clone(),
        (None, None) => {
            let tok = build_tokenizer(&train_pairs, cfg.model.vocab_size)?;
            Session::fresh(cfg, &cfg.lora_config(), tok)?
        }
    };
    if s.model.lora_config().is_none() {
        lora::inject(&mut s.model, &cfg.lora_config())?;
    }
    if let Some(r) = &reference {
        if r.tok != s.tok {
            return config_err("policy and reference checkpoints use different vocabularies");
        }
    }
    check_grid(&train_pairs, s.model.config())?;
    let train_set = s.examples(cfg, &train_pairs)?;

    let mut metrics = json!({
        "phase": args.phase.name(),
        "train_examples": train_set.len(),
        "trainable_params": s.model.params().trainable_count(),
    });
    let run = if args.phase == Phase::Sft {
        s.sft(cfg, &train_set)?
    } else {
        let built = s.preference_pairs(cfg, &train_set)?;
        let test_set = s.examples(cfg, &test_pairs)?;
        let held = s.preference_pairs(cfg, &test_set)?;
        let start = s.model.clone();
        let anchor = reference.as_ref().map_or(&start, |r| &r.model);
        let before = held_out_win_rate(&s.model, anchor, &held.pairs)?;
        let run = s.align(cfg, args.phase, &built.pairs, reference.as_ref().map(|r| &r.model))?;
        let after = held_out_win_rate(&s.model, anchor, &held.pairs)?;
        rec.output(PREFS_FILE, pairs_jsonl(&built.pairs).as_bytes())?;
        metrics["preference_pairs"] = json!(built.pairs.len());
        metrics["dropped_identical"] = json!(built.dropped_identical);
        metrics["failed_generations"] = json!(built.failed.len());
        metrics["held_out_pairs"] = json!(held.pairs.len());
        metrics["win_rate_before"] = json!(before);
        metrics["win_rate_after"] = json!(after);
        run
    };
    metrics["steps"] = json!(run.losses.len());
    metrics["final_loss"] = json!(check_finite(&run)?);
    metrics["first_loss"] = json!(run.losses.first());
    rec.output(TRACE_FILE, run.trace_tsv().as_bytes())?;
    rec.output(MODEL_FILE, &full_to_bytes(&s.model, Some(&s.tok))?)?;
    rec.output(ADAPTER_FILE, &adapter_to_bytes(&s.model, Some(&s.tok))?)?;
    rec.finish(metrics)
}

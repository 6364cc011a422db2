//! Steps shared by `train`, `eval` and `ablate`.

use std::path::Path;

use ldp_core::alignment::{
    build_preference_pairs, reference_logprobs, train, win_rate, Example, PairBuild, Phase, PreferencePair,
    PromptPreset, TrainRun,
};
use ldp_core::checkpoint::{self, Kind};
use ldp_core::{generate, lora, LoraConfig, MicroModel, Strategy, Tokenizer};
use ldp_dataprep::ImageTextPair;
use ldp_metrics::{evaluate, MetricReport, TokenizedCorpus};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::data::{context, examples, report_text};
use crate::error::{data_err, CliError, Result};
use crate::manifest::Recorder;

/// A model with the vocabulary it was trained with.
#[derive(Debug, Clone)]
pub struct Session {
    pub model: MicroModel,
    pub tok: Tokenizer,
}

impl Session {
    /// Fresh base model with `lora` injected.
    pub fn fresh(cfg: &PipelineConfig, lora_cfg: &LoraConfig, tok: Tokenizer) -> Result<Self> {
        let mut model = MicroModel::new(cfg.model_config())?;
        lora::inject(&mut model, lora_cfg)?;
        Ok(Self { model, tok })
    }

    /// Loads a full or adapter checkpoint that carries its vocabulary.
    pub fn load(path: &Path, rec: &mut Recorder) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|source| CliError::File { path: path.display().to_string(), source })?;
        rec.input(path, &bytes);
        let ck = checkpoint::from_bytes(&bytes)?;
        let (model, vocab) = match ck.kind {
            Kind::Full => ck.into_model()?,
            Kind::Adapter => {
                let mut base = MicroModel::new(ck.model.clone())?;
                ck.apply_adapter(&mut base)?;
                (base, ck.vocab)
            }
        };
        let tok = vocab.ok_or_else(|| CliError::Data(format!("{} carries no vocabulary", path.display())))?;
        Ok(Self { model, tok })
    }

    pub fn prompt(&self, preset: &str) -> Result<Vec<usize>> {
        Ok(PromptPreset::named(preset)?.tokens(&self.tok))
    }

    pub fn examples(&self, cfg: &PipelineConfig, pairs: &[&ImageTextPair]) -> Result<Vec<Example>> {
        let prompt = self.prompt(&cfg.train.prompt)?;
        examples(pairs, &self.tok, &prompt, self.model.config().max_text_len)
    }

    pub fn sft(&mut self, cfg: &PipelineConfig, train_set: &[Example]) -> Result<TrainRun> {
        Ok(train(&mut self.model, Phase::Sft, &cfg.train_config(Phase::Sft), train_set, &[], None)?)
    }

    /// Expert reports against the untuned base model's answers to the
    /// prompt-engineering preset.
    pub fn preference_pairs(&self, cfg: &PipelineConfig, set: &[Example]) -> Result<PairBuild> {
        let base = MicroModel::new(self.model.config().clone())?;
        let pe = self.prompt(&cfg.prefs.prompt)?;
        let max_new = cfg.prefs.max_new.unwrap_or(self.model.config().max_text_len);
        let build = build_preference_pairs(set, &base, &pe, max_new)?;
        if !build.failed.is_empty() {
            log::warn!("{} contexts produced no usable rejected report", build.failed.len());
        }
        Ok(build)
    }

    /// Trains a preference phase. DPO scores against `reference`.
    pub fn align(
        &mut self,
        cfg: &PipelineConfig,
        phase: Phase,
        pairs: &[PreferencePair],
        reference: Option<&MicroModel>,
    ) -> Result<TrainRun> {
        if pairs.is_empty() {
            return data_err("no preference pairs to train on");
        }
        Ok(train(&mut self.model, phase, &cfg.train_config(phase), &[], pairs, reference)?)
    }

    /// Greedy reports for `pairs` under the training prompt.
    pub fn generate(&self, cfg: &PipelineConfig, pairs: &[&ImageTextPair]) -> Result<Vec<String>> {
        let prompt = self.prompt(&cfg.train.prompt)?;
        let room = self.model.config().max_text_len.saturating_sub(prompt.len());
        let max_new = cfg.eval.max_new.unwrap_or(room).min(room);
        if max_new == 0 {
            return data_err("prompt leaves no room for generation");
        }
        pairs
            .iter()
            .map(|p| {
                let ctx = context(p, &prompt)?;
                let ids = generate(&self.model, &ctx.patches, &prompt, max_new, Strategy::Greedy)?;
                Ok(self.tok.decode(&ids))
            })
            .collect()
    }

    /// Generates for `pairs` and scores against their reports.
    pub fn evaluate(&self, cfg: &PipelineConfig, pairs: &[&ImageTextPair]) -> Result<(TokenizedCorpus, MetricReport)> {
        if pairs.is_empty() {
            return data_err("evaluation split is empty");
        }
        let hyps = self.generate(cfg, pairs)?;
        let corpus = TokenizedCorpus::from_text(
            pairs.iter().zip(&hyps).map(|(p, h)| (p.id.clone(), h.clone(), vec![report_text(p)])),
        )?;
        let report = evaluate(&corpus, &cfg.eval.metrics)?;
        Ok((corpus, report))
    }
}

/// Fraction of `pairs` where `policy` prefers the expert report by a wider
/// margin than `reference` does.
pub fn held_out_win_rate(policy: &MicroModel, reference: &MicroModel, pairs: &[PreferencePair]) -> Result<Option<f64>> {
    if pairs.is_empty() {
        return Ok(None);
    }
    let refs: Vec<&PreferencePair> = pairs.iter().collect();
    let r = reference_logprobs(reference, &refs)?;
    Ok(Some(win_rate(policy, &refs, &r)?))
}

/// One preference pair as written to `prefs.jsonl`.
#[derive(Debug, Clone, Serialize)]
pub struct PairRecord<'a> {
    pub id: &'a str,
    pub chosen: &'a [usize],
    pub rejected: &'a [usize],
    pub preferred_source: &'a str,
    pub rejected_source: &'a str,
}

pub fn pairs_jsonl(pairs: &[PreferencePair]) -> String {
    let mut s = String::from("# schema: ldp.prefs/v1\n");
    for p in pairs {
        let rec = PairRecord {
            id: &p.context.id,
            chosen: &p.chosen,
            rejected: &p.rejected,
            preferred_source: &p.sources.preferred,
            rejected_source: &p.sources.rejected,
        };
        s.push_str(&serde_json::to_string(&rec).expect("pair serializes"));
        s.push('\n');
    }
    s
}

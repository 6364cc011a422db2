use std::fmt::Write as _;

use ldp_autodiff::{Tape, Var};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::losses::{dpo_loss_on, orpo_loss_on, seq_logprob_on, sft_loss_on, simpo_loss_on};
use super::{Adam, Example, FeatureCache, PreferencePair};
use crate::error::{config_err, LdpError, Result};
use crate::layers::Fwd;
use crate::model::MicroModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Sft,
    Dpo,
    Simpo,
    Orpo,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Sft => "sft",
            Phase::Dpo => "dpo",
            Phase::Simpo => "simpo",
            Phase::Orpo => "orpo",
        }
    }
}

impl std::str::FromStr for Phase {
    type Err = LdpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sft" => Ok(Phase::Sft),
            "dpo" => Ok(Phase::Dpo),
            "simpo" => Ok(Phase::Simpo),
            "orpo" => Ok(Phase::Orpo),
            _ => config_err(format!("unknown phase `{s}` (expected sft, dpo, simpo or orpo)")),
        }
    }
}

/// Hyperparameters of one training phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Preference weight for DPO and SimPO.
    pub beta: f64,
    /// SimPO target margin.
    pub gamma: f64,
    /// ORPO odds-ratio weight.
    pub lambda: f64,
    pub clip_norm: Option<f64>,
    pub shuffle: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_phase(Phase::Sft)
    }
}

impl TrainConfig {
    pub fn for_phase(phase: Phase) -> Self {
        let base = Self {
            lr: 1e-2,
            batch_size: 16,
            epochs: 10,
            beta: 0.1,
            gamma: 0.5,
            lambda: 0.25,
            clip_norm: Some(1.0),
            shuffle: true,
            seed: 0,
        };
        match phase {
            Phase::Sft | Phase::Orpo => base,
            Phase::Dpo | Phase::Simpo => Self { lr: 5e-3, ..base },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.batch_size == 0 || self.epochs == 0 {
            return config_err("lr > 0, batch_size >= 1 and epochs >= 1 required");
        }
        if !(self.beta > 0.0) || !(self.gamma >= 0.0) || !(self.lambda >= 0.0) {
            return config_err("beta > 0, gamma >= 0 and lambda >= 0 required");
        }
        Ok(())
    }
}

/// Record of a finished phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub phase: Phase,
    pub config: TrainConfig,
    /// Identifier of the frozen reference (DPO only).
    pub reference: Option<String>,
    /// One loss per optimizer step.
    pub losses: Vec<f64>,
    pub steps_per_epoch: usize,
}

impl TrainRun {
    /// Tab-separated `step epoch loss` rows behind a schema line.
    pub fn trace_tsv(&self) -> String {
        let mut s = String::from("# schema: ldp.loss_trace/v1\nstep\tepoch\tloss\n");
        for (i, l) in self.losses.iter().enumerate() {
            let _ = writeln!(s, "{}\t{}\t{:.17e}", i + 1, i / self.steps_per_epoch.max(1), l);
        }
        s
    }
}

/// One pass over `n` items in seeded batches; `loss` records the batch objective.
fn epoch(
    model: &mut MicroModel,
    n: usize,
    opt: &mut Adam,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    mut loss: impl FnMut(&MicroModel, &mut Fwd, &[usize]) -> Result<Var>,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(LdpError::Data("training set is empty".into()));
    }
    if model.params().trainable_count() == 0 {
        return Err(LdpError::State("no trainable parameters; inject adapters first".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if cfg.shuffle {
        order.shuffle(rng);
    }
    let p_drop = model.lora_config().map_or(0.0, |l| l.dropout);
    let mut drop_rng = ChaCha8Rng::seed_from_u64(rng.random());
    let mut trace = Vec::with_capacity(n.div_ceil(cfg.batch_size));
    for idx in order.chunks(cfg.batch_size) {
        let mut tape = Tape::new();
        let bound = model.bind(&mut tape);
        let (l, value) = {
            let dropout = (p_drop > 0.0).then_some((p_drop, &mut drop_rng));
            let mut f = Fwd { tape: &mut tape, bound: &bound, dropout };
            let l = loss(model, &mut f, idx)?;
            (l, f.tape.value(l).item()?)
        };
        let grads = tape.backward(l)?;
        model.params_mut().accumulate(&grads, &bound)?;
        opt.step(model.params_mut())?;
        trace.push(value);
    }
    Ok(trace)
}

/// Cross-entropy pass over `corpus`, updating only trainable parameters.
pub fn sft_epoch(
    model: &mut MicroModel,
    corpus: &[Example],
    opt: &mut Adam,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    cache: &FeatureCache,
) -> Result<Vec<f64>> {
    epoch(model, corpus.len(), opt, cfg, rng, |m, f, idx| {
        let batch: Vec<&Example> = idx.iter().map(|&i| &corpus[i]).collect();
        sft_loss_on(m, f, cache, &batch)
    })
}

/// `(log π(y_w), log π(y_l))` for every pair, without gradients.
pub fn reference_logprobs(reference: &MicroModel, pairs: &[&PreferencePair]) -> Result<Vec<(f64, f64)>> {
    let cache = FeatureCache::build(reference, pairs.iter().map(|p| &p.context))?;
    let mut out = Vec::with_capacity(pairs.len());
    for p in pairs {
        let mut tape = Tape::no_grad();
        let bound = reference.bind(&mut tape);
        let mut f = Fwd { tape: &mut tape, bound: &bound, dropout: None };
        let v = cache.visual(reference, &mut f, &p.context)?;
        let w = seq_logprob_on(reference, &mut f, v, &p.context.prompt, &p.chosen)?;
        let l = seq_logprob_on(reference, &mut f, v, &p.context.prompt, &p.rejected)?;
        out.push((tape.value(w).item()?, tape.value(l).item()?));
    }
    Ok(out)
}

pub fn dpo_epoch(
    policy: &mut MicroModel,
    pairs: &[PreferencePair],
    reference: &[(f64, f64)],
    opt: &mut Adam,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    cache: &FeatureCache,
) -> Result<Vec<f64>> {
    epoch(policy, pairs.len(), opt, cfg, rng, |m, f, idx| {
        let batch: Vec<&PreferencePair> = idx.iter().map(|&i| &pairs[i]).collect();
        let refs: Vec<(f64, f64)> = idx.iter().map(|&i| reference[i]).collect();
        dpo_loss_on(m, f, cache, &batch, &refs, cfg.beta)
    })
}

pub fn simpo_epoch(
    policy: &mut MicroModel,
    pairs: &[PreferencePair],
    opt: &mut Adam,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    cache: &FeatureCache,
) -> Result<Vec<f64>> {
    epoch(policy, pairs.len(), opt, cfg, rng, |m, f, idx| {
        let batch: Vec<&PreferencePair> = idx.iter().map(|&i| &pairs[i]).collect();
        simpo_loss_on(m, f, cache, &batch, cfg.beta, cfg.gamma)
    })
}

pub fn orpo_epoch(
    policy: &mut MicroModel,
    pairs: &[PreferencePair],
    opt: &mut Adam,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    cache: &FeatureCache,
) -> Result<Vec<f64>> {
    let mut clamped = 0;
    let trace = epoch(policy, pairs.len(), opt, cfg, rng, |m, f, idx| {
        let batch: Vec<&PreferencePair> = idx.iter().map(|&i| &pairs[i]).collect();
        let (l, d) = orpo_loss_on(m, f, cache, &batch, cfg.lambda)?;
        clamped += d.clamped;
        Ok(l)
    })?;
    if clamped > 0 {
        log::warn!("ORPO: {clamped} sequence probabilities clamped at 1 - 1e-9 this epoch");
    }
    Ok(trace)
}

/// Fraction of pairs whose policy margin `log π(y_w) − log π(y_l)` strictly
/// exceeds the reference margin.
pub fn win_rate(policy: &MicroModel, pairs: &[&PreferencePair], reference: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(LdpError::Data("win rate over an empty pair set".into()));
    }
    let mine = reference_logprobs(policy, pairs)?;
    let wins = mine
        .iter()
        .zip(reference)
        .filter(|((pw, pl), (rw, rl))| pw - pl > rw - rl)
        .count();
    Ok(wins as f64 / pairs.len() as f64)
}

/// Runs every epoch of one phase. DPO needs the frozen `reference`.
pub fn train(
    model: &mut MicroModel,
    phase: Phase,
    cfg: &TrainConfig,
    examples: &[Example],
    pairs: &[PreferencePair],
    reference: Option<&MicroModel>,
) -> Result<TrainRun> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(cfg.lr).with_clip(cfg.clip_norm);
    let mut losses = Vec::new();
    let n = if phase == Phase::Sft { examples.len() } else { pairs.len() };
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let contexts: Vec<&super::Context> = if phase == Phase::Sft {
        examples.iter().map(|e| &e.context).collect()
    } else {
        pairs.iter().map(|p| &p.context).collect()
    };
    let cache = FeatureCache::build(model, contexts)?;
    let refs = match (phase, reference) {
        (Phase::Dpo, Some(r)) => {
            if r.config().vocab_size != model.config().vocab_size {
                return config_err("policy and reference vocabularies differ");
            }
            reference_logprobs(r, &pairs.iter().collect::<Vec<_>>())?
        }
        (Phase::Dpo, None) => return config_err("DPO needs a reference model (an SFT checkpoint)"),
        _ => Vec::new(),
    };
    for e in 0..cfg.epochs {
        let trace = match phase {
            Phase::Sft => sft_epoch(model, examples, &mut opt, cfg, &mut rng, &cache)?,
            Phase::Dpo => dpo_epoch(model, pairs, &refs, &mut opt, cfg, &mut rng, &cache)?,
            Phase::Simpo => simpo_epoch(model, pairs, &mut opt, cfg, &mut rng, &cache)?,
            Phase::Orpo => orpo_epoch(model, pairs, &mut opt, cfg, &mut rng, &cache)?,
        };
        log::debug!("{} epoch {e}: last loss {:.6}", phase.name(), trace.last().copied().unwrap_or(f64::NAN));
        losses.extend(trace);
    }
    Ok(TrainRun {
        phase,
        config: cfg.clone(),
        reference: reference.map(|_| "sft-snapshot".to_string()),
        losses,
        steps_per_epoch,
    })
}

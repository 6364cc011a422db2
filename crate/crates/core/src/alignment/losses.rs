use ldp_autodiff::{AutodiffError, Tape, Var};

use super::{Context, Example, FeatureCache, PreferencePair};
use crate::error::{config_err, LdpError, Result};
use crate::layers::Fwd;
use crate::model::MicroModel;

/// Largest sequence probability admitted by the odds computation.
pub const ODDS_CLAMP: f64 = 1.0 - 1e-9;

/// A scalar loss value together with how many sequence probabilities were clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub clamped: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OrpoDiagnostics {
    /// Sequences whose mean-token probability reached the clamp.
    pub clamped: usize,
}

fn check_response(model: &MicroModel, y: &[usize]) -> Result<()> {
    if y.is_empty() {
        return Err(LdpError::Data("response must contain at least one token".into()));
    }
    let vocab = model.config().vocab_size;
    if let Some(&id) = y.iter().find(|&&id| id >= vocab) {
        return Err(AutodiffError::Vocabulary { id, vocab }.into());
    }
    Ok(())
}

/// Logits predicting each token of `y`, `[|y| × V]`.
fn response_logits(model: &MicroModel, f: &mut Fwd, visual: Var, prompt: &[usize], y: &[usize]) -> Result<Var> {
    check_response(model, y)?;
    if prompt.is_empty() {
        return Err(LdpError::Data("prompt must contain at least one token".into()));
    }
    let mut input = prompt.to_vec();
    input.extend_from_slice(&y[..y.len() - 1]);
    let logits = model.decode_on(f, Some(visual), &input)?;
    Ok(f.tape.slice_rows(logits, prompt.len() - 1, y.len())?)
}

/// `Σ_t log softmax(logits_t)[y_t]` on the tape.
pub fn seq_logprob_on(model: &MicroModel, f: &mut Fwd, visual: Var, prompt: &[usize], y: &[usize]) -> Result<Var> {
    let rows = response_logits(model, f, visual, prompt, y)?;
    let lp = f.tape.log_softmax(rows)?;
    let at: Vec<(usize, usize)> = y.iter().copied().enumerate().collect();
    let picked = f.tape.pick(lp, &at)?;
    Ok(f.tape.sum(picked)?)
}

fn mean_of(f: &mut Fwd, terms: &[Var]) -> Result<Var> {
    if terms.is_empty() {
        return Err(LdpError::Data("empty batch".into()));
    }
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = f.tape.add(acc, t)?;
    }
    Ok(f.tape.scale(acc, 1.0 / terms.len() as f64)?)
}

/// Per-example token-mean cross-entropy of `target`, averaged over the batch.
pub fn sft_loss_on(model: &MicroModel, f: &mut Fwd, cache: &FeatureCache, batch: &[&Example]) -> Result<Var> {
    let mut terms = Vec::with_capacity(batch.len());
    for ex in batch {
        let v = cache.visual(model, f, &ex.context)?;
        let rows = response_logits(model, f, v, &ex.context.prompt, &ex.target)?;
        terms.push(f.tape.cross_entropy(rows, &ex.target, None)?);
    }
    mean_of(f, &terms)
}

fn pair_logprobs(
    model: &MicroModel,
    f: &mut Fwd,
    cache: &FeatureCache,
    p: &PreferencePair,
) -> Result<(Var, Var)> {
    let v = cache.visual(model, f, &p.context)?;
    let w = seq_logprob_on(model, f, v, &p.context.prompt, &p.chosen)?;
    let l = seq_logprob_on(model, f, v, &p.context.prompt, &p.rejected)?;
    Ok((w, l))
}

/// DPO loss against precomputed reference log-probabilities `(log π_ref(y_w), log π_ref(y_l))`.
pub fn dpo_loss_on(
    policy: &MicroModel,
    f: &mut Fwd,
    cache: &FeatureCache,
    batch: &[&PreferencePair],
    reference: &[(f64, f64)],
    beta: f64,
) -> Result<Var> {
    if !(beta > 0.0) {
        return config_err(format!("beta must be positive, got {beta}"));
    }
    if reference.len() != batch.len() {
        return Err(LdpError::Shape(format!(
            "{} reference scores for {} pairs",
            reference.len(),
            batch.len()
        )));
    }
    let mut terms = Vec::with_capacity(batch.len());
    for (p, &(rw, rl)) in batch.iter().zip(reference) {
        let (w, l) = pair_logprobs(policy, f, cache, p)?;
        let d = f.tape.sub(w, l)?;
        let z = f.tape.scale(d, beta)?;
        let z = f.tape.add_scalar(z, -(beta * (rw - rl)))?;
        terms.push(f.tape.log_sigmoid(z)?);
    }
    let m = mean_of(f, &terms)?;
    Ok(f.tape.neg(m)?)
}

pub fn simpo_loss_on(
    policy: &MicroModel,
    f: &mut Fwd,
    cache: &FeatureCache,
    batch: &[&PreferencePair],
    beta: f64,
    gamma: f64,
) -> Result<Var> {
    if !(beta > 0.0) || !(gamma >= 0.0) {
        return config_err(format!("SimPO needs beta > 0 and gamma >= 0, got {beta}, {gamma}"));
    }
    let mut terms = Vec::with_capacity(batch.len());
    for p in batch {
        let (w, l) = pair_logprobs(policy, f, cache, p)?;
        let w = f.tape.scale(w, 1.0 / p.chosen.len() as f64)?;
        let l = f.tape.scale(l, 1.0 / p.rejected.len() as f64)?;
        let d = f.tape.sub(w, l)?;
        let z = f.tape.scale(d, beta)?;
        let z = f.tape.add_scalar(z, -gamma)?;
        terms.push(f.tape.log_sigmoid(z)?);
    }
    let m = mean_of(f, &terms)?;
    Ok(f.tape.neg(m)?)
}

/// `log(p / (1 − p))` with `p = exp(logprob / len)` clamped below 1.
fn log_odds(f: &mut Fwd, logprob: Var, len: usize, diag: &mut OrpoDiagnostics) -> Result<Var> {
    let mean = f.tape.scale(logprob, 1.0 / len as f64)?;
    let p = f.tape.exp(mean)?;
    if f.tape.value(p).item()? > ODDS_CLAMP {
        diag.clamped += 1;
    }
    let p = f.tape.clamp_max(p, ODDS_CLAMP)?;
    let q = f.tape.neg(p)?;
    let q = f.tape.add_scalar(q, 1.0)?;
    let lq = f.tape.log(q)?;
    Ok(f.tape.sub(mean, lq)?)
}

pub fn orpo_loss_on(
    policy: &MicroModel,
    f: &mut Fwd,
    cache: &FeatureCache,
    batch: &[&PreferencePair],
    lambda: f64,
) -> Result<(Var, OrpoDiagnostics)> {
    if !(lambda >= 0.0) {
        return config_err(format!("ORPO lambda must be nonnegative, got {lambda}"));
    }
    let mut diag = OrpoDiagnostics::default();
    let mut ce = Vec::with_capacity(batch.len());
    let mut ratio = Vec::with_capacity(batch.len());
    for p in batch {
        let (w, l) = pair_logprobs(policy, f, cache, p)?;
        let ce_w = f.tape.scale(w, -1.0 / p.chosen.len() as f64)?;
        ce.push(ce_w);
        if lambda > 0.0 {
            let ow = log_odds(f, w, p.chosen.len(), &mut diag)?;
            let ol = log_odds(f, l, p.rejected.len(), &mut diag)?;
            let d = f.tape.sub(ow, ol)?;
            ratio.push(f.tape.log_sigmoid(d)?);
        }
    }
    let sft = mean_of(f, &ce)?;
    if ratio.is_empty() {
        return Ok((sft, diag));
    }
    let r = mean_of(f, &ratio)?;
    let r = f.tape.scale(r, -lambda)?;
    Ok((f.tape.add(sft, r)?, diag))
}

fn eval<T>(model: &MicroModel, body: impl FnOnce(&mut Fwd) -> Result<T>) -> Result<T> {
    let mut tape = Tape::no_grad();
    let bound = model.bind(&mut tape);
    let mut f = Fwd { tape: &mut tape, bound: &bound, dropout: None };
    body(&mut f)
}

fn scalar(f: &Fwd, v: Var) -> Result<f64> {
    Ok(f.tape.value(v).item()?)
}

/// `log π(y | context)` without recording gradients.
pub fn seq_logprob(model: &MicroModel, ctx: &Context, y: &[usize]) -> Result<f64> {
    eval(model, |f| {
        let v = model.encode_on(f, &ctx.patches)?;
        let lp = seq_logprob_on(model, f, v, &ctx.prompt, y)?;
        scalar(f, lp)
    })
}

pub fn sft_loss(model: &MicroModel, batch: &[&Example]) -> Result<f64> {
    let cache = FeatureCache::default();
    eval(model, |f| {
        let l = sft_loss_on(model, f, &cache, batch)?;
        scalar(f, l)
    })
}

/// DPO loss of `policy` against a frozen `reference`.
pub fn dpo_loss(policy: &MicroModel, reference: &MicroModel, batch: &[&PreferencePair], beta: f64) -> Result<f64> {
    if policy.config().vocab_size != reference.config().vocab_size {
        return config_err("policy and reference vocabularies differ");
    }
    let refs = super::reference_logprobs(reference, batch)?;
    let cache = FeatureCache::default();
    eval(policy, |f| {
        let l = dpo_loss_on(policy, f, &cache, batch, &refs, beta)?;
        scalar(f, l)
    })
}

pub fn simpo_loss(policy: &MicroModel, batch: &[&PreferencePair], beta: f64, gamma: f64) -> Result<f64> {
    let cache = FeatureCache::default();
    eval(policy, |f| {
        let l = simpo_loss_on(policy, f, &cache, batch, beta, gamma)?;
        scalar(f, l)
    })
}

pub fn orpo_loss(policy: &MicroModel, batch: &[&PreferencePair], lambda: f64) -> Result<LossValue> {
    let cache = FeatureCache::default();
    eval(policy, |f| {
        let (l, d) = orpo_loss_on(policy, f, &cache, batch, lambda)?;
        Ok(LossValue { value: scalar(f, l)?, clamped: d.clamped })
    })
}

//! Low-rank adapters on attention projections.
//!
//! An adapted projection computes `y = x·Wᵀ + (alpha/r)·(x·Aᵀ)·Bᵀ` with the base
//! weight `W` frozen, `A ∈ [r × d_in]` drawn from `U(±1/√d_in)` and `B ∈ [d_out × r]`
//! starting at zero, so injection leaves the model function unchanged.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ldp_autodiff::{matmul, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{config_err, LdpError, Result};
use crate::layers::{Init, LoraAdapter};
use crate::model::MicroModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Proj {
    Q,
    K,
    V,
    O,
}

impl FromStr for Proj {
    type Err = LdpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "Q" => Ok(Proj::Q),
            "K" => Ok(Proj::K),
            "V" => Ok(Proj::V),
            "O" => Ok(Proj::O),
            _ => config_err(format!("unknown LoRA target `{s}` (expected one of Q, K, V, O)")),
        }
    }
}

impl fmt::Display for Proj {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Which part of the model receives adapters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Encoder,
    Adapter,
    Decoder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoraConfig {
    pub rank: usize,
    /// Scaling numerator; `None` means `2 · rank`.
    pub alpha: Option<f64>,
    pub targets: BTreeSet<Proj>,
    pub scopes: BTreeSet<Scope>,
    /// Restrict to these layer indices within each scope; `None` adapts every layer.
    pub layers: Option<Vec<usize>>,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for LoraConfig {
    fn default() -> Self {
        Self::preset("decoder_qkvo", 8).expect("builtin preset")
    }
}

impl LoraConfig {
    /// `decoder_qkv` or `decoder_qkvo` at the given rank.
    pub fn preset(name: &str, rank: usize) -> Result<Self> {
        let targets: BTreeSet<Proj> = match name {
            "decoder_qkv" => [Proj::Q, Proj::K, Proj::V].into(),
            "decoder_qkvo" => [Proj::Q, Proj::K, Proj::V, Proj::O].into(),
            _ => return config_err(format!("unknown LoRA preset `{name}`")),
        };
        Ok(Self {
            rank,
            alpha: None,
            targets,
            scopes: [Scope::Decoder].into(),
            layers: None,
            dropout: 0.0,
            seed: 0,
        })
    }

    pub fn with_rank(&self, rank: usize) -> Self {
        Self { rank, ..self.clone() }
    }

    pub fn scale(&self) -> f64 {
        self.alpha.unwrap_or(2.0 * self.rank as f64) / self.rank as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return config_err("LoRA rank must be at least 1");
        }
        if self.targets.is_empty() || self.scopes.is_empty() {
            return config_err("LoRA needs at least one target projection and one scope");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return config_err(format!("LoRA dropout {} outside [0, 1)", self.dropout));
        }
        if matches!(self.alpha, Some(a) if !a.is_finite()) {
            return config_err("LoRA alpha must be finite");
        }
        Ok(())
    }

    /// `(scope, layer)` pairs selected by this config, checked against the model depth.
    fn sites(&self, cfg: &ModelConfig) -> Result<Vec<(Scope, usize)>> {
        let mut out = Vec::new();
        for &scope in &self.scopes {
            let n = match scope {
                Scope::Encoder => cfg.n_enc_layers,
                Scope::Decoder => cfg.n_dec_layers,
                Scope::Adapter => 1,
            };
            match &self.layers {
                None => out.extend((0..n).map(|l| (scope, l))),
                Some(ls) => {
                    for &l in ls {
                        if l >= n {
                            return config_err(format!("LoRA layer {l} out of range for {scope:?} ({n} layers)"));
                        }
                        out.push((scope, l));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Number of adapted matrices for a model shape.
    pub fn n_matrices(&self, cfg: &ModelConfig) -> Result<usize> {
        Ok(self.sites(cfg)?.len() * self.targets.len())
    }
}

/// Adds zero-initialised adapters and freezes every base parameter.
pub fn inject(model: &mut MicroModel, cfg: &LoraConfig) -> Result<()> {
    cfg.validate()?;
    if model.lora.is_some() {
        return Err(LdpError::AlreadyInjected);
    }
    let sites = cfg.sites(model.config())?;
    let mut init = Init { rng: ChaCha8Rng::seed_from_u64(cfg.seed) };
    model.params_mut().set_all_trainable(false);
    let scale = cfg.scale();
    for (scope, layer) in sites {
        debug_assert!(layer < model.n_layers(scope));
        for &proj in &cfg.targets {
            let (name, d_in, d_out) = {
                let lin = model.projection_mut(scope, layer, proj).expect("validated site");
                (lin.name.clone(), lin.d_in, lin.d_out)
            };
            let bound = 1.0 / (d_in as f64).sqrt();
            let a = model
                .params_mut()
                .add(format!("{name}.lora_a"), init.uniform(&[cfg.rank, d_in], bound).with_grad());
            let b = model
                .params_mut()
                .add(format!("{name}.lora_b"), Tensor::zeros(&[d_out, cfg.rank]).with_grad());
            let lin = model.projection_mut(scope, layer, proj).expect("validated site");
            lin.lora = Some(LoraAdapter { a, b, rank: cfg.rank, scale, merged: false });
        }
    }
    model.lora = Some(cfg.clone());
    Ok(())
}

fn fold(model: &mut MicroModel, sign: f64, want_merged: bool) -> Result<()> {
    if model.lora.is_none() {
        return Err(LdpError::State("model has no LoRA adapters".into()));
    }
    let adapted: Vec<(crate::params::ParamId, LoraAdapter)> = model
        .linears()
        .filter_map(|l| l.lora.clone().map(|a| (l.w, a)))
        .collect();
    if adapted.iter().any(|(_, a)| a.merged == want_merged) {
        let what = if want_merged { "already merged" } else { "not merged" };
        return Err(LdpError::State(format!("adapters are {what}")));
    }
    for (w, a) in &adapted {
        let ba = matmul(model.params().get(a.b), model.params().get(a.a))?;
        let k = sign * a.scale;
        let wt = model.params_mut().get_mut(*w);
        for (x, d) in wt.data_mut().iter_mut().zip(ba.data()) {
            *x += k * d;
        }
    }
    for lin in model.linears_mut() {
        if let Some(a) = lin.lora.as_mut() {
            a.merged = want_merged;
        }
    }
    Ok(())
}

/// Folds `scale · B·A` into every adapted base weight; the adapters stay attached but inactive.
pub fn merge(model: &mut MicroModel) -> Result<()> {
    fold(model, 1.0, true)
}

/// Subtracts the folded update again and reactivates the adapters.
pub fn unmerge(model: &mut MicroModel) -> Result<()> {
    fold(model, -1.0, false)
}

/// A plain model whose weights are `W + scale · B·A`, with no adapters.
pub fn merge_and_unload(model: &MicroModel) -> Result<MicroModel> {
    let mut merged = model.clone();
    merge(&mut merged)?;
    let mut plain = MicroModel::new(model.config().clone())?;
    for id in merged.base_param_ids() {
        let name = merged.params().name(id).to_string();
        plain.params_mut().assign(&name, merged.params().get(id))?;
    }
    Ok(plain)
}

/// Trainable-parameter accounting for a LoRA setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Efficiency {
    pub trainable: f64,
    pub base_total: f64,
    /// `trainable / base_total`.
    pub fraction: f64,
    /// `base_total / trainable`.
    pub reduction: f64,
}

impl Efficiency {
    pub fn percent(&self) -> f64 {
        100.0 * self.fraction
    }
}

pub fn efficiency(base_total: f64, trainable: f64) -> Result<Efficiency> {
    if !(base_total > 0.0 && trainable > 0.0) {
        return config_err("parameter totals must be positive");
    }
    Ok(Efficiency { trainable, base_total, fraction: trainable / base_total, reduction: base_total / trainable })
}

/// `Σ r·(d_in + d_out)` over adapted matrices, which is `2·d·r` each for square projections.
pub fn trainable_param_count(model: &ModelConfig, lora: &LoraConfig) -> Result<usize> {
    lora.validate()?;
    let d = model.d_model;
    Ok(lora.n_matrices(model)? * 2 * d * lora.rank)
}

/// Accounting of an adapter config against the base model it would be injected into.
pub fn model_efficiency(model: &ModelConfig, lora: &LoraConfig) -> Result<Efficiency> {
    let t = trainable_param_count(model, lora)?;
    efficiency(model.base_param_count() as f64, t as f64)
}

/// One row of a rank sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankRow<M> {
    pub rank: usize,
    pub trainable: usize,
    pub metrics: M,
}

/// Runs `run(lora_at_rank)` for every rank in order and collects the rows.
pub fn rank_sweep<M>(
    model: &ModelConfig,
    base: &LoraConfig,
    ranks: &[usize],
    mut run: impl FnMut(&LoraConfig) -> Result<M>,
) -> Result<Vec<RankRow<M>>> {
    if ranks.is_empty() {
        return config_err("rank sweep needs at least one rank");
    }
    ranks
        .iter()
        .map(|&r| {
            let cfg = base.with_rank(r);
            let trainable = trainable_param_count(model, &cfg)?;
            Ok(RankRow { rank: r, trainable, metrics: run(&cfg)? })
        })
        .collect()
}

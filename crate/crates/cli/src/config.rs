//! Pipeline configuration read from TOML.
//!
//! Every section is optional and unknown keys are rejected. Component seeds
//! are not set here: they are all derived from the top-level `seed` (or
//! `--seed`) by [`Seeds::derive`].

use std::path::{Path, PathBuf};

use ldp_core::alignment::{Phase, TrainConfig};
use ldp_core::{LoraConfig, ModelConfig};
use ldp_dataprep::{PrepConfig, SplitConfig, SplitMode};
use ldp_metrics::clinical::{Bins, KappaConfig, KappaMethod, RubricWeights};
use ldp_metrics::EvalOptions;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_err, read_to_string, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub lora: LoraConfig,
    pub corpus: CorpusConfig,
    /// Overrides the preset's pipeline settings when present.
    pub prep: Option<PrepConfig>,
    pub split: SplitSection,
    pub train: TrainSection,
    pub prefs: PrefsConfig,
    pub eval: EvalConfig,
    pub kappa: KappaSection,
    pub ablate: AblateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    /// Synthetic corpus preset: `tiny`, `default` or `stress`.
    pub preset: String,
    pub videos: Option<usize>,
    /// Frame sequences to read instead of generating; needs `spans` too.
    pub frames: Option<PathBuf>,
    pub spans: Option<PathBuf>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self { preset: "tiny".into(), videos: None, frames: None, spans: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub train_fraction: f64,
    pub mode: SplitMode,
}

impl Default for SplitSection {
    fn default() -> Self {
        let d = SplitConfig::default();
        Self { train_fraction: d.train_fraction, mode: d.mode }
    }
}

/// Per-phase overrides of the built-in training defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseOverrides {
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    /// Global gradient-norm bound; `0` turns clipping off.
    pub clip_norm: Option<f64>,
    pub shuffle: Option<bool>,
}

impl PhaseOverrides {
    pub fn apply(&self, phase: Phase, seed: u64) -> TrainConfig {
        let d = TrainConfig::for_phase(phase);
        TrainConfig {
            lr: self.lr.unwrap_or(d.lr),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            epochs: self.epochs.unwrap_or(d.epochs),
            beta: self.beta.unwrap_or(d.beta),
            gamma: self.gamma.unwrap_or(d.gamma),
            lambda: self.lambda.unwrap_or(d.lambda),
            clip_norm: match self.clip_norm {
                Some(c) if c <= 0.0 => None,
                Some(c) => Some(c),
                None => d.clip_norm,
            },
            shuffle: self.shuffle.unwrap_or(d.shuffle),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    /// Prompt preset every example is conditioned on.
    pub prompt: String,
    /// Pairs trained on.
    pub split: Subset,
    pub sft: PhaseOverrides,
    pub dpo: PhaseOverrides,
    pub simpo: PhaseOverrides,
    pub orpo: PhaseOverrides,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            prompt: "none".into(),
            split: Subset::Train,
            sft: PhaseOverrides::default(),
            dpo: PhaseOverrides::default(),
            simpo: PhaseOverrides::default(),
            orpo: PhaseOverrides::default(),
        }
    }
}

impl TrainSection {
    pub fn phase(&self, phase: Phase, seed: u64) -> TrainConfig {
        let o = match phase {
            Phase::Sft => &self.sft,
            Phase::Dpo => &self.dpo,
            Phase::Simpo => &self.simpo,
            Phase::Orpo => &self.orpo,
        };
        o.apply(phase, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrefsConfig {
    /// Prompt preset the base model answers to produce rejected reports.
    pub prompt: String,
    /// Generation budget; `None` fills the text window.
    pub max_new: Option<usize>,
}

impl Default for PrefsConfig {
    fn default() -> Self {
        Self { prompt: "structured".into(), max_new: None }
    }
}

/// Which pairs of a prepared corpus a step uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    #[default]
    Test,
    Train,
    All,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub split: Subset,
    pub max_new: Option<usize>,
    pub metrics: EvalOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KappaSection {
    pub method: KappaMethod,
    pub bins: Bins,
    pub resamples: usize,
    pub weights: RubricWeights,
}

impl Default for KappaSection {
    fn default() -> Self {
        let d = KappaConfig::default();
        Self { method: d.method, bins: d.bins, resamples: d.resamples, weights: RubricWeights::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblateConfig {
    pub ranks: Vec<usize>,
    /// Variants such as `sft` or `sft+dpo`.
    pub phases: Vec<String>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        Self {
            ranks: vec![8, 16, 32, 64],
            phases: ["sft", "sft+dpo", "sft+simpo", "sft+orpo"].map(String::from).to_vec(),
        }
    }
}

/// Seeds of every random component of a run, drawn in a fixed order from
/// one generator seeded with the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub run: u64,
    pub corpus: u64,
    pub split: u64,
    pub model: u64,
    pub lora: u64,
    pub train: u64,
    pub kappa: u64,
}

impl Seeds {
    pub fn derive(run: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(run);
        Self {
            run,
            corpus: rng.random(),
            split: rng.random(),
            model: rng.random(),
            lora: rng.random(),
            train: rng.random(),
            kappa: rng.random(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative corpus paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&read_to_string(path)?)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.corpus.frames, &mut cfg.corpus.spans].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.lora.validate()?;
        if self.corpus.frames.is_some() != self.corpus.spans.is_some() {
            return config_err("corpus.frames and corpus.spans must be given together");
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return config_err(format!("split.train_fraction {} outside (0, 1)", self.split.train_fraction));
        }
        for phase in [Phase::Sft, Phase::Dpo, Phase::Simpo, Phase::Orpo] {
            self.train.phase(phase, 0).validate()?;
        }
        ldp_core::alignment::PromptPreset::named(&self.train.prompt)?;
        ldp_core::alignment::PromptPreset::named(&self.prefs.prompt)?;
        if self.kappa.resamples == 0 {
            return config_err("kappa.resamples must be at least 1");
        }
        Ok(())
    }

    /// This config with the run seed replaced.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self
    }

    pub fn seeds(&self) -> Seeds {
        Seeds::derive(self.seed)
    }

    /// Model config with the derived initialization seed.
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig { seed: self.seeds().model, ..self.model.clone() }
    }

    pub fn lora_config(&self) -> LoraConfig {
        LoraConfig { seed: self.seeds().lora, ..self.lora.clone() }
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig { train_fraction: self.split.train_fraction, seed: self.seeds().split, mode: self.split.mode }
    }

    pub fn kappa_config(&self) -> KappaConfig {
        KappaConfig {
            method: self.kappa.method,
            bins: self.kappa.bins.clone(),
            resamples: self.kappa.resamples,
            seed: self.seeds().kappa,
        }
    }

    pub fn train_config(&self, phase: Phase) -> TrainConfig {
        self.train.phase(phase, self.seeds().train)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

//! Supervised and preference training of adapter parameters.
//!
//! Sequence scores are sums of next-token log-probabilities of a response given
//! `(image, prompt)`. All preference objectives are built from them:
//!
//! ```text
//! DPO    −log σ(β·[(log π(y_w) − log π_ref(y_w)) − (log π(y_l) − log π_ref(y_l))])
//! SimPO  −log σ(β·(log π(y_w)/|y_w| − log π(y_l)/|y_l|) − γ)
//! ORPO   CE(y_w) + λ·(−log σ(log odds(y_w) − log odds(y_l))),  odds(y) = p/(1−p), p = exp(log π(y)/|y|)
//! ```

use std::collections::HashMap;

use ldp_autodiff::{Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{LdpError, Result};
use crate::layers::Fwd;
use crate::model::MicroModel;

mod gradcheck;
mod losses;
mod optim;
mod prefs;
mod prompts;
mod train;

pub use gradcheck::sampled_grad_check;
pub use losses::{
    dpo_loss, dpo_loss_on, orpo_loss, orpo_loss_on, seq_logprob, seq_logprob_on, sft_loss, sft_loss_on,
    simpo_loss, simpo_loss_on, LossValue, OrpoDiagnostics,
};
pub use optim::Adam;
pub use prefs::{build_preference_pairs, PairBuild};
pub use prompts::PromptPreset;
pub use train::{
    dpo_epoch, orpo_epoch, reference_logprobs, sft_epoch, simpo_epoch, train, win_rate, Phase, TrainConfig,
    TrainRun,
};

/// What a response is conditioned on.
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    pub id: String,
    /// `[rows × cols × patch_dim]`.
    pub patches: Tensor,
    pub prompt: Vec<usize>,
}

/// A context with its reference response (terminated by end-of-sequence).
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub context: Context,
    pub target: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTags {
    pub preferred: String,
    pub rejected: String,
}

impl Default for SourceTags {
    fn default() -> Self {
        Self { preferred: "expert-report".into(), rejected: "base-model-output".into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferencePair {
    pub context: Context,
    pub chosen: Vec<usize>,
    pub rejected: Vec<usize>,
    pub sources: SourceTags,
}

impl PreferencePair {
    pub fn new(context: Context, chosen: Vec<usize>, rejected: Vec<usize>) -> Result<Self> {
        if chosen.is_empty() || rejected.is_empty() {
            return Err(LdpError::Data(format!("pair `{}` has an empty response", context.id)));
        }
        if chosen == rejected {
            return Err(LdpError::Data(format!("pair `{}` has identical responses", context.id)));
        }
        Ok(Self { context, chosen, rejected, sources: SourceTags::default() })
    }
}

/// Visual features per context id, valid while the visual pathway of the
/// model they came from stays frozen.
#[derive(Debug, Clone, Default)]
pub struct FeatureCache {
    features: HashMap<String, Tensor>,
}

impl FeatureCache {
    /// Precomputes features for `contexts`; stays empty when `model` trains
    /// its encoder or adapter.
    pub fn build<'a>(model: &MicroModel, contexts: impl IntoIterator<Item = &'a Context>) -> Result<Self> {
        let mut features = HashMap::new();
        if !model.visual_is_trainable() {
            for c in contexts {
                if !features.contains_key(&c.id) {
                    features.insert(c.id.clone(), model.encode_image(&c.patches)?);
                }
            }
        }
        Ok(Self { features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Features of `ctx` on the tape, from the cache when possible.
    pub fn visual(&self, model: &MicroModel, f: &mut Fwd, ctx: &Context) -> Result<Var> {
        match self.features.get(&ctx.id) {
            Some(t) if !model.visual_is_trainable() => Ok(f.tape.constant(t.clone())),
            _ => model.encode_on(f, &ctx.patches),
        }
    }
}

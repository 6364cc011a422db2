use super::{Example, PreferencePair, SourceTags};
use crate::error::Result;
use crate::generate::{generate, Strategy};
use crate::model::MicroModel;
use crate::tokenizer::EOS;

/// Result of pairing expert reports with generated ones.
#[derive(Debug, Clone, Default)]
pub struct PairBuild {
    pub pairs: Vec<PreferencePair>,
    /// Contexts whose generation matched the expert report exactly.
    pub dropped_identical: usize,
    /// `(context id, reason)` for contexts where generation produced nothing usable.
    pub failed: Vec<(String, String)>,
}

impl PairBuild {
    pub fn valid_fraction(&self, n_contexts: usize) -> f64 {
        if n_contexts == 0 {
            0.0
        } else {
            self.pairs.len() as f64 / n_contexts as f64
        }
    }
}

/// Pairs each expert report (preferred) with `base`'s greedy continuation of
/// the prompt-engineering prompt `pe_prompt` on the same image (rejected).
///
/// Both responses end with end-of-sequence and are scored under the example's
/// own prompt.
pub fn build_preference_pairs(
    examples: &[Example],
    base: &MicroModel,
    pe_prompt: &[usize],
    max_new: usize,
) -> Result<PairBuild> {
    let mut out = PairBuild::default();
    let max_len = base.config().max_text_len;
    for ex in examples {
        let ctx = &ex.context;
        let room = max_len.saturating_sub(ctx.prompt.len()).min(max_new);
        if room == 0 {
            out.failed.push((ctx.id.clone(), "prompt leaves no room for a response".into()));
            continue;
        }
        let generated = match generate(base, &ctx.patches, pe_prompt, room, Strategy::Greedy) {
            Ok(g) => g,
            Err(e) => {
                log::warn!("generation failed for `{}`: {e}", ctx.id);
                out.failed.push((ctx.id.clone(), e.to_string()));
                continue;
            }
        };
        if generated.is_empty() {
            out.failed.push((ctx.id.clone(), "empty generation".into()));
            continue;
        }
        let mut rejected = generated;
        rejected.push(EOS);
        if rejected == ex.target {
            out.dropped_identical += 1;
            continue;
        }
        let mut pair = PreferencePair::new(ctx.clone(), ex.target.clone(), rejected)?;
        pair.sources = SourceTags::default();
        out.pairs.push(pair);
    }
    Ok(out)
}

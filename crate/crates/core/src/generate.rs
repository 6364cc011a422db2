//! Autoregressive decoding.

use ldp_autodiff::{softmax, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LdpError, Result};
use crate::model::MicroModel;
use crate::tokenizer::EOS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Greedy,
    /// Sample from the `k` most likely tokens with a seeded generator.
    TopK { k: usize, seed: u64 },
}

fn argmax(row: &[f64]) -> usize {
    // first index wins ties
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn sample_top_k(row: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx.truncate(k.max(1));
    let logits = Tensor::from_vec(vec![idx.len()], idx.iter().map(|&i| row[i]).collect())?;
    let p = softmax(&logits, 0)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, &pj) in p.data().iter().enumerate() {
        acc += pj;
        if u < acc {
            return Ok(idx[j]);
        }
    }
    Ok(idx[idx.len() - 1])
}

/// Continues `prompt` for up to `max_new` tokens, stopping at end-of-sequence or
/// the model's text-length limit. Returns the new tokens without the terminator.
pub fn generate(
    model: &MicroModel,
    patches: &Tensor,
    prompt: &[usize],
    max_new: usize,
    strategy: Strategy,
) -> Result<Vec<usize>> {
    let features = model.encode_image(patches)?;
    generate_from_features(model, &features, prompt, max_new, strategy)
}

/// As [`generate`], with visual features computed beforehand.
pub fn generate_from_features(
    model: &MicroModel,
    features: &Tensor,
    prompt: &[usize],
    max_new: usize,
    strategy: Strategy,
) -> Result<Vec<usize>> {
    if prompt.is_empty() {
        return Err(LdpError::Data("generation needs a nonempty prompt".into()));
    }
    if max_new == 0 {
        return Err(LdpError::Config("max_new must be at least 1".into()));
    }
    let max_len = model.config().max_text_len;
    let mut rng = match strategy {
        Strategy::TopK { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Strategy::Greedy => None,
    };
    let mut seq = prompt.to_vec();
    let mut out = Vec::new();
    while out.len() < max_new && seq.len() < max_len {
        let logits = model.forward_with_features(features, &seq)?;
        let last = logits.row(seq.len() - 1);
        let next = match (strategy, rng.as_mut()) {
            (Strategy::TopK { k, .. }, Some(r)) => sample_top_k(last, k, r)?,
            _ => argmax(last),
        };
        if next == EOS {
            break;
        }
        out.push(next);
        seq.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_takes_first_of_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn top_one_is_greedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_top_k(&[0.1, 2.0, -1.0], 1, &mut rng).unwrap(), 1);
    }
}

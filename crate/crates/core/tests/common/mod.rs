#![allow(dead_code)]

use ldp_core::alignment::{Context, Example, PreferencePair};
use ldp_core::autodiff::Tensor;
use ldp_core::tokenizer::{BOS, EOS};
use ldp_core::{ModelConfig, MicroModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn small_config() -> ModelConfig {
    ModelConfig {
        d_model: 16,
        n_heads: 2,
        n_enc_layers: 1,
        n_dec_layers: 2,
        vocab_size: 24,
        patch_grid: (3, 4),
        patch_dim: 5,
        max_text_len: 12,
        adapter_queries: 4,
        ff_mult: 2,
        ..Default::default()
    }
}

pub fn image(cfg: &ModelConfig, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(&[cfg.patch_grid.0, cfg.patch_grid.1, cfg.patch_dim], |_| rng.random_range(-1.0..1.0))
}

pub fn context(cfg: &ModelConfig, id: u64) -> Context {
    Context { id: format!("ctx{id}"), patches: image(cfg, 100 + id), prompt: vec![BOS] }
}

pub fn tokens(cfg: &ModelConfig, rng: &mut ChaCha8Rng, len: usize) -> Vec<usize> {
    let mut t: Vec<usize> = (0..len - 1).map(|_| rng.random_range(4..cfg.vocab_size)).collect();
    t.push(EOS);
    t
}

pub fn examples(cfg: &ModelConfig, n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n as u64)
        .map(|i| {
            let len = rng.random_range(3..7);
            Example { context: context(cfg, i), target: tokens(cfg, &mut rng, len) }
        })
        .collect()
}

pub fn pairs(cfg: &ModelConfig, n: usize, seed: u64) -> Vec<PreferencePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n as u64)
        .map(|i| {
            let (lw, ll) = (rng.random_range(3..7), rng.random_range(2..8));
            let w = tokens(cfg, &mut rng, lw);
            let mut l = tokens(cfg, &mut rng, ll);
            if l == w {
                l.insert(0, 4);
            }
            PreferencePair::new(context(cfg, i), w, l).unwrap()
        })
        .collect()
}

/// Gives every `lora_b` factor small random values so both factors carry gradient.
pub fn perturb_lora_b(model: &mut MicroModel, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = model.params().iter().filter(|(_, n, _)| n.ends_with(".lora_b")).map(|(id, _, _)| id).collect();
    for id in ids {
        for v in model.params_mut().get_mut(id).data_mut() {
            *v = rng.random_range(-0.1..0.1);
        }
    }
}

/// Zeroes the output projection so every next-token distribution is uniform.
pub fn make_uniform(model: &mut MicroModel) {
    let id = model.params().find("lm_head.w").unwrap();
    for v in model.params_mut().get_mut(id).data_mut() {
        *v = 0.0;
    }
}

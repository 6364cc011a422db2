use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Shape of the micro vision-language model.
///
/// Defaults give a model that trains on one CPU core in seconds while keeping
/// the encoder / adapter / decoder split of a full-size system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub vocab_size: usize,
    /// `(rows, cols)` of the patch grid fed to the vision encoder.
    pub patch_grid: (usize, usize),
    /// Feature width of one patch.
    pub patch_dim: usize,
    pub max_text_len: usize,
    /// Number of visual tokens the adapter compresses the patch grid into.
    pub adapter_queries: usize,
    /// Hidden width of every MLP is `ff_mult * d_model`.
    pub ff_mult: usize,
    pub rope_base: f64,
    /// Rotary 2-D positions on patch tokens in the encoder and adapter keys.
    pub rope2d_image: bool,
    /// Give adapter outputs sequential 1-D positions in the decoder; when off
    /// they are left unrotated and text positions start at 0.
    pub visual_positions: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_heads: 4,
            n_enc_layers: 2,
            n_dec_layers: 2,
            vocab_size: 512,
            patch_grid: (8, 8),
            patch_dim: 12,
            max_text_len: 48,
            adapter_queries: 16,
            ff_mult: 4,
            rope_base: 10_000.0,
            rope2d_image: true,
            visual_positions: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return config_err(format!(
                "d_model {} must be a positive multiple of n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        let hd = self.head_dim();
        if !hd.is_multiple_of(2) {
            return config_err(format!("head_dim {hd} must be even for rotary embedding"));
        }
        if self.rope2d_image && !hd.is_multiple_of(4) {
            return config_err(format!("head_dim {hd} must be divisible by 4 for 2-D rotary"));
        }
        let (r, c) = self.patch_grid;
        if r == 0 || c == 0 || self.patch_dim == 0 {
            return config_err("patch grid and patch_dim must be positive");
        }
        if self.adapter_queries == 0 || self.adapter_queries > r * c {
            return config_err(format!(
                "adapter_queries {} must be in 1..={}",
                self.adapter_queries,
                r * c
            ));
        }
        if self.vocab_size < 2 || self.max_text_len == 0 || self.ff_mult == 0 {
            return config_err("vocab_size >= 2, max_text_len >= 1 and ff_mult >= 1 required");
        }
        if self.n_dec_layers == 0 {
            return config_err("at least one decoder layer is required");
        }
        if !(self.rope_base > 1.0) {
            return config_err("rope_base must exceed 1");
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn ff_dim(&self) -> usize {
        self.ff_mult * self.d_model
    }

    pub fn n_patches(&self) -> usize {
        self.patch_grid.0 * self.patch_grid.1
    }

    /// Closed-form number of base (non-adapter) parameters.
    ///
    /// With `d = d_model`, `f = ff_dim`, `p = patch_dim`, `q = adapter_queries`,
    /// `V = vocab_size` and `L = n_enc_layers + n_dec_layers`:
    ///
    /// ```text
    /// block   = 4d² + 3d (q,k,v bias) + 2d (norm gains) + 2df
    /// total   = (p·d + d)            patch embedding
    ///         + L · block
    ///         + d                    encoder final norm
    ///         + q·d + 4d² + 3d + d   adapter queries, cross-attention, output norm
    ///         + V·d                  token embedding
    ///         + d                    decoder final norm
    ///         + V·d                  output projection
    /// ```
    pub fn base_param_count(&self) -> usize {
        let d = self.d_model;
        let f = self.ff_dim();
        let block = 4 * d * d + 3 * d + 2 * d + 2 * d * f;
        let layers = self.n_enc_layers + self.n_dec_layers;
        (self.patch_dim * d + d)
            + layers * block
            + d
            + (self.adapter_queries * d + 4 * d * d + 3 * d + d)
            + self.vocab_size * d
            + d
            + self.vocab_size * d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        ModelConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_inconsistent_shapes() {
        let bad = [
            ModelConfig { n_heads: 5, ..Default::default() },
            ModelConfig { adapter_queries: 65, ..Default::default() },
            ModelConfig { d_model: 24, n_heads: 4, ..Default::default() },
            ModelConfig { d_model: 12, n_heads: 4, rope2d_image: false, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        // head_dim 6 is fine for 1-D text rotary alone
        ModelConfig { d_model: 24, n_heads: 4, rope2d_image: false, ..Default::default() }
            .validate()
            .unwrap();
    }
}

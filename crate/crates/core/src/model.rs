//! The micro vision-language model: patch encoder, query adapter, causal decoder.
//!
//! ```text
//! patches [rows·cols × patch_dim] ─ patch embed ─ encoder blocks (2-D rotary) ─ norm
//!                                                                   │ keys / values
//! learned queries [q × d] ───────────── cross-attention ────────────┘ ─ norm ─▶ F_v [q × d]
//! [F_v ‖ token embeddings] ─ causal decoder blocks (1-D rotary) ─ norm ─ lm_head ─▶ logits [L × V]
//! ```

use std::rc::Rc;

use ldp_autodiff::{RopeTable, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::error::{LdpError, Result};
use crate::layers::{Attention, Block, Fwd, Init, Linear, Mask, NORM_EPS};
use crate::lora::{LoraConfig, Proj, Scope};
use crate::params::{Bound, ParamId, ParamStore};
use crate::rope::{PositionalScheme, Positions, RopeMode};

/// Learned query tokens attending once over the encoder output.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryAdapter {
    pub queries: ParamId,
    pub attn: Attention,
    pub norm: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroModel {
    cfg: ModelConfig,
    params: ParamStore,
    patch: Linear,
    encoder: Vec<Block>,
    enc_norm: ParamId,
    adapter: QueryAdapter,
    tok_emb: ParamId,
    decoder: Vec<Block>,
    dec_norm: ParamId,
    lm_head: Linear,
    pub(crate) lora: Option<LoraConfig>,
}

impl MicroModel {
    /// Builds a randomly initialised model; identical configs give identical weights.
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut init = Init { rng: ChaCha8Rng::seed_from_u64(cfg.seed) };
        let mut ps = ParamStore::default();
        let d = cfg.d_model;
        let (h, ff) = (cfg.n_heads, cfg.ff_dim());

        let patch = Linear::new(&mut ps, &mut init, "patch", cfg.patch_dim, d, true);
        let encoder = (0..cfg.n_enc_layers)
            .map(|i| Block::new(&mut ps, &mut init, &format!("enc.{i}"), d, h, ff))
            .collect();
        let enc_norm = ps.add("enc.norm.g", Tensor::ones(&[d]).with_grad());
        let adapter = QueryAdapter {
            queries: ps.add("adapter.queries", init.normal(&[cfg.adapter_queries, d], 1.0).with_grad()),
            attn: Attention::new(&mut ps, &mut init, "adapter.attn", d, h),
            norm: ps.add("adapter.norm.g", Tensor::ones(&[d]).with_grad()),
        };
        let tok_emb = ps.add("tok_emb", init.normal(&[cfg.vocab_size, d], 1.0).with_grad());
        let decoder = (0..cfg.n_dec_layers)
            .map(|i| Block::new(&mut ps, &mut init, &format!("dec.{i}"), d, h, ff))
            .collect();
        let dec_norm = ps.add("dec.norm.g", Tensor::ones(&[d]).with_grad());
        let lm_head = Linear::new(&mut ps, &mut init, "lm_head", d, cfg.vocab_size, false);
        // wider output spread so a normalised hidden state can single out one token
        *ps.get_mut(lm_head.w) = init.normal(&[cfg.vocab_size, d], 0.5).with_grad();

        Ok(Self {
            cfg,
            params: ps,
            patch,
            encoder,
            enc_norm,
            adapter,
            tok_emb,
            decoder,
            dec_norm,
            lm_head,
            lora: None,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn lora_config(&self) -> Option<&LoraConfig> {
        self.lora.as_ref()
    }

    /// Parameters that are not low-rank factors.
    pub fn base_param_ids(&self) -> Vec<ParamId> {
        let lora: Vec<ParamId> = self.linears().filter_map(|l| l.lora.as_ref()).flat_map(|l| [l.a, l.b]).collect();
        self.params.ids().filter(|id| !lora.contains(id)).collect()
    }

    pub(crate) fn linears(&self) -> impl Iterator<Item = &Linear> {
        let blocks = self.encoder.iter().chain(&self.decoder);
        blocks
            .flat_map(|b| {
                let mut v: Vec<&Linear> = b.attn.projections().to_vec();
                v.extend([&b.mlp.up, &b.mlp.down]);
                v
            })
            .chain(self.adapter.attn.projections())
            .chain([&self.patch, &self.lm_head])
    }

    pub(crate) fn linears_mut(&mut self) -> Vec<&mut Linear> {
        let mut out = Vec::new();
        for b in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            out.extend(b.attn.projections_mut());
            out.push(&mut b.mlp.up);
            out.push(&mut b.mlp.down);
        }
        out.extend(self.adapter.attn.projections_mut());
        out.push(&mut self.patch);
        out.push(&mut self.lm_head);
        out
    }

    /// The attention projection addressed by `(scope, layer, proj)`.
    pub(crate) fn projection_mut(&mut self, scope: Scope, layer: usize, proj: Proj) -> Option<&mut Linear> {
        let attn = match scope {
            Scope::Encoder => &mut self.encoder.get_mut(layer)?.attn,
            Scope::Decoder => &mut self.decoder.get_mut(layer)?.attn,
            Scope::Adapter => {
                if layer != 0 {
                    return None;
                }
                &mut self.adapter.attn
            }
        };
        Some(match proj {
            Proj::Q => &mut attn.q,
            Proj::K => &mut attn.k,
            Proj::V => &mut attn.v,
            Proj::O => &mut attn.o,
        })
    }

    pub(crate) fn n_layers(&self, scope: Scope) -> usize {
        match scope {
            Scope::Encoder => self.encoder.len(),
            Scope::Decoder => self.decoder.len(),
            Scope::Adapter => 1,
        }
    }

    /// True when some encoder or adapter parameter is trainable, so visual
    /// features must be recomputed on every tape.
    pub fn visual_is_trainable(&self) -> bool {
        let mut names = self.params.iter().filter(|(_, _, t)| t.requires_grad()).map(|(_, n, _)| n);
        names.any(|n| n.starts_with("patch.") || n.starts_with("enc.") || n.starts_with("adapter."))
    }

    fn check_patches(&self, patches: &Tensor) -> Result<()> {
        let (r, c) = self.cfg.patch_grid;
        let want = [r, c, self.cfg.patch_dim];
        if patches.shape() != want {
            return Err(LdpError::Shape(format!(
                "image patches {:?} do not match the configured grid {:?}",
                patches.shape(),
                want
            )));
        }
        Ok(())
    }

    fn scheme(&self, mode: RopeMode) -> PositionalScheme {
        PositionalScheme::new(mode, self.cfg.rope_base)
    }

    /// Records `F_v = adapter(encoder(patches))` on the tape; returns `[adapter_queries × d_model]`.
    pub fn encode_on(&self, f: &mut Fwd, patches: &Tensor) -> Result<Var> {
        self.check_patches(patches)?;
        let (r, c) = self.cfg.patch_grid;
        let flat = patches.clone().reshape(vec![r * c, self.cfg.patch_dim])?;
        let x = f.tape.constant(flat);
        let mut x = self.patch.forward(f, x)?;
        let rope = if self.cfg.rope2d_image {
            let t = self.scheme(RopeMode::Rope2dImage).table(&Positions::grid(r, c), self.cfg.head_dim())?;
            Some(Rc::new(t))
        } else {
            None
        };
        for b in &self.encoder {
            x = b.forward(f, x, rope.as_ref(), Mask::Full)?;
        }
        let enc = f.tape.rms_norm(x, f.p(self.enc_norm), NORM_EPS)?;
        let q = f.p(self.adapter.queries);
        let a = self.adapter.attn.forward(f, q, enc, None, rope.as_ref(), Mask::Full)?;
        let y = f.tape.add(q, a)?;
        Ok(f.tape.rms_norm(y, f.p(self.adapter.norm), NORM_EPS)?)
    }

    fn decoder_table(&self, n_visual: usize, len: usize) -> Result<Rc<RopeTable>> {
        let pos: Vec<usize> = if self.cfg.visual_positions {
            (0..n_visual + len).collect()
        } else {
            std::iter::repeat_n(0, n_visual).chain(0..len).collect()
        };
        let t = self.scheme(RopeMode::Rope1dText).table(&Positions::Linear(pos), self.cfg.head_dim())?;
        Ok(Rc::new(t))
    }

    /// Records decoder logits `[tokens.len() × vocab_size]`. `visual = None` runs
    /// the decoder as a text-only language model.
    pub fn decode_on(&self, f: &mut Fwd, visual: Option<Var>, tokens: &[usize]) -> Result<Var> {
        let len = tokens.len();
        if len == 0 {
            return Err(LdpError::Data("decoder input must contain at least one token".into()));
        }
        if len > self.cfg.max_text_len {
            return Err(LdpError::Length { len, max: self.cfg.max_text_len });
        }
        let emb = f.tape.gather_rows(f.p(self.tok_emb), tokens)?;
        let (mut x, n_visual) = match visual {
            Some(v) => {
                let n = f.tape.shape(v)[0];
                (f.tape.concat_rows(&[v, emb])?, n)
            }
            None => (emb, 0),
        };
        let rope = self.decoder_table(n_visual, len)?;
        for b in &self.decoder {
            x = b.forward(f, x, Some(&rope), Mask::Causal)?;
        }
        let text = if n_visual > 0 { f.tape.slice_rows(x, n_visual, len)? } else { x };
        let h = f.tape.rms_norm(text, f.p(self.dec_norm), NORM_EPS)?;
        self.lm_head.forward(f, h)
    }

    /// Visual features for one image, computed without recording gradients.
    pub fn encode_image(&self, patches: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::no_grad();
        let bound = self.params.bind(&mut tape);
        let mut f = Fwd { tape: &mut tape, bound: &bound, dropout: None };
        let v = self.encode_on(&mut f, patches)?;
        Ok(tape.value(v).clone())
    }

    /// Logits `[L × vocab_size]` for `tokens` conditioned on `patches`.
    pub fn forward(&self, patches: &Tensor, tokens: &[usize]) -> Result<Tensor> {
        let mut tape = Tape::no_grad();
        let bound = self.params.bind(&mut tape);
        let mut f = Fwd { tape: &mut tape, bound: &bound, dropout: None };
        let v = self.encode_on(&mut f, patches)?;
        let logits = self.decode_on(&mut f, Some(v), tokens)?;
        Ok(tape.value(logits).clone())
    }

    /// Logits from precomputed visual features.
    pub fn forward_with_features(&self, features: &Tensor, tokens: &[usize]) -> Result<Tensor> {
        let mut tape = Tape::no_grad();
        let bound = self.params.bind(&mut tape);
        let mut f = Fwd { tape: &mut tape, bound: &bound, dropout: None };
        let v = f.tape.constant(features.clone());
        let logits = self.decode_on(&mut f, Some(v), tokens)?;
        Ok(tape.value(logits).clone())
    }

    /// Decoder-only logits with the visual prefix removed (ablation hook).
    pub fn forward_text_only(&self, tokens: &[usize]) -> Result<Tensor> {
        let mut tape = Tape::no_grad();
        let bound = self.params.bind(&mut tape);
        let mut f = Fwd { tape: &mut tape, bound: &bound, dropout: None };
        let logits = self.decode_on(&mut f, None, tokens)?;
        Ok(tape.value(logits).clone())
    }

    /// Binds all parameters onto `tape`.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        self.params.bind(tape)
    }
}

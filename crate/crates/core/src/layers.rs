//! Transformer building blocks recorded onto a tape.

use std::rc::Rc;

use ldp_autodiff::{RopeTable, Tape, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::params::{Bound, ParamId, ParamStore};

pub(crate) const NORM_EPS: f64 = 1e-6;

/// State shared by every layer during one forward recording.
pub struct Fwd<'a> {
    pub tape: &'a mut Tape,
    pub bound: &'a Bound,
    /// Dropout on the input of low-rank branches: probability and mask source.
    pub dropout: Option<(f64, &'a mut ChaCha8Rng)>,
}

impl Fwd<'_> {
    pub fn p(&self, id: ParamId) -> Var {
        self.bound.var(id)
    }
}

/// Draws initial parameter values.
pub(crate) struct Init {
    pub rng: ChaCha8Rng,
}

impl Init {
    pub fn normal(&mut self, shape: &[usize], std: f64) -> Tensor {
        let dist = Normal::new(0.0, std).expect("finite std");
        Tensor::from_fn(shape, |_| dist.sample(&mut self.rng))
    }

    pub fn uniform(&mut self, shape: &[usize], bound: f64) -> Tensor {
        Tensor::from_fn(shape, |_| self.rng.random_range(-bound..bound))
    }
}

/// Low-rank update `scale · B·A` attached to a [`Linear`].
#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    pub a: ParamId,
    pub b: ParamId,
    pub rank: usize,
    pub scale: f64,
    /// Set while the update is folded into the base weight.
    pub merged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub name: String,
    pub w: ParamId,
    pub bias: Option<ParamId>,
    pub d_in: usize,
    pub d_out: usize,
    pub lora: Option<LoraAdapter>,
}

impl Linear {
    pub(crate) fn new(
        store: &mut ParamStore,
        init: &mut Init,
        name: &str,
        d_in: usize,
        d_out: usize,
        bias: bool,
    ) -> Self {
        let w = store.add(
            format!("{name}.w"),
            init.normal(&[d_out, d_in], 1.0 / (d_in as f64).sqrt()).with_grad(),
        );
        let bias = bias.then(|| store.add(format!("{name}.b"), init.normal(&[d_out], 0.02).with_grad()));
        Self { name: name.to_string(), w, bias, d_in, d_out, lora: None }
    }

    /// `x[n × d_in] → [n × d_out]`.
    pub fn forward(&self, f: &mut Fwd, x: Var) -> Result<Var> {
        let mut y = f.tape.matmul_nt(x, f.p(self.w))?;
        if let Some(b) = self.bias {
            y = f.tape.add_row(y, f.p(b))?;
        }
        if let Some(l) = self.lora.as_ref().filter(|l| !l.merged) {
            let mut xin = x;
            if let Some((p, rng)) = f.dropout.as_mut().filter(|(p, _)| *p > 0.0) {
                let keep = 1.0 - *p;
                let shape = f.tape.shape(x).to_vec();
                let mask =
                    Tensor::from_fn(&shape, |_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
                let m = f.tape.constant(mask);
                xin = f.tape.mul(x, m)?;
            }
            let xa = f.tape.matmul_nt(xin, f.p(l.a))?;
            let xab = f.tape.matmul_nt(xa, f.p(l.b))?;
            let delta = f.tape.scale(xab, l.scale)?;
            y = f.tape.add(y, delta)?;
        }
        Ok(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mask {
    Full,
    Causal,
}

/// Multi-head attention with biased q/k/v projections and an unbiased output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub n_heads: usize,
}

impl Attention {
    pub(crate) fn new(store: &mut ParamStore, init: &mut Init, name: &str, d: usize, n_heads: usize) -> Self {
        Self {
            q: Linear::new(store, init, &format!("{name}.q"), d, d, true),
            k: Linear::new(store, init, &format!("{name}.k"), d, d, true),
            v: Linear::new(store, init, &format!("{name}.v"), d, d, true),
            o: Linear::new(store, init, &format!("{name}.o"), d, d, false),
            n_heads,
        }
    }

    pub fn projections(&self) -> [&Linear; 4] {
        [&self.q, &self.k, &self.v, &self.o]
    }

    pub fn projections_mut(&mut self) -> [&mut Linear; 4] {
        [&mut self.q, &mut self.k, &mut self.v, &mut self.o]
    }

    /// Queries from `xq`, keys and values from `xkv`. Either side may be rotated.
    pub fn forward(
        &self,
        f: &mut Fwd,
        xq: Var,
        xkv: Var,
        q_rope: Option<&Rc<RopeTable>>,
        k_rope: Option<&Rc<RopeTable>>,
        mask: Mask,
    ) -> Result<Var> {
        let mut q = self.q.forward(f, xq)?;
        let mut k = self.k.forward(f, xkv)?;
        let v = self.v.forward(f, xkv)?;
        if let Some(t) = q_rope {
            q = f.tape.rope(q, t.clone())?;
        }
        if let Some(t) = k_rope {
            k = f.tape.rope(k, t.clone())?;
        }
        let d = f.tape.shape(q)[1];
        let hd = d / self.n_heads;
        let scale = 1.0 / (hd as f64).sqrt();
        let mut heads = Vec::with_capacity(self.n_heads);
        for h in 0..self.n_heads {
            let qh = f.tape.slice_cols(q, h * hd, hd)?;
            let kh = f.tape.slice_cols(k, h * hd, hd)?;
            let vh = f.tape.slice_cols(v, h * hd, hd)?;
            let s = f.tape.matmul_nt(qh, kh)?;
            let s = f.tape.scale(s, scale)?;
            let p = match mask {
                Mask::Full => f.tape.softmax(s, 1)?,
                Mask::Causal => f.tape.causal_softmax(s, 0)?,
            };
            heads.push(f.tape.matmul(p, vh)?);
        }
        let cat = f.tape.concat_cols(&heads)?;
        self.o.forward(f, cat)
    }
}

/// Two-matrix SiLU feed-forward.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub up: Linear,
    pub down: Linear,
}

impl Mlp {
    pub(crate) fn new(store: &mut ParamStore, init: &mut Init, name: &str, d: usize, ff: usize) -> Self {
        Self {
            up: Linear::new(store, init, &format!("{name}.up"), d, ff, false),
            down: Linear::new(store, init, &format!("{name}.down"), ff, d, false),
        }
    }

    pub fn forward(&self, f: &mut Fwd, x: Var) -> Result<Var> {
        let h = self.up.forward(f, x)?;
        let h = f.tape.silu(h)?;
        self.down.forward(f, h)
    }
}

/// Pre-norm residual block: `x + attn(norm(x))`, then `x + mlp(norm(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub norm1: ParamId,
    pub attn: Attention,
    pub norm2: ParamId,
    pub mlp: Mlp,
}

impl Block {
    pub(crate) fn new(
        store: &mut ParamStore,
        init: &mut Init,
        name: &str,
        d: usize,
        n_heads: usize,
        ff: usize,
    ) -> Self {
        Self {
            norm1: store.add(format!("{name}.norm1.g"), Tensor::ones(&[d]).with_grad()),
            attn: Attention::new(store, init, &format!("{name}.attn"), d, n_heads),
            norm2: store.add(format!("{name}.norm2.g"), Tensor::ones(&[d]).with_grad()),
            mlp: Mlp::new(store, init, &format!("{name}.mlp"), d, ff),
        }
    }

    pub fn forward(&self, f: &mut Fwd, x: Var, rope: Option<&Rc<RopeTable>>, mask: Mask) -> Result<Var> {
        let h = f.tape.rms_norm(x, f.p(self.norm1), NORM_EPS)?;
        let a = self.attn.forward(f, h, h, rope, rope, mask)?;
        let x = f.tape.add(x, a)?;
        let h = f.tape.rms_norm(x, f.p(self.norm2), NORM_EPS)?;
        let m = self.mlp.forward(f, h)?;
        Ok(f.tape.add(x, m)?)
    }
}

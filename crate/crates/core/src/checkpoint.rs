//! Checkpoint container.
//!
//! ```text
//! ldp.checkpoint/v1\n
//! {"kind":"full"|"adapter", "model":{..}, "lora":{..}|null, "merged":bool,
//!  "vocab":[..]|null, "tensors":[{"name","shape"}, ..]}\n
//! <f64 little-endian values of every listed tensor, in order>
//! ```

use std::fs;
use std::path::Path;

use ldp_autodiff::Tensor;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{LdpError, Result};
use crate::lora::{inject, LoraConfig};
use crate::model::MicroModel;
use crate::tokenizer::Tokenizer;

pub const MAGIC: &str = "ldp.checkpoint/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Full,
    Adapter,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    kind: Kind,
    model: ModelConfig,
    lora: Option<LoraConfig>,
    merged: bool,
    vocab: Option<Tokenizer>,
    tensors: Vec<Entry>,
}

/// What a checkpoint file holds once decoded.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub kind: Kind,
    pub model: ModelConfig,
    pub lora: Option<LoraConfig>,
    pub merged: bool,
    pub vocab: Option<Tokenizer>,
    pub tensors: Vec<(String, Tensor)>,
}

fn is_lora(name: &str) -> bool {
    name.ends_with(".lora_a") || name.ends_with(".lora_b")
}

fn merged_flag(model: &MicroModel) -> bool {
    model.linears().any(|l| l.lora.as_ref().is_some_and(|a| a.merged))
}

fn encode(header: &Header, tensors: &[&Tensor]) -> Result<Vec<u8>> {
    let json = serde_json::to_string(header).map_err(|e| LdpError::Format(e.to_string()))?;
    let mut out = Vec::with_capacity(json.len() + 32 + 8 * tensors.iter().map(|t| t.len()).sum::<usize>());
    out.extend_from_slice(MAGIC.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(json.as_bytes());
    out.push(b'\n');
    for t in tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Serialises every parameter of `model`.
pub fn full_to_bytes(model: &MicroModel, vocab: Option<&Tokenizer>) -> Result<Vec<u8>> {
    let ps = model.params();
    let header = Header {
        kind: Kind::Full,
        model: model.config().clone(),
        lora: model.lora_config().cloned(),
        merged: merged_flag(model),
        vocab: vocab.cloned(),
        tensors: ps.iter().map(|(_, n, t)| Entry { name: n.to_string(), shape: t.shape().to_vec() }).collect(),
    };
    let ts: Vec<&Tensor> = ps.iter().map(|(_, _, t)| t).collect();
    encode(&header, &ts)
}

/// Serialises only the low-rank factors and their config.
pub fn adapter_to_bytes(model: &MicroModel, vocab: Option<&Tokenizer>) -> Result<Vec<u8>> {
    let lora = model
        .lora_config()
        .cloned()
        .ok_or_else(|| LdpError::State("model has no LoRA adapters to save".into()))?;
    let ps = model.params();
    let picked: Vec<_> = ps.iter().filter(|(_, n, _)| is_lora(n)).collect();
    let header = Header {
        kind: Kind::Adapter,
        model: model.config().clone(),
        lora: Some(lora),
        merged: merged_flag(model),
        vocab: vocab.cloned(),
        tensors: picked.iter().map(|(_, n, t)| Entry { name: n.to_string(), shape: t.shape().to_vec() }).collect(),
    };
    let ts: Vec<&Tensor> = picked.iter().map(|(_, _, t)| *t).collect();
    encode(&header, &ts)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let fmt = |m: &str| LdpError::Format(m.to_string());
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| fmt("missing magic line"))?;
    if &bytes[..nl] != MAGIC.as_bytes() {
        return Err(fmt("not an ldp checkpoint (bad magic line)"));
    }
    let rest = &bytes[nl + 1..];
    let hl = rest.iter().position(|&b| b == b'\n').ok_or_else(|| fmt("missing header line"))?;
    let header: Header = serde_json::from_slice(&rest[..hl]).map_err(|e| LdpError::Format(e.to_string()))?;
    let mut data = &rest[hl + 1..];
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for e in &header.tensors {
        let n: usize = e.shape.iter().product();
        if data.len() < 8 * n {
            return Err(LdpError::Format(format!("truncated data for tensor `{}`", e.name)));
        }
        let (chunk, tail) = data.split_at(8 * n);
        let vals = chunk.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        tensors.push((e.name.clone(), Tensor::from_vec(e.shape.clone(), vals)?));
        data = tail;
    }
    if !data.is_empty() {
        return Err(fmt("trailing bytes after tensor data"));
    }
    Ok(Checkpoint {
        kind: header.kind,
        model: header.model,
        lora: header.lora,
        merged: header.merged,
        vocab: header.vocab,
        tensors,
    })
}

fn restore_merged(model: &mut MicroModel, merged: bool) {
    for lin in model.linears_mut() {
        if let Some(a) = lin.lora.as_mut() {
            a.merged = merged;
        }
    }
}

impl Checkpoint {
    /// Rebuilds the model stored in a full checkpoint.
    pub fn into_model(self) -> Result<(MicroModel, Option<Tokenizer>)> {
        if self.kind != Kind::Full {
            return Err(LdpError::Format("adapter checkpoint needs a base model; use apply_adapter".into()));
        }
        let mut model = MicroModel::new(self.model)?;
        if let Some(l) = &self.lora {
            inject(&mut model, l)?;
        }
        if self.tensors.len() != model.params().len() {
            return Err(LdpError::Format(format!(
                "checkpoint has {} tensors, model expects {}",
                self.tensors.len(),
                model.params().len()
            )));
        }
        for (name, t) in &self.tensors {
            model.params_mut().assign(name, t)?;
        }
        restore_merged(&mut model, self.merged);
        Ok((model, self.vocab))
    }

    /// Injects and loads the stored adapters onto a matching base model.
    pub fn apply_adapter(&self, base: &mut MicroModel) -> Result<()> {
        if self.kind != Kind::Adapter {
            return Err(LdpError::Format("not an adapter checkpoint".into()));
        }
        if base.config() != &self.model {
            return Err(LdpError::Config("adapter was trained for a different model config".into()));
        }
        let lora = self.lora.as_ref().ok_or_else(|| LdpError::Format("adapter checkpoint without LoRA config".into()))?;
        inject(base, lora)?;
        for (name, t) in &self.tensors {
            base.params_mut().assign(name, t)?;
        }
        restore_merged(base, self.merged);
        Ok(())
    }
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    from_bytes(&fs::read(path)?)
}

pub fn save_full(model: &MicroModel, vocab: Option<&Tokenizer>, path: &Path) -> Result<()> {
    Ok(fs::write(path, full_to_bytes(model, vocab)?)?)
}

pub fn save_adapter(model: &MicroModel, vocab: Option<&Tokenizer>, path: &Path) -> Result<()> {
    Ok(fs::write(path, adapter_to_bytes(model, vocab)?)?)
}

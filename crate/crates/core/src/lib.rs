//! Micro vision-language report generator with low-rank adapters and
//! preference alignment.
//!
//! A [`MicroModel`] turns a patch grid into a short report. [`lora::inject`]
//! freezes it and attaches trainable low-rank factors; the [`alignment`]
//! module trains those factors with supervised cross-entropy and with
//! DPO, SimPO or ORPO preference objectives.

pub mod alignment;
pub mod checkpoint;
mod config;
mod error;
pub mod generate;
mod layers;
pub mod lora;
mod model;
mod params;
pub mod rope;
pub mod tokenizer;

pub use config::ModelConfig;
pub use error::{LdpError, Result};
pub use generate::{generate, Strategy};
pub use layers::{Fwd, Linear, LoraAdapter};
pub use lora::{LoraConfig, Proj, Scope};
pub use model::MicroModel;
pub use params::{Bound, ParamId, ParamStore};
pub use tokenizer::Tokenizer;

pub use ldp_autodiff as autodiff;

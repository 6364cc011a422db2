use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::tokenizer::{Tokenizer, BOS};

const MINIMAL: &str = include_str!("../../data/prompts/minimal.txt");
const STRUCTURED: &str = include_str!("../../data/prompts/structured.txt");

/// A fixed prompt template placed after `BOS`; changes what the model sees,
/// never its weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPreset {
    pub name: String,
    pub text: String,
}

impl PromptPreset {
    pub const NAMES: [&'static str; 3] = ["none", "minimal", "structured"];

    pub fn named(name: &str) -> Result<Self> {
        let text = match name {
            "none" => "",
            "minimal" => MINIMAL,
            "structured" => STRUCTURED,
            _ => return config_err(format!("unknown prompt preset `{name}` (expected none, minimal or structured)")),
        };
        Ok(Self { name: name.to_string(), text: text.trim().to_string() })
    }

    /// `BOS` followed by the encoded template.
    pub fn tokens(&self, tok: &Tokenizer) -> Vec<usize> {
        let mut ids = vec![BOS];
        ids.extend(tok.encode(&self.text));
        ids
    }

    /// Template texts of every preset, for vocabulary building.
    pub fn all_texts() -> Vec<String> {
        Self::NAMES.iter().map(|n| Self::named(n).expect("builtin").text).collect()
    }
}

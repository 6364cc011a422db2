//! Prepared corpora on disk and their conversion to model inputs.

use std::collections::HashMap;
use std::path::Path;

use ldp_core::alignment::{Context, Example, PromptPreset};
use ldp_core::autodiff::Tensor;
use ldp_core::tokenizer::EOS;
use ldp_core::{ModelConfig, Tokenizer};
use ldp_dataprep::io::{parse_jsonl, SplitManifest, PAIRS_SCHEMA};
use ldp_dataprep::{ImageTextPair, PatchGrid};

use crate::config::Subset;
use crate::error::{config_err, data_err, read_to_string, CliError, Result};
use crate::manifest::Recorder;

pub const PAIRS_FILE: &str = "pairs.jsonl";
pub const LEDGER_FILE: &str = "ledger.jsonl";
pub const SPLIT_FILE: &str = "split.json";

/// Pairs and their train/test assignment, as written by `prep`.
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub pairs: Vec<ImageTextPair>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl PreparedCorpus {
    pub fn load(dir: &Path, rec: &mut Recorder) -> Result<Self> {
        let pairs_path = dir.join(PAIRS_FILE);
        let split_path = dir.join(SPLIT_FILE);
        let pairs_text = read_to_string(&pairs_path)?;
        let split_text = read_to_string(&split_path)?;
        rec.input(&pairs_path, pairs_text.as_bytes());
        rec.input(&split_path, split_text.as_bytes());
        let pairs: Vec<ImageTextPair> = parse_jsonl(PAIRS_SCHEMA, &pairs_text, &pairs_path.display().to_string())?;
        let split: SplitManifest = serde_json::from_str(&split_text)
            .map_err(|e| CliError::Data(format!("{}: {e}", split_path.display())))?;
        Self::from_parts(pairs, &split)
    }

    pub fn from_parts(pairs: Vec<ImageTextPair>, split: &SplitManifest) -> Result<Self> {
        let index: HashMap<&str, usize> = pairs.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect();
        if index.len() != pairs.len() {
            return data_err("pair ids are not unique");
        }
        let lookup = |ids: &[String]| -> Result<Vec<usize>> {
            ids.iter()
                .map(|id| index.get(id.as_str()).copied().ok_or_else(|| CliError::Data(format!("split names unknown pair `{id}`"))))
                .collect()
        };
        let train = lookup(&split.train_ids)?;
        let test = lookup(&split.test_ids)?;
        if train.len() + test.len() != pairs.len() {
            return data_err(format!(
                "split covers {} of {} pairs",
                train.len() + test.len(),
                pairs.len()
            ));
        }
        Ok(Self { pairs, train, test })
    }

    pub fn indices(&self, which: Subset) -> Vec<usize> {
        match which {
            Subset::Train => self.train.clone(),
            Subset::Test => self.test.clone(),
            Subset::All => (0..self.pairs.len()).collect(),
        }
    }

    pub fn select(&self, idx: &[usize]) -> Vec<&ImageTextPair> {
        idx.iter().map(|&i| &self.pairs[i]).collect()
    }
}

pub fn report_text(pair: &ImageTextPair) -> String {
    pair.tokens.join(" ")
}

/// Vocabulary over the given reports and every prompt template.
pub fn build_tokenizer(pairs: &[&ImageTextPair], vocab_size: usize) -> Result<Tokenizer> {
    let mut texts: Vec<String> = pairs.iter().map(|p| report_text(p)).collect();
    texts.extend(PromptPreset::all_texts());
    Ok(Tokenizer::build(texts.iter().map(String::as_str), vocab_size)?)
}

pub fn grid_tensor(grid: &PatchGrid) -> Result<Tensor> {
    Ok(Tensor::from_vec(vec![grid.rows, grid.cols, grid.dim], grid.data.clone()).map_err(ldp_core::LdpError::from)?)
}

/// Checks that the corpus patch grids fit the model input.
pub fn check_grid(pairs: &[&ImageTextPair], model: &ModelConfig) -> Result<()> {
    for p in pairs {
        let g = &p.patches;
        if (g.rows, g.cols) != model.patch_grid || g.dim != model.patch_dim {
            return config_err(format!(
                "pair `{}` has a {}x{}x{} patch grid but the model expects {}x{}x{}",
                p.id, g.rows, g.cols, g.dim, model.patch_grid.0, model.patch_grid.1, model.patch_dim
            ));
        }
    }
    Ok(())
}

pub fn context(pair: &ImageTextPair, prompt: &[usize]) -> Result<Context> {
    Ok(Context { id: pair.id.clone(), patches: grid_tensor(&pair.patches)?, prompt: prompt.to_vec() })
}

/// Supervised examples whose targets are the encoded reports plus end-of-sequence.
pub fn examples(pairs: &[&ImageTextPair], tok: &Tokenizer, prompt: &[usize], max_len: usize) -> Result<Vec<Example>> {
    pairs
        .iter()
        .map(|p| {
            let mut target = tok.encode(&report_text(p));
            target.push(EOS);
            if prompt.len() + target.len() > max_len {
                return data_err(format!(
                    "pair `{}` needs {} text positions, model allows {max_len}",
                    p.id,
                    prompt.len() + target.len()
                ));
            }
            Ok(Example { context: context(p, prompt)?, target })
        })
        .collect()
}

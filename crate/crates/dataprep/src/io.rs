//! Line-delimited JSON files, each opened by a `# schema: <id>` line.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{DataprepError, Result};
use crate::split::{Split, SplitConfig};
use crate::types::ImageTextPair;

pub const FRAMES_SCHEMA: &str = "ldp.frames/v1";
pub const SPANS_SCHEMA: &str = "ldp.spans/v1";
pub const PAIRS_SCHEMA: &str = "ldp.pairs/v1";
pub const LEDGER_SCHEMA: &str = "ldp.ledger/v1";
pub const SPLIT_SCHEMA: &str = "ldp.split/v1";

pub fn to_jsonl<T: Serialize>(schema: &str, items: &[T]) -> String {
    let mut s = format!("# schema: {schema}\n");
    for it in items {
        s.push_str(&serde_json::to_string(it).expect("records serialize"));
        s.push('\n');
    }
    s
}

/// Parses records after a mandatory schema line; `label` names the source in errors.
pub fn parse_jsonl<T: DeserializeOwned>(schema: &str, text: &str, label: &str) -> Result<Vec<T>> {
    let err = |line: usize, msg: String| DataprepError::Parse { file: label.to_string(), line, msg };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((i, l)) => {
            let got = l.trim().strip_prefix("# schema:").map(str::trim);
            if got != Some(schema) {
                return Err(err(i + 1, format!("expected `# schema: {schema}`, found `{}`", l.trim())));
            }
        }
        None => return Err(err(1, "file is empty".into())),
    }
    let mut out = Vec::new();
    for (i, l) in lines {
        if l.trim_start().starts_with('#') {
            continue;
        }
        out.push(serde_json::from_str(l).map_err(|e| err(i + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(schema: &str, path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path)?;
    parse_jsonl(schema, &text, &path.display().to_string())
}

/// Split record with the pair ids on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub schema: String,
    pub config: SplitConfig,
    pub train: usize,
    pub test: usize,
    pub per_stratum: Vec<(String, usize, usize)>,
    pub warnings: Vec<String>,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

impl SplitManifest {
    pub fn new(pairs: &[ImageTextPair], split: &Split, config: &SplitConfig) -> Self {
        let ids = |v: &[usize]| v.iter().map(|&i| pairs[i].id.clone()).collect::<Vec<_>>();
        Self {
            schema: SPLIT_SCHEMA.into(),
            config: config.clone(),
            train: split.train.len(),
            test: split.test.len(),
            per_stratum: split.per_stratum.iter().map(|(s, &(a, b))| (s.label().to_string(), a, b)).collect(),
            warnings: split.warnings.clone(),
            train_ids: ids(&split.train),
            test_ids: ids(&split.test),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

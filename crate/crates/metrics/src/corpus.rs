//! Hypothesis/reference corpora and their line-delimited JSON form.
//!
//! Each non-blank line holds `{"id": .., "hypothesis": .., "references": [..]}`.
//! Lines starting with `#` are comments; a `# schema:` comment, if present,
//! must name `ldp.corpus/v1`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, MetricsError, Result};
use crate::text::tokenize;

pub const SCHEMA: &str = "ldp.corpus/v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub hypothesis: Vec<String>,
    pub references: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenizedCorpus {
    pub items: Vec<Item>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    hypothesis: String,
    references: Vec<String>,
}

#[derive(Serialize)]
struct RawRecordOut<'a> {
    id: &'a str,
    hypothesis: &'a str,
    references: &'a [String],
}

impl TokenizedCorpus {
    /// Builds and validates a corpus from already tokenized items.
    pub fn new(items: Vec<Item>) -> Result<Self> {
        let c = Self { items };
        c.validate()?;
        Ok(c)
    }

    /// Tokenizes raw `(id, hypothesis, references)` triples.
    pub fn from_text<I, S>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S, Vec<S>)>,
        S: AsRef<str>,
    {
        let items = records
            .into_iter()
            .map(|(id, h, refs)| Item {
                id: id.as_ref().to_string(),
                hypothesis: tokenize(h.as_ref()),
                references: refs.iter().map(|r| tokenize(r.as_ref())).collect(),
            })
            .collect();
        Self::new(items)
    }

    pub fn validate(&self) -> Result<()> {
        if self.items.is_empty() {
            return invalid("corpus is empty");
        }
        for it in &self.items {
            if it.references.is_empty() {
                return invalid(format!("item `{}` has no reference", it.id));
            }
            if it.references.iter().any(Vec::is_empty) {
                return invalid(format!("item `{}` has an empty reference", it.id));
            }
            let lowered = |t: &String| t.chars().all(|c| !c.is_uppercase());
            if !it.hypothesis.iter().chain(it.references.iter().flatten()).all(lowered) {
                return invalid(format!("item `{}` contains upper-case tokens", it.id));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Indices of items whose hypothesis has no tokens.
    pub fn empty_hypotheses(&self) -> Vec<usize> {
        (0..self.items.len()).filter(|&i| self.items[i].hypothesis.is_empty()).collect()
    }

    pub fn parse_jsonl(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(comment) = t.strip_prefix('#') {
                if let Some(schema) = comment.trim().strip_prefix("schema:") {
                    if schema.trim() != SCHEMA {
                        return Err(MetricsError::Parse {
                            line: line_no,
                            msg: format!("unsupported schema `{}`, expected {SCHEMA}", schema.trim()),
                        });
                    }
                }
                continue;
            }
            let r: RawRecord = serde_json::from_str(t)
                .map_err(|e| MetricsError::Parse { line: line_no, msg: e.to_string() })?;
            if r.references.is_empty() {
                return Err(MetricsError::Parse { line: line_no, msg: format!("record `{}` has no references", r.id) });
            }
            records.push((r.id, r.hypothesis, r.references));
        }
        Self::from_text(records)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_jsonl(&std::fs::read_to_string(path)?)
    }

    /// Writes raw text records (tokens rejoined with single spaces).
    pub fn to_jsonl(&self) -> String {
        let mut s = format!("# schema: {SCHEMA}\n");
        for it in &self.items {
            let refs: Vec<String> = it.references.iter().map(|r| r.join(" ")).collect();
            let rec = RawRecordOut { id: &it.id, hypothesis: &it.hypothesis.join(" "), references: &refs };
            s.push_str(&serde_json::to_string(&rec).expect("plain strings serialize"));
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let text = "# schema: ldp.corpus/v1\n\n{\"id\":\"a\",\"hypothesis\":\"The cat.\",\"references\":[\"the cat sat\"]}\n";
        let c = TokenizedCorpus::parse_jsonl(text).unwrap();
        assert_eq!(c.items[0].hypothesis, ["the", "cat", "."]);
        assert_eq!(TokenizedCorpus::parse_jsonl(&c.to_jsonl()).unwrap(), c);
    }

    #[test]
    fn reports_line_numbers() {
        let text = "{\"id\":\"a\",\"hypothesis\":\"x\",\"references\":[\"y\"]}\n{\"id\":\"b\"}\n";
        match TokenizedCorpus::parse_jsonl(text) {
            Err(MetricsError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(TokenizedCorpus::parse_jsonl("# schema: other/v2\n").is_err());
        assert!(TokenizedCorpus::parse_jsonl("{\"id\":\"a\",\"hypothesis\":\"x\",\"references\":[]}").is_err());
    }
}

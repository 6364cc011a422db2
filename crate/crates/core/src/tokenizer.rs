//! Word-level tokenizer with byte fallback.
//!
//! Ids `0..4` are `PAD`, `BOS`, `EOS`, `SEP`; ids `4..260` are raw bytes; words
//! start at [`FIRST_WORD`]. A word missing from the vocabulary is spelled as its
//! UTF-8 bytes followed by `SEP`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const SEP: usize = 3;
const BYTE0: usize = 4;
pub const FIRST_WORD: usize = BYTE0 + 256;

/// Lowercases and splits on whitespace, with each ASCII punctuation mark as its own word.
pub fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut cur = String::new();
        for ch in chunk.chars().flat_map(char::to_lowercase) {
            if ch.is_ascii_punctuation() {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            } else {
                cur.push(ch);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Tokenizer {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Tokenizer {
    fn from(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), FIRST_WORD + i)).collect();
        Self { words, index }
    }
}

impl From<Tokenizer> for Vec<String> {
    fn from(t: Tokenizer) -> Self {
        t.words
    }
}

impl Tokenizer {
    /// Vocabulary of the most frequent words (ties broken lexicographically)
    /// that fits in `vocab_size` ids.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, vocab_size: usize) -> Result<Self> {
        if vocab_size < FIRST_WORD {
            return config_err(format!("vocab_size {vocab_size} leaves no room for words (need > {FIRST_WORD})"));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for t in texts {
            for w in split_words(t) {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(vocab_size - FIRST_WORD);
        Ok(ranked.into_iter().map(|(w, _)| w).collect::<Vec<_>>().into())
    }

    /// Highest id this tokenizer can emit, plus one.
    pub fn id_bound(&self) -> usize {
        FIRST_WORD + self.words.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        let mut ids = Vec::new();
        for w in split_words(text) {
            match self.index.get(&w) {
                Some(&id) => ids.push(id),
                None => {
                    ids.extend(w.bytes().map(|b| BYTE0 + b as usize));
                    ids.push(SEP);
                }
            }
        }
        ids
    }

    /// Space-joined words; special ids are skipped and ids past the vocabulary read as `<unk>`.
    pub fn decode(&self, ids: &[usize]) -> String {
        let mut words: Vec<String> = Vec::new();
        let mut bytes: Vec<u8> = Vec::new();
        for &id in ids {
            match id {
                PAD | BOS | EOS => {}
                SEP => {
                    if !bytes.is_empty() {
                        words.push(String::from_utf8_lossy(&bytes).into_owned());
                        bytes.clear();
                    }
                }
                b if b < FIRST_WORD => bytes.push((b - BYTE0) as u8),
                w => {
                    words.push(self.words.get(w - FIRST_WORD).map_or("<unk>", String::as_str).to_string());
                }
            }
        }
        if !bytes.is_empty() {
            words.push(String::from_utf8_lossy(&bytes).into_owned());
        }
        words.join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation_and_case() {
        assert_eq!(split_words("A 5mm Polyp, sessile."), ["a", "5mm", "polyp", ",", "sessile", "."]);
    }

    #[test]
    fn round_trip_with_fallback() {
        let tok = Tokenizer::build(["the polyp the polyp the", "sessile"], 300).unwrap();
        assert_eq!(tok.words()[0], "the");
        assert_eq!(tok.words()[1], "polyp");
        let ids = tok.encode("The polyp is sessile");
        assert!(ids.contains(&SEP));
        assert_eq!(tok.decode(&ids), "the polyp is sessile");
        assert!(ids.iter().all(|&i| i < tok.id_bound()));
        assert_eq!(tok.decode(&[BOS, FIRST_WORD, 999, EOS]), "the <unk>");
    }

    #[test]
    fn truncates_to_vocab_size() {
        let tok = Tokenizer::build(["a b c d"], FIRST_WORD + 2).unwrap();
        assert_eq!(tok.words(), ["a", "b"]);
        assert!(Tokenizer::build(["a"], 10).is_err());
        let json = serde_json::to_string(&tok).unwrap();
        assert_eq!(serde_json::from_str::<Tokenizer>(&json).unwrap(), tok);
    }
}

//! METEOR-lite: unigram alignment by exact match, then by suffix-stripped
//! stem, scored with a recall-weighted harmonic mean and a fragmentation
//! penalty. Synonym matching is not included.
//!
//! Each stage walks the hypothesis left to right and links every unaligned
//! token to the leftmost unaligned reference token it matches. A chunk is a
//! maximal run of aligned hypothesis tokens whose reference positions are
//! also adjacent and increasing.

use std::sync::OnceLock;

use crate::corpus::TokenizedCorpus;
use crate::error::Result;

const SUFFIX_DATA: &str = include_str!("../data/suffixes.txt");
/// Minimum stem length left after stripping.
const MIN_STEM: usize = 3;

fn suffixes() -> &'static [String] {
    static LIST: OnceLock<Vec<String>> = OnceLock::new();
    LIST.get_or_init(|| {
        let mut v: Vec<String> = SUFFIX_DATA
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect();
        v.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        v
    })
}

/// Strips the longest listed suffix that leaves at least three characters.
pub fn stem(word: &str) -> &str {
    for s in suffixes() {
        if let Some(rest) = word.strip_suffix(s.as_str()) {
            if rest.chars().count() >= MIN_STEM {
                return rest;
            }
        }
    }
    word
}

/// Reference position aligned to each hypothesis position.
pub fn align(hyp: &[String], reference: &[String]) -> Vec<Option<usize>> {
    let mut links = vec![None; hyp.len()];
    let mut used = vec![false; reference.len()];
    let stages: [fn(&str, &str) -> bool; 2] = [|a, b| a == b, |a, b| stem(a) == stem(b)];
    for same in stages {
        for (i, h) in hyp.iter().enumerate() {
            if links[i].is_some() {
                continue;
            }
            if let Some(j) = (0..reference.len()).find(|&j| !used[j] && same(h, &reference[j])) {
                used[j] = true;
                links[i] = Some(j);
            }
        }
    }
    links
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeteorParts {
    pub matches: usize,
    pub chunks: usize,
    pub f_mean: f64,
    pub penalty: f64,
    pub score: f64,
}

pub fn meteor_pair(hyp: &[String], reference: &[String]) -> MeteorParts {
    let links = align(hyp, reference);
    let m = links.iter().flatten().count();
    if m == 0 {
        return MeteorParts { matches: 0, chunks: 0, f_mean: 0.0, penalty: 0.0, score: 0.0 };
    }
    let mut chunks = 0;
    let mut prev: Option<usize> = None;
    for l in &links {
        match (prev, l) {
            (Some(p), Some(j)) if *j == p + 1 => {}
            (_, Some(_)) => chunks += 1,
            _ => {}
        }
        prev = *l;
    }
    let p = m as f64 / hyp.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let f_mean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m as f64).powi(3);
    MeteorParts { matches: m, chunks, f_mean, penalty, score: f_mean * (1.0 - penalty) }
}

/// Corpus mean of the per-item best-reference score.
pub fn meteor_lite(corpus: &TokenizedCorpus) -> Result<f64> {
    corpus.validate()?;
    let sum: f64 = corpus
        .items
        .iter()
        .map(|it| it.references.iter().map(|r| meteor_pair(&it.hypothesis, r).score).fold(0.0, f64::max))
        .sum();
    Ok(sum / corpus.len() as f64)
}

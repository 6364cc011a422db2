//! CIDEr: TF-IDF weighted n-gram cosine similarity for n = 1..4.
//!
//! Document frequency counts the items whose reference set contains an
//! n-gram, and `idf = ln(N / max(1, df))`. Per item the cosine to each
//! reference is averaged, averaged again over n, and scaled by 10. An
//! optional Gaussian length factor `exp(-(|h| - |r|)² / 2σ²)` multiplies
//! each reference similarity, as in CIDEr-D.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::TokenizedCorpus;
use crate::error::{MetricsError, Result};
use crate::text::ngram_counts;

pub const MAX_N: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CiderOptions {
    /// Length-penalty width; `None` keeps the plain formulation.
    pub length_sigma: Option<f64>,
}

type Vector<'a> = HashMap<&'a [String], f64>;

fn tfidf<'a>(toks: &'a [String], n: usize, df: &HashMap<&[String], usize>, log_n: f64) -> Vector<'a> {
    let counts = ngram_counts(toks, n);
    let total: usize = counts.values().sum();
    counts
        .into_iter()
        .map(|(g, c)| {
            let d = df.get(g).copied().unwrap_or(0).max(1) as f64;
            (g, c as f64 / total as f64 * (log_n - d.ln()))
        })
        .collect()
}

fn cosine(a: &Vector, b: &Vector) -> f64 {
    let dot: f64 = a.iter().map(|(g, x)| x * b.get(g).copied().unwrap_or(0.0)).sum();
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Per-item scores.
pub fn cider_items(corpus: &TokenizedCorpus, opts: &CiderOptions) -> Result<Vec<f64>> {
    corpus.validate()?;
    if corpus.len() < 2 {
        return Err(MetricsError::DegenerateIdf(corpus.len()));
    }
    let log_n = (corpus.len() as f64).ln();
    let mut scores = vec![0.0; corpus.len()];
    for n in 1..=MAX_N {
        let mut df: HashMap<&[String], usize> = HashMap::new();
        for it in &corpus.items {
            let present: HashSet<&[String]> = it.references.iter().flat_map(|r| ngram_counts(r, n).into_keys()).collect();
            for g in present {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        for (s, it) in scores.iter_mut().zip(&corpus.items) {
            let h = tfidf(&it.hypothesis, n, &df, log_n);
            let mut acc = 0.0;
            for r in &it.references {
                let mut sim = cosine(&h, &tfidf(r, n, &df, log_n));
                if let Some(sigma) = opts.length_sigma {
                    let d = it.hypothesis.len() as f64 - r.len() as f64;
                    sim *= (-d * d / (2.0 * sigma * sigma)).exp();
                }
                acc += sim;
            }
            *s += 10.0 * acc / it.references.len() as f64 / MAX_N as f64;
        }
    }
    Ok(scores)
}

pub fn cider(corpus: &TokenizedCorpus) -> Result<f64> {
    cider_with(corpus, &CiderOptions::default())
}

/// Corpus mean of the per-item scores.
pub fn cider_with(corpus: &TokenizedCorpus, opts: &CiderOptions) -> Result<f64> {
    let s = cider_items(corpus, opts)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

//! Corpus BLEU with clipped n-gram precision and a brevity penalty.
//!
//! Orders with zero clipped matches use precision `1e-9` instead of 0 so the
//! geometric mean stays defined. The reference length for each hypothesis is
//! the closest reference length, the shorter one on ties.

use serde::{Deserialize, Serialize};

use crate::corpus::{Item, TokenizedCorpus};
use crate::error::{invalid, Result};
use crate::text::ngram_counts;

pub const ZERO_PRECISION_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BleuMode {
    /// Counts pooled over the corpus before dividing.
    #[default]
    Corpus,
    /// Mean of per-item scores.
    SentenceAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    pub score: f64,
    /// Smoothed precision per order (corpus mode).
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    /// Items whose hypothesis was empty.
    pub empty_hypotheses: Vec<usize>,
}

fn closest_ref_len(item: &Item) -> usize {
    let c = item.hypothesis.len();
    item.references
        .iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0)
}

/// `(clipped matches, total)` for order `n`.
fn clipped(item: &Item, n: usize) -> (usize, usize) {
    let hyp = ngram_counts(&item.hypothesis, n);
    let refs: Vec<_> = item.references.iter().map(|r| ngram_counts(r, n)).collect();
    let mut matched = 0;
    let mut total = 0;
    for (g, &c) in &hyp {
        let max_ref = refs.iter().map(|r| r.get(g).copied().unwrap_or(0)).max().unwrap_or(0);
        matched += c.min(max_ref);
        total += c;
    }
    (matched, total)
}

fn combine(matched: &[usize], total: &[usize], c: usize, r: usize) -> (f64, Vec<f64>, f64) {
    let precisions: Vec<f64> = matched
        .iter()
        .zip(total)
        .map(|(&m, &t)| if m == 0 { ZERO_PRECISION_EPS } else { m as f64 / t as f64 })
        .collect();
    let bp = if c == 0 { 0.0 } else { (1.0 - r as f64 / c as f64).exp().min(1.0) };
    let n = precisions.len() as f64;
    let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / n;
    (bp * log_mean.exp(), precisions, bp)
}

pub fn bleu(corpus: &TokenizedCorpus, n: usize) -> Result<BleuScore> {
    bleu_with(corpus, n, BleuMode::Corpus)
}

/// BLEU-`n` for `n` in 1..=4.
pub fn bleu_with(corpus: &TokenizedCorpus, n: usize, mode: BleuMode) -> Result<BleuScore> {
    if !(1..=4).contains(&n) {
        return invalid(format!("BLEU order must be in 1..=4, got {n}"));
    }
    corpus.validate()?;
    let empty = corpus.empty_hypotheses();
    let mut matched = vec![0; n];
    let mut total = vec![0; n];
    let (mut c, mut r) = (0, 0);
    let mut sentence_sum = 0.0;
    for item in &corpus.items {
        let mut m_i = vec![0; n];
        let mut t_i = vec![0; n];
        for k in 0..n {
            (m_i[k], t_i[k]) = clipped(item, k + 1);
            matched[k] += m_i[k];
            total[k] += t_i[k];
        }
        let (c_i, r_i) = (item.hypothesis.len(), closest_ref_len(item));
        c += c_i;
        r += r_i;
        if mode == BleuMode::SentenceAverage {
            sentence_sum += combine(&m_i, &t_i, c_i, r_i).0;
        }
    }
    let (corpus_score, precisions, bp) = combine(&matched, &total, c, r);
    let score = match mode {
        BleuMode::Corpus => corpus_score,
        BleuMode::SentenceAverage => sentence_sum / corpus.len() as f64,
    };
    Ok(BleuScore { score, precisions, brevity_penalty: bp, hyp_len: c, ref_len: r, empty_hypotheses: empty })
}

//! ROUGE-L: longest-common-subsequence F1 against the best reference.

use crate::corpus::TokenizedCorpus;
use crate::error::Result;

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// F1 of LCS precision and recall; 0 when nothing is shared.
pub fn rouge_l_pair(hyp: &[String], reference: &[String]) -> f64 {
    let l = lcs_len(hyp, reference);
    if l == 0 {
        return 0.0;
    }
    let p = l as f64 / hyp.len() as f64;
    let r = l as f64 / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// Corpus mean of the per-item best-reference F1.
pub fn rouge_l(corpus: &TokenizedCorpus) -> Result<f64> {
    corpus.validate()?;
    let sum: f64 = corpus
        .items
        .iter()
        .map(|it| it.references.iter().map(|r| rouge_l_pair(&it.hypothesis, r)).fold(0.0, f64::max))
        .sum();
    Ok(sum / corpus.len() as f64)
}

//! One-call evaluation and the method-comparison table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bleu::{bleu_with, BleuMode};
use crate::cider::{cider_with, CiderOptions};
use crate::corpus::TokenizedCorpus;
use crate::error::Result;
use crate::meteor::meteor_lite;
use crate::rouge::rouge_l;

pub const SCHEMA: &str = "ldp.metric_report/v1";
pub const COLUMNS: [&str; 8] = ["BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "METEOR", "ROUGE-L", "CIDEr", "PS"];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    pub bleu_mode: BleuMode,
    pub cider: CiderOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub items: usize,
    pub bleu: [f64; 4],
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider: f64,
    /// Physician score, when one was collected for this method.
    pub ps: Option<f64>,
    pub empty_hypotheses: usize,
}

pub fn evaluate(corpus: &TokenizedCorpus, opts: &EvalOptions) -> Result<MetricReport> {
    let mut bleu = [0.0; 4];
    for (n, b) in bleu.iter_mut().enumerate() {
        *b = bleu_with(corpus, n + 1, opts.bleu_mode)?.score;
    }
    Ok(MetricReport {
        items: corpus.len(),
        bleu,
        meteor: meteor_lite(corpus)?,
        rouge_l: rouge_l(corpus)?,
        cider: cider_with(corpus, &opts.cider)?,
        ps: None,
        empty_hypotheses: corpus.empty_hypotheses().len(),
    })
}

impl MetricReport {
    pub fn values(&self) -> [Option<f64>; 8] {
        let [b1, b2, b3, b4] = self.bleu;
        [Some(b1), Some(b2), Some(b3), Some(b4), Some(self.meteor), Some(self.rouge_l), Some(self.cider), self.ps]
    }
}

/// Tab-separated table, one row per method, behind a schema line.
pub fn render_table(rows: &[(&str, &MetricReport)]) -> String {
    let mut s = format!("# schema: {SCHEMA}\nMethod\t{}\n", COLUMNS.join("\t"));
    for (name, r) in rows {
        s.push_str(name);
        for v in r.values() {
            match v {
                Some(x) => {
                    let _ = write!(s, "\t{x:.4}");
                }
                None => s.push_str("\t-"),
            }
        }
        s.push('\n');
    }
    s
}

//! Text-generation metrics and physician-score statistics.
//!
//! The NLG side scores a [`TokenizedCorpus`] of hypotheses against one or
//! more references with BLEU-1..4, METEOR-lite, ROUGE-L and CIDEr. The
//! [`clinical`] module covers the weighted rubric score, its aggregation
//! across raters, and Cohen / Fleiss agreement with bootstrap intervals.

pub mod bleu;
pub mod cider;
pub mod clinical;
pub mod corpus;
mod error;
pub mod meteor;
pub mod report;
pub mod rouge;
pub mod text;

pub use bleu::{bleu, bleu_with, BleuMode, BleuScore};
pub use cider::{cider, cider_with, CiderOptions};
pub use corpus::{Item, TokenizedCorpus};
pub use error::{MetricsError, Result};
pub use meteor::meteor_lite;
pub use report::{evaluate, EvalOptions, MetricReport};
pub use rouge::{lcs_len, rouge_l};
pub use text::tokenize;

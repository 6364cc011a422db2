//! Physician Score arithmetic and rater agreement.
//!
//! A [`ScoreSheet`] holds one rater's 1–10 scores for one case on four
//! dimensions. [`weighted_ps`] folds them with [`RubricWeights`];
//! [`aggregate_ps`] combines scores across raters or sites.

mod kappa;
mod sheets;

pub use kappa::{
    cohen_kappa, fleiss_kappa, mean_pairwise_cohen, multi_rater_kappa, Bins, KappaConfig, KappaEstimate,
    KappaMethod,
};
pub use sheets::{parse_sheets, ps_table, rating_matrix, PsColumn, PsTable, SHEET_SCHEMA};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, MetricsError, Result};

pub const DIMENSIONS: [&str; 4] = ["clinical_accuracy", "factual_completeness", "terminology", "clinical_usability"];
pub const SCORE_RANGE: (f64, f64) = (1.0, 10.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSheet {
    pub rater: String,
    pub case: String,
    /// Site or panel whose raters are averaged before cross-site aggregation.
    pub group: Option<String>,
    /// In [`DIMENSIONS`] order.
    pub scores: [f64; 4],
}

impl ScoreSheet {
    pub fn new(rater: &str, case: &str, group: Option<&str>, scores: [f64; 4]) -> Result<Self> {
        let s = Self { rater: rater.into(), case: case.into(), group: group.map(Into::into), scores };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (d, v) in DIMENSIONS.iter().zip(self.scores) {
            if !(SCORE_RANGE.0..=SCORE_RANGE.1).contains(&v) {
                return invalid(format!("{} on case {}: {d} = {v} is outside [1, 10]", self.rater, self.case));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct RubricWeights([f64; 4]);

impl Default for RubricWeights {
    fn default() -> Self {
        Self([0.4, 0.3, 0.2, 0.1])
    }
}

impl RubricWeights {
    pub fn new(w: [f64; 4]) -> Result<Self> {
        if w.iter().any(|x| !(*x >= 0.0)) {
            return invalid(format!("rubric weights must be nonnegative, got {w:?}"));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return invalid(format!("rubric weights must sum to 1, got {s}"));
        }
        Ok(Self(w))
    }

    pub fn get(&self) -> [f64; 4] {
        self.0
    }
}

impl TryFrom<[f64; 4]> for RubricWeights {
    type Error = MetricsError;

    fn try_from(w: [f64; 4]) -> Result<Self> {
        Self::new(w)
    }
}

impl From<RubricWeights> for [f64; 4] {
    fn from(w: RubricWeights) -> Self {
        w.0
    }
}

pub fn weighted_ps(sheet: &ScoreSheet, weights: &RubricWeights) -> Result<f64> {
    sheet.validate()?;
    Ok(sheet.scores.iter().zip(weights.0).map(|(s, w)| s * w).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    #[default]
    Mean,
    /// Drops one highest and one lowest value.
    Trimmed,
}

pub fn aggregate_ps(scores: &[f64], mode: Aggregate) -> Result<f64> {
    match mode {
        Aggregate::Mean => {
            if scores.is_empty() {
                return Err(MetricsError::Arity { op: "mean", min: 1, got: 0 });
            }
            Ok(scores.iter().sum::<f64>() / scores.len() as f64)
        }
        Aggregate::Trimmed => {
            if scores.len() < 3 {
                return Err(MetricsError::Arity { op: "trimmed mean", min: 3, got: scores.len() });
            }
            let mut s = scores.to_vec();
            s.sort_by(f64::total_cmp);
            let inner = &s[1..s.len() - 1];
            Ok(inner.iter().sum::<f64>() / inner.len() as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rubric_examples() {
        let w = RubricWeights::default();
        let top = ScoreSheet::new("r", "c", None, [10.0; 4]).unwrap();
        assert!((weighted_ps(&top, &w).unwrap() - 10.0).abs() < 1e-12);
        let s = ScoreSheet::new("r", "c", None, [10.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((weighted_ps(&s, &w).unwrap() - 4.6).abs() < 1e-12);
        assert!(RubricWeights::new([0.5, 0.3, 0.2, 0.1]).is_err());
        assert!(RubricWeights::new([1.2, -0.2, 0.0, 0.0]).is_err());
        assert!(ScoreSheet::new("r", "c", None, [0.5, 5.0, 5.0, 5.0]).is_err());
        assert!(serde_json::from_str::<RubricWeights>("[0.4,0.4,0.4,0.1]").is_err());
    }

    #[test]
    fn aggregation_modes() {
        let v = [6.0, 8.5, 6.5, 7.0, 8.0];
        assert_eq!(aggregate_ps(&v, Aggregate::Mean).unwrap(), 7.2);
        assert!((aggregate_ps(&v, Aggregate::Trimmed).unwrap() - 21.5 / 3.0).abs() < 1e-12);
        assert!(matches!(aggregate_ps(&v[..2], Aggregate::Trimmed), Err(MetricsError::Arity { .. })));
        assert!(aggregate_ps(&[], Aggregate::Mean).is_err());
        assert_eq!(aggregate_ps(&[5.5; 4], Aggregate::Trimmed).unwrap(), 5.5);
    }
}

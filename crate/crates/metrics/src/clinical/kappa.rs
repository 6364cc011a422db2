//! Chance-corrected agreement over categorical ratings.
//!
//! Continuous scores are first mapped to ordinal bins. The default bins are
//! 1–2, 3–4, 5–6, 7–8 and 9–10, as half-open intervals with upper edges
//! 3, 5, 7 and 9.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, MetricsError, Result};

fn undefined<T>(msg: impl Into<String>) -> Result<T> {
    Err(MetricsError::UndefinedKappa(msg.into()))
}

/// Two-rater kappa with marginal-product chance agreement.
pub fn cohen_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return invalid(format!("rating vectors differ in length ({} vs {})", a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(MetricsError::Arity { op: "cohen_kappa", min: 2, got: a.len() });
    }
    let n = a.len() as f64;
    let mut margins: BTreeMap<&T, (usize, usize)> = BTreeMap::new();
    for x in a {
        margins.entry(x).or_default().0 += 1;
    }
    for y in b {
        margins.entry(y).or_default().1 += 1;
    }
    let p_o = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let p_e: f64 = margins.values().map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n)).sum();
    if p_e >= 1.0 {
        return undefined("both raters used a single category");
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

fn check_matrix(ratings: &[Vec<usize>], min_raters: usize) -> Result<usize> {
    if ratings.len() < 2 {
        return Err(MetricsError::Arity { op: "kappa cases", min: 2, got: ratings.len() });
    }
    let k = ratings[0].len();
    if ratings.iter().any(|r| r.len() != k) {
        return invalid("every case needs a rating from every rater");
    }
    if k < min_raters {
        return Err(MetricsError::Arity { op: "kappa raters", min: min_raters, got: k });
    }
    Ok(k)
}

/// Fleiss' kappa over `ratings[case][rater]` categories.
pub fn fleiss_kappa(ratings: &[Vec<usize>]) -> Result<f64> {
    let k = check_matrix(ratings, 2)?;
    let n_cases = ratings.len() as f64;
    let kf = k as f64;
    let mut totals: BTreeMap<usize, usize> = BTreeMap::new();
    let mut p_bar = 0.0;
    for row in ratings {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &c in row {
            *counts.entry(c).or_default() += 1;
            *totals.entry(c).or_default() += 1;
        }
        let sq: usize = counts.values().map(|c| c * c).sum();
        p_bar += (sq as f64 - kf) / (kf * (kf - 1.0));
    }
    p_bar /= n_cases;
    let p_e: f64 = totals.values().map(|&c| (c as f64 / (n_cases * kf)).powi(2)).sum();
    if p_e >= 1.0 {
        return undefined("every rating falls in one category");
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Mean of Cohen's kappa over all rater pairs that have a defined value.
pub fn mean_pairwise_cohen(ratings: &[Vec<usize>]) -> Result<f64> {
    let k = check_matrix(ratings, 2)?;
    let col = |j: usize| ratings.iter().map(|r| r[j]).collect::<Vec<_>>();
    let mut vals = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            match cohen_kappa(&col(i), &col(j)) {
                Ok(v) => vals.push(v),
                Err(MetricsError::UndefinedKappa(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    if vals.is_empty() {
        return undefined("no rater pair uses two categories");
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Bins {
    upper: Vec<f64>,
}

impl Default for Bins {
    fn default() -> Self {
        Self { upper: vec![3.0, 5.0, 7.0, 9.0] }
    }
}

impl Bins {
    /// Strictly increasing upper edges; `len + 1` categories.
    pub fn new(upper: Vec<f64>) -> Result<Self> {
        if upper.is_empty() || upper.windows(2).any(|w| !(w[0] < w[1])) || upper.iter().any(|x| !x.is_finite()) {
            return invalid(format!("bin edges must be finite and strictly increasing, got {upper:?}"));
        }
        Ok(Self { upper })
    }

    pub fn category(&self, v: f64) -> usize {
        self.upper.iter().take_while(|&&e| e <= v).count()
    }

    pub fn n_categories(&self) -> usize {
        self.upper.len() + 1
    }
}

impl TryFrom<Vec<f64>> for Bins {
    type Error = MetricsError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Bins> for Vec<f64> {
    fn from(b: Bins) -> Self {
        b.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaMethod {
    #[default]
    Fleiss,
    MeanPairwiseCohen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KappaConfig {
    pub method: KappaMethod,
    pub bins: Bins,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for KappaConfig {
    fn default() -> Self {
        Self { method: KappaMethod::Fleiss, bins: Bins::default(), resamples: 2000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    pub method: KappaMethod,
    pub kappa: f64,
    /// Percentile bootstrap interval (2.5%, 97.5%) over resampled cases.
    pub ci: (f64, f64),
    pub resamples: usize,
    /// Resamples where kappa was undefined and left out.
    pub skipped: usize,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Kappa over `ratings[case][rater]` scores with a seeded case-level bootstrap.
pub fn multi_rater_kappa(ratings: &[Vec<f64>], cfg: &KappaConfig) -> Result<KappaEstimate> {
    let cats: Vec<Vec<usize>> =
        ratings.iter().map(|r| r.iter().map(|&v| cfg.bins.category(v)).collect()).collect();
    check_matrix(&cats, 3)?;
    if cfg.resamples == 0 {
        return invalid("bootstrap needs at least one resample");
    }
    let stat = |m: &[Vec<usize>]| match cfg.method {
        KappaMethod::Fleiss => fleiss_kappa(m),
        KappaMethod::MeanPairwiseCohen => mean_pairwise_cohen(m),
    };
    let kappa = stat(&cats)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut boot = Vec::with_capacity(cfg.resamples);
    let mut skipped = 0;
    let mut sample = Vec::with_capacity(cats.len());
    for _ in 0..cfg.resamples {
        sample.clear();
        for _ in 0..cats.len() {
            sample.push(cats[rng.random_range(0..cats.len())].clone());
        }
        match stat(&sample) {
            Ok(v) => boot.push(v),
            Err(MetricsError::UndefinedKappa(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if boot.is_empty() {
        return undefined("kappa was undefined in every bootstrap resample");
    }
    boot.sort_by(f64::total_cmp);
    let ci = (percentile(&boot, 0.025), percentile(&boot, 0.975));
    Ok(KappaEstimate { method: cfg.method, kappa, ci, resamples: cfg.resamples, skipped })
}

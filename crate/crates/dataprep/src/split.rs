//! Seeded stratified train/test partition.
//!
//! Within each stratum the members are shuffled and the first
//! `⌊fraction · n⌋` go to train. A stratum with fewer than two members goes
//! wholly to train with a warning. In patient mode the units are patients
//! instead of pairs, each stratified by its most frequent polyp type, so no
//! patient appears on both sides.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, data_err, Result};
use crate::types::{ImageTextPair, PolypType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    #[default]
    Pair,
    Patient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
    pub mode: SplitMode,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { train_fraction: 0.8, seed: 0, mode: SplitMode::Pair }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    /// Indices into the input, increasing.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// `(train, test)` item counts per stratum.
    pub per_stratum: BTreeMap<PolypType, (usize, usize)>,
    pub warnings: Vec<String>,
}

fn train_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64 + 1e-9).floor() as usize).min(n)
}

/// Splits by stratum label alone, with optional patient grouping.
pub fn split_indices(strata: &[PolypType], patients: &[Option<String>], cfg: &SplitConfig) -> Result<Split> {
    if strata.is_empty() {
        return data_err("nothing to split");
    }
    if strata.len() != patients.len() {
        return data_err("strata and patient lists differ in length");
    }
    if !(0.0..=1.0).contains(&cfg.train_fraction) {
        return config_err(format!("train_fraction must lie in [0, 1], got {}", cfg.train_fraction));
    }
    // units of assignment: single pairs, or all pairs of one patient
    let units: Vec<Vec<usize>> = match cfg.mode {
        SplitMode::Pair => (0..strata.len()).map(|i| vec![i]).collect(),
        SplitMode::Patient => {
            let mut by_patient: BTreeMap<String, Vec<usize>> = BTreeMap::new();
            for (i, p) in patients.iter().enumerate() {
                let key = p.clone().unwrap_or_else(|| format!("\u{0}unassigned-{i}"));
                by_patient.entry(key).or_default().push(i);
            }
            by_patient.into_values().collect()
        }
    };
    let mut groups: BTreeMap<PolypType, Vec<usize>> = BTreeMap::new();
    for (u, members) in units.iter().enumerate() {
        let mut counts: BTreeMap<PolypType, usize> = BTreeMap::new();
        for &i in members {
            *counts.entry(strata[i]).or_default() += 1;
        }
        let top = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(s, _)| *s).unwrap();
        groups.entry(top).or_default().push(u);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut split = Split { train: vec![], test: vec![], per_stratum: BTreeMap::new(), warnings: vec![] };
    for (stratum, mut us) in groups {
        let k = if us.len() < 2 {
            let w = format!("stratum {stratum} has {} unit(s); all assigned to train", us.len());
            log::warn!("{w}");
            split.warnings.push(w);
            us.len()
        } else {
            us.shuffle(&mut rng);
            train_count(cfg.train_fraction, us.len())
        };
        let tr: Vec<usize> = us[..k].iter().flat_map(|&u| units[u].iter().copied()).collect();
        let te: Vec<usize> = us[k..].iter().flat_map(|&u| units[u].iter().copied()).collect();
        split.per_stratum.insert(stratum, (tr.len(), te.len()));
        split.train.extend(tr);
        split.test.extend(te);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

pub fn stratified_split(pairs: &[ImageTextPair], cfg: &SplitConfig) -> Result<Split> {
    let strata: Vec<PolypType> = pairs.iter().map(|p| p.stratum).collect();
    let patients: Vec<Option<String>> = pairs.iter().map(|p| p.patient_id.clone()).collect();
    split_indices(&strata, &patients, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_rule() {
        assert_eq!(train_count(0.8, 5), 4);
        assert_eq!(train_count(0.8, 2314), 1851);
        assert_eq!(train_count(0.8, 10), 8);
        assert_eq!(train_count(0.8, 1), 0);
    }

    #[test]
    fn singleton_strata_go_to_train() {
        let strata = [PolypType::Adenomatous, PolypType::Serrated, PolypType::Serrated];
        let s = split_indices(&strata, &[None, None, None], &SplitConfig::default()).unwrap();
        assert!(s.train.contains(&0));
        assert_eq!(s.warnings.len(), 1);
        assert_eq!(s.per_stratum[&PolypType::Serrated], (1, 1));
        assert!(split_indices(&[], &[], &SplitConfig::default()).is_err());
    }
}

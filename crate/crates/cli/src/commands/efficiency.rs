use std::fmt::Write as _;

use ldp_core::lora::{efficiency as account, model_efficiency};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyRow {
    pub setup: String,
    pub trainable: f64,
    pub base_total: f64,
    pub percent: f64,
    pub reduction: f64,
}

/// Adapter accounting for the configured model at every ablation rank,
/// plus an explicit `(base_total, trainable)` pair when given.
pub fn efficiency(cfg: &PipelineConfig, totals: Option<(f64, f64)>) -> Result<Vec<EfficiencyRow>> {
    let mut rows = Vec::new();
    let mut ranks = vec![cfg.lora.rank];
    ranks.extend(cfg.ablate.ranks.iter().copied().filter(|r| *r != cfg.lora.rank));
    for r in ranks {
        let e = model_efficiency(&cfg.model, &cfg.lora.with_rank(r))?;
        rows.push(EfficiencyRow {
            setup: format!("micro r={r}"),
            trainable: e.trainable,
            base_total: e.base_total,
            percent: e.percent(),
            reduction: e.reduction,
        });
    }
    if let Some((base, trainable)) = totals {
        let e = account(base, trainable)?;
        rows.push(EfficiencyRow {
            setup: "given".into(),
            trainable,
            base_total: base,
            percent: e.percent(),
            reduction: e.reduction,
        });
    }
    Ok(rows)
}

pub fn render_efficiency(rows: &[EfficiencyRow]) -> String {
    let mut s = String::from("setup\ttrainable\tbase\ttrainable_pct\treduction\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{:.2}%\t{:.1}x",
            r.setup, r.trainable, r.base_total, r.percent, r.reduction
        );
    }
    s
}

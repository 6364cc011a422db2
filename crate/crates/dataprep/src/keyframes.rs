//! Length-adaptive keyframe sampling.
//!
//! The rate is `clamp(target_frames / duration, min_rate, max_rate)` frames
//! per second, giving `n = max(1, ⌊rate · duration⌋)` grid points at
//! `(k + ½) · duration / n`. Each grid point takes the nearest frame (the
//! earlier one on ties) and repeated picks collapse to one.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, data_err, Result};
use crate::types::FrameSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub target_frames: usize,
    /// Frames per second.
    pub min_rate: f64,
    pub max_rate: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { target_frames: 16, min_rate: 0.1, max_rate: 2.0 }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_frames == 0 {
            return config_err("target_frames must be at least 1");
        }
        if !(self.min_rate > 0.0) || !(self.max_rate >= self.min_rate) || !self.max_rate.is_finite() {
            return config_err(format!("need 0 < min_rate <= max_rate, got {} and {}", self.min_rate, self.max_rate));
        }
        Ok(())
    }

    pub fn rate(&self, duration: f64) -> f64 {
        (self.target_frames as f64 / duration).clamp(self.min_rate, self.max_rate)
    }

    pub fn grid(&self, duration: f64) -> Vec<f64> {
        let n = ((self.rate(duration) * duration + 1e-9).floor() as usize).max(1);
        (0..n).map(|k| (k as f64 + 0.5) * duration / n as f64).collect()
    }
}

/// Indices of the selected frames, increasing.
pub fn sample_keyframes(seq: &FrameSequence, cfg: &SamplingConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    seq.validate()?;
    if seq.frames.is_empty() {
        return data_err(format!("{}: no frames to sample", seq.video_id));
    }
    let mut picked: Vec<usize> = Vec::new();
    for g in cfg.grid(seq.duration) {
        // first index with t >= g; its predecessor is the only other candidate
        let after = seq.frames.partition_point(|f| f.t < g);
        let best = match (after.checked_sub(1), seq.frames.get(after)) {
            (Some(b), Some(a)) => {
                if g - seq.frames[b].t <= a.t - g {
                    b
                } else {
                    after
                }
            }
            (Some(b), None) => b,
            (None, _) => after,
        };
        if picked.last() != Some(&best) {
            picked.push(best);
        }
    }
    Ok(picked)
}

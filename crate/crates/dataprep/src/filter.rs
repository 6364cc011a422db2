use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::types::FrameSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    LowQuality,
    NoPolyp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub frame: usize,
    pub reason: RejectReason,
}

/// Keeps frames with `quality >= min_quality` that show a polyp when
/// `require_polyp` is set. A frame failing both checks is recorded as
/// low-quality.
pub fn quality_filter(
    seq: &FrameSequence,
    frames: &[usize],
    min_quality: f64,
    require_polyp: bool,
) -> Result<(Vec<usize>, Vec<Rejection>)> {
    if !(0.0..=1.0).contains(&min_quality) {
        return config_err(format!("min_quality must lie in [0, 1], got {min_quality}"));
    }
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for &i in frames {
        let f = &seq.frames[i];
        if f.quality < min_quality {
            rejected.push(Rejection { frame: i, reason: RejectReason::LowQuality });
        } else if require_polyp && !f.polyp {
            rejected.push(Rejection { frame: i, reason: RejectReason::NoPolyp });
        } else {
            kept.push(i);
        }
    }
    Ok((kept, rejected))
}

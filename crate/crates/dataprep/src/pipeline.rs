use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::align::align_frames_to_sentences;
use crate::error::{config_err, data_err, Result};
use crate::filter::{quality_filter, RejectReason};
use crate::keyframes::{sample_keyframes, SamplingConfig};
use crate::types::{tokenize, FrameSequence, ImageTextPair, VideoReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrepConfig {
    pub sampling: SamplingConfig,
    pub min_quality: f64,
    pub require_polyp: bool,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self { sampling: SamplingConfig::default(), min_quality: 0.5, require_polyp: true }
    }
}

/// What happened to one input frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "fate", rename_all = "kebab-case")]
pub enum Fate {
    Paired { pair_id: String },
    NotSampled,
    LowQuality,
    NoPolyp,
    Unaligned,
}

impl Fate {
    pub fn code(&self) -> &'static str {
        match self {
            Fate::Paired { .. } => "paired",
            Fate::NotSampled => "not-sampled",
            Fate::LowQuality => "low-quality",
            Fate::NoPolyp => "no-polyp",
            Fate::Unaligned => "unaligned",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub video_id: String,
    pub frame: usize,
    pub t: f64,
    #[serde(flatten)]
    pub fate: Fate,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrepOutput {
    pub pairs: Vec<ImageTextPair>,
    /// One entry per input frame, in video then frame order.
    pub ledger: Vec<LedgerEntry>,
    pub midpoint_ties: usize,
}

impl PrepOutput {
    /// Frames per fate code.
    pub fn counts(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for e in &self.ledger {
            *m.entry(e.fate.code()).or_insert(0) += 1;
        }
        m
    }

    /// Checks that every input frame has exactly one ledger entry and that
    /// paired entries and pairs agree.
    pub fn check_conservation(&self, videos: &[FrameSequence]) -> Result<()> {
        let expected: usize = videos.iter().map(|v| v.frames.len()).sum();
        let mut seen = HashSet::new();
        for e in &self.ledger {
            let known = videos.iter().any(|v| v.video_id == e.video_id && e.frame < v.frames.len());
            if !known || !seen.insert((e.video_id.as_str(), e.frame)) {
                return data_err(format!("ledger entry {}#{} is unknown or repeated", e.video_id, e.frame));
            }
        }
        if seen.len() != expected {
            return data_err(format!("ledger covers {} of {expected} frames", seen.len()));
        }
        let paired: HashSet<&str> = self
            .ledger
            .iter()
            .filter_map(|e| match &e.fate {
                Fate::Paired { pair_id } => Some(pair_id.as_str()),
                _ => None,
            })
            .collect();
        let ids: HashSet<&str> = self.pairs.iter().map(|p| p.id.as_str()).collect();
        if paired != ids || ids.len() != self.pairs.len() {
            return data_err("paired ledger entries and emitted pairs disagree");
        }
        Ok(())
    }
}

/// Samples, filters and aligns every video. Videos without a report keep
/// their retained frames as unaligned.
pub fn run_pipeline(videos: &[FrameSequence], reports: &[VideoReport], cfg: &PrepConfig) -> Result<PrepOutput> {
    if videos.is_empty() {
        return data_err("no frame sequences to process");
    }
    cfg.sampling.validate()?;
    if !(0.0..=1.0).contains(&cfg.min_quality) {
        return config_err(format!("min_quality must lie in [0, 1], got {}", cfg.min_quality));
    }
    let mut by_video: HashMap<&str, &VideoReport> = HashMap::new();
    for r in reports {
        if by_video.insert(&r.video_id, r).is_some() {
            return data_err(format!("two reports for video {}", r.video_id));
        }
    }
    let mut ids = HashSet::new();
    for v in videos {
        if !ids.insert(v.video_id.as_str()) {
            return data_err(format!("duplicate video id {}", v.video_id));
        }
    }
    if let Some(r) = reports.iter().find(|r| !ids.contains(r.video_id.as_str())) {
        return data_err(format!("report for unknown video {}", r.video_id));
    }

    let mut out = PrepOutput::default();
    for v in videos {
        let mut fate: Vec<Fate> = vec![Fate::NotSampled; v.frames.len()];
        let sampled = sample_keyframes(v, &cfg.sampling)?;
        let (kept, rejected) = quality_filter(v, &sampled, cfg.min_quality, cfg.require_polyp)?;
        for r in rejected {
            fate[r.frame] = match r.reason {
                RejectReason::LowQuality => Fate::LowQuality,
                RejectReason::NoPolyp => Fate::NoPolyp,
            };
        }
        let spans = by_video.get(v.video_id.as_str()).map_or(&[][..], |r| &r.sentences[..]);
        if spans.is_empty() {
            log::warn!("{}: no report sentences; retained frames stay unaligned", v.video_id);
        }
        let a = align_frames_to_sentences(v, &kept, spans)?;
        out.midpoint_ties += a.midpoint_ties.len();
        for &i in &a.unaligned {
            fate[i] = Fate::Unaligned;
        }
        for (i, k) in a.pairs {
            let frame = &v.frames[i];
            let id = format!("{}/{i:05}", v.video_id);
            let tokens = tokenize(&spans[k].text);
            if tokens.is_empty() {
                return data_err(format!("{}: sentence {k} is empty", v.video_id));
            }
            out.pairs.push(ImageTextPair {
                id: id.clone(),
                patches: frame.payload.render()?,
                tokens,
                stratum: spans[k].stratum,
                video_id: v.video_id.clone(),
                patient_id: v.patient_id.clone(),
                timestamp: frame.t,
            });
            fate[i] = Fate::Paired { pair_id: id };
        }
        for (i, f) in fate.into_iter().enumerate() {
            out.ledger.push(LedgerEntry { video_id: v.video_id.clone(), frame: i, t: v.frames[i].t, fate: f });
        }
    }
    Ok(out)
}

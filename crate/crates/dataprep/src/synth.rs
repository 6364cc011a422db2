//! Seeded synthetic colonoscopy corpora.
//!
//! Each video holds one or two polyp segments separated by polyp-free
//! stretches. A polyp is drawn as a disc of patches whose centre encodes
//! the location and whose radius grows with size; inside the disc the
//! feature for the polyp type gains 2, and the morphology and size
//! features gain 1. Every other value is uniform noise whose amplitude
//! rises as frame quality drops. Each segment's report sentence spans the
//! segment minus a short lead-in.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, data_err, Result};
use crate::keyframes::SamplingConfig;
use crate::pipeline::PrepConfig;
use crate::types::{
    Attributes, Frame, FrameSequence, Location, Morphology, PatchGrid, Payload, PolypType, SentenceSpan, VideoReport,
    SIZES_MM,
};

/// Features needed to encode type, morphology and size.
pub const MIN_DIM: usize = 12;
const MORPH_OFFSET: usize = 4;
const SIZE_OFFSET: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub videos: usize,
    pub seed: u64,
    /// `[rows, cols, dim]` of every patch grid.
    pub shape: [usize; 3],
    /// Range of video lengths in seconds.
    pub duration: (f64, f64),
    pub fps: f64,
    pub max_polyps: usize,
    /// Fraction of frames drawn with quality below 0.5.
    pub low_quality_rate: f64,
    /// Give every video a different attribute combination while they last.
    pub distinct_attributes: bool,
    /// Polyp segment length as a fraction of its share of the video.
    pub coverage: (f64, f64),
    /// Part of each segment, from its start, that its sentence span leaves out.
    pub lead_in: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            videos: 64,
            seed: 0,
            shape: [8, 8, MIN_DIM],
            duration: (40.0, 100.0),
            fps: 1.0,
            max_polyps: 2,
            low_quality_rate: 0.1,
            distinct_attributes: false,
            coverage: (0.45, 0.8),
            lead_in: 0.1,
        }
    }
}

/// Named generator settings with the matching pipeline settings.
pub fn preset(name: &str) -> Result<(SynthSpec, PrepConfig)> {
    let base = SynthSpec::default();
    let prep = PrepConfig::default();
    match name {
        "tiny" => Ok((
            SynthSpec {
                videos: 8,
                duration: (20.0, 20.0),
                max_polyps: 1,
                low_quality_rate: 0.0,
                distinct_attributes: true,
                coverage: (0.8, 0.8),
                lead_in: 0.0,
                ..base
            },
            PrepConfig { sampling: SamplingConfig { target_frames: 1, min_rate: 0.05, ..prep.sampling }, ..prep },
        )),
        "default" => Ok((base, prep)),
        "stress" => Ok((
            SynthSpec { videos: 256, duration: (20.0, 600.0), low_quality_rate: 0.2, ..base },
            prep,
        )),
        _ => config_err(format!("unknown corpus preset `{name}` (expected tiny, default or stress)")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpus {
    pub videos: Vec<FrameSequence>,
    pub reports: Vec<VideoReport>,
}

fn all_attributes() -> Vec<Attributes> {
    let mut v = Vec::new();
    for &kind in PolypType::ALL {
        for &location in Location::ALL {
            for &morphology in Morphology::ALL {
                for &size_mm in &SIZES_MM {
                    v.push(Attributes { kind, location, morphology, size_mm });
                }
            }
        }
    }
    v
}

fn random_attributes(rng: &mut ChaCha8Rng) -> Attributes {
    let pick = |rng: &mut ChaCha8Rng, n: usize| rng.random_range(0..n);
    Attributes {
        kind: PolypType::ALL[pick(rng, PolypType::ALL.len())],
        location: Location::ALL[pick(rng, Location::ALL.len())],
        morphology: Morphology::ALL[pick(rng, Morphology::ALL.len())],
        size_mm: SIZES_MM[pick(rng, SIZES_MM.len())],
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let [r, c, d] = self.shape;
        if self.videos == 0 {
            return config_err("synthetic corpus needs at least one video");
        }
        if r == 0 || c == 0 || d < MIN_DIM {
            return config_err(format!("patch grid needs rows, cols >= 1 and dim >= {MIN_DIM}, got {:?}", self.shape));
        }
        let (lo, hi) = self.duration;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) || !(self.fps > 0.0) {
            return config_err("duration range and fps must be positive");
        }
        if !(1..=2).contains(&self.max_polyps) {
            return config_err("max_polyps must be 1 or 2");
        }
        let (a, b) = self.coverage;
        if !(0.0 < a && a <= b && b <= 1.0) {
            return config_err("coverage must satisfy 0 < lo <= hi <= 1");
        }
        if !(0.0..=1.0).contains(&self.low_quality_rate) || !(0.0..1.0).contains(&self.lead_in) {
            return config_err("low_quality_rate must lie in [0, 1] and lead_in in [0, 1)");
        }
        Ok(())
    }
}

pub fn synth_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pool = all_attributes();
    pool.shuffle(&mut master);
    let mut next_distinct = 0;
    let mut videos = Vec::with_capacity(spec.videos);
    let mut reports = Vec::with_capacity(spec.videos);
    for v in 0..spec.videos {
        let mut rng = ChaCha8Rng::seed_from_u64(master.random());
        let video_id = format!("v{v:04}");
        let (lo, hi) = spec.duration;
        let duration = ((lo + (hi - lo) * rng.random::<f64>()) * 10.0).round() / 10.0;
        let n_seg = if spec.max_polyps == 2 && rng.random_bool(0.5) { 2 } else { 1 };
        let share = duration / n_seg as f64;
        let mut segments = Vec::with_capacity(n_seg);
        for s in 0..n_seg {
            let (a, b) = spec.coverage;
            let len = share * (a + (b - a) * rng.random::<f64>());
            let start = s as f64 * share + (share - len) * rng.random::<f64>();
            let attrs = if spec.distinct_attributes && next_distinct < pool.len() {
                next_distinct += 1;
                pool[next_distinct - 1]
            } else {
                random_attributes(&mut rng)
            };
            segments.push((start, start + len, attrs));
        }
        let mut frames = Vec::new();
        let mut k = 0;
        loop {
            let t = (k as f64 + 0.5) / spec.fps;
            if t > duration {
                break;
            }
            let polyp = segments.iter().find(|(a, b, _)| *a <= t && t <= *b).map(|s| s.2);
            let quality = if rng.random_bool(spec.low_quality_rate) {
                0.05 + 0.4 * rng.random::<f64>()
            } else {
                0.6 + 0.4 * rng.random::<f64>()
            };
            let payload = Payload::Synthetic { shape: spec.shape, seed: rng.random(), polyp, noise: 0.05 + 0.5 * (1.0 - quality) };
            frames.push(Frame { t, quality, polyp: polyp.is_some(), payload });
            k += 1;
        }
        let sentences = segments
            .iter()
            .map(|&(a, b, attrs)| SentenceSpan {
                start: a + spec.lead_in * (b - a),
                end: b,
                text: attrs.sentence(),
                stratum: attrs.kind,
            })
            .collect();
        let patient_id = Some(format!("p{:03}", v / 2));
        videos.push(FrameSequence { video_id: video_id.clone(), patient_id, duration, frames });
        reports.push(VideoReport { video_id, sentences });
    }
    Ok(SynthCorpus { videos, reports })
}

/// Patch-grid centre for a location: a 2 × 3 layout over the grid.
fn centre(loc: Location, rows: usize, cols: usize) -> (f64, f64) {
    let i = loc.index();
    let fr = [0.25, 0.75][i / 3];
    let fc = [1.0 / 6.0, 0.5, 5.0 / 6.0][i % 3];
    (fr * rows as f64 - 0.5, fc * cols as f64 - 0.5)
}

pub fn render(shape: [usize; 3], seed: u64, polyp: Option<&Attributes>, noise: f64) -> Result<PatchGrid> {
    let [rows, cols, dim] = shape;
    if !(noise >= 0.0) || !noise.is_finite() {
        return data_err(format!("noise amplitude must be finite and nonnegative, got {noise}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data: Vec<f64> = (0..rows * cols * dim).map(|_| noise * (2.0 * rng.random::<f64>() - 1.0)).collect();
    if let Some(a) = polyp {
        if dim < MIN_DIM {
            return data_err(format!("a polyp needs dim >= {MIN_DIM}, got {dim}"));
        }
        let size = a.size_index()?;
        let (cy, cx) = centre(a.location, rows, cols);
        let radius = 1.0 + 0.5 * size as f64;
        for r in 0..rows {
            for c in 0..cols {
                let (dy, dx) = (r as f64 - cy, c as f64 - cx);
                if dy * dy + dx * dx <= radius * radius {
                    let o = (r * cols + c) * dim;
                    data[o + a.kind.index()] += 2.0;
                    data[o + MORPH_OFFSET + a.morphology.index()] += 1.0;
                    data[o + SIZE_OFFSET + size] += 1.0;
                }
            }
        }
    }
    PatchGrid::new(rows, cols, dim, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_location_lights_some_patches() {
        for &location in Location::ALL {
            let a = Attributes { kind: PolypType::Serrated, location, morphology: Morphology::Flat, size_mm: 3 };
            let g = render([8, 8, 12], 1, Some(&a), 0.0).unwrap();
            let lit = g.data.chunks(12).filter(|p| p[2] == 2.0).count();
            assert!(lit >= 4, "{location}: {lit}");
        }
    }

    #[test]
    fn presets_resolve() {
        for p in ["tiny", "default", "stress"] {
            let (s, c) = preset(p).unwrap();
            s.validate().unwrap();
            c.sampling.validate().unwrap();
        }
        assert!(preset("huge").is_err());
        assert!(SynthSpec { shape: [8, 8, 6], ..SynthSpec::default() }.validate().is_err());
    }
}

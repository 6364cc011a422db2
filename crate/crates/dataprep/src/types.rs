use serde::{Deserialize, Serialize};

use crate::error::{data_err, Result};
use crate::synth;

/// `rows × cols` patches of `dim` features, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl PatchGrid {
    pub fn new(rows: usize, cols: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || dim == 0 || data.len() != rows * cols * dim {
            return data_err(format!("patch grid {rows}x{cols}x{dim} cannot hold {} values", data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return data_err("patch grid holds a non-finite value");
        }
        Ok(Self { rows, cols, dim, data })
    }

    pub fn patch(&self, r: usize, c: usize) -> &[f64] {
        let o = (r * self.cols + c) * self.dim;
        &self.data[o..o + self.dim]
    }

    /// Mean of each feature over all patches.
    pub fn feature_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.data.chunks(self.dim) {
            for (a, v) in m.iter_mut().zip(p) {
                *a += v;
            }
        }
        let n = (self.rows * self.cols) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}

/// Frame pixels, either stored or regenerated from the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Grid(PatchGrid),
    Synthetic { shape: [usize; 3], seed: u64, polyp: Option<Attributes>, noise: f64 },
}

impl Payload {
    pub fn render(&self) -> Result<PatchGrid> {
        match self {
            Payload::Grid(g) => Ok(g.clone()),
            Payload::Synthetic { shape, seed, polyp, noise } => synth::render(*shape, *seed, polyp.as_ref(), *noise),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Seconds from the start of the video.
    pub t: f64,
    /// Image quality in [0, 1]; low values stand for blur, mucus or a shifted field.
    pub quality: f64,
    pub polyp: bool,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSequence {
    pub video_id: String,
    #[serde(default)]
    pub patient_id: Option<String>,
    pub duration: f64,
    pub frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return data_err(format!("{}: duration must be positive, got {}", self.video_id, self.duration));
        }
        let mut prev = f64::NEG_INFINITY;
        for (i, f) in self.frames.iter().enumerate() {
            if !(f.t > prev) || f.t < 0.0 || f.t > self.duration {
                return data_err(format!(
                    "{}: frame {i} at t={} breaks strictly increasing timestamps within [0, {}]",
                    self.video_id, f.t, self.duration
                ));
            }
            if !(0.0..=1.0).contains(&f.quality) {
                return data_err(format!("{}: frame {i} quality {} outside [0, 1]", self.video_id, f.quality));
            }
            prev = f.t;
        }
        Ok(())
    }
}

macro_rules! label_enum {
    ($(#[$m:meta])* $name:ident { $($v:ident => $s:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $s)] $v),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$v),+];

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$v => $s),+
                }
            }

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|&x| x == self).unwrap()
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.label())
            }
        }
    };
}

label_enum!(
    /// Histological type; the stratum label for splitting.
    PolypType {
        Adenomatous => "adenomatous",
        Hyperplastic => "hyperplastic",
        Serrated => "serrated",
        Inflammatory => "inflammatory",
    }
);

label_enum!(Location {
    Cecum => "cecum",
    Ascending => "ascending colon",
    Transverse => "transverse colon",
    Descending => "descending colon",
    Sigmoid => "sigmoid colon",
    Rectum => "rectum",
});

label_enum!(Morphology {
    Pedunculated => "pedunculated",
    Sessile => "sessile",
    Flat => "flat",
});

pub const SIZES_MM: [u32; 5] = [3, 6, 10, 15, 25];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Attributes {
    pub kind: PolypType,
    pub location: Location,
    pub morphology: Morphology,
    pub size_mm: u32,
}

impl Attributes {
    pub fn size_index(&self) -> Result<usize> {
        match SIZES_MM.iter().position(|&s| s == self.size_mm) {
            Some(i) => Ok(i),
            None => data_err(format!("size {} mm is not one of {SIZES_MM:?}", self.size_mm)),
        }
    }

    /// Template sentence describing the polyp.
    pub fn sentence(&self) -> String {
        format!(
            "a {} mm {} polyp in the {} , consistent with {} polyp .",
            self.size_mm, self.morphology, self.location, self.kind
        )
    }
}

/// One report sentence anchored to a time span of its video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start: f64,
    pub end: f64,
    pub text: String,
    pub stratum: PolypType,
}

impl SentenceSpan {
    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t <= self.end
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoReport {
    pub video_id: String,
    pub sentences: Vec<SentenceSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTextPair {
    pub id: String,
    pub patches: PatchGrid,
    pub tokens: Vec<String>,
    pub stratum: PolypType,
    pub video_id: String,
    #[serde(default)]
    pub patient_id: Option<String>,
    pub timestamp: f64,
}

/// Lowercases, splits on whitespace and gives each ASCII punctuation mark its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut cur = String::new();
        for ch in chunk.chars().flat_map(char::to_lowercase) {
            if ch.is_ascii_punctuation() {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            } else {
                cur.push(ch);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip_through_serde() {
        for &l in Location::ALL {
            let s = serde_json::to_string(&l).unwrap();
            assert_eq!(s, format!("\"{}\"", l.label()));
            assert_eq!(serde_json::from_str::<Location>(&s).unwrap(), l);
        }
        assert!(serde_json::from_str::<PolypType>("\"tubular\"").is_err());
    }

    #[test]
    fn sequence_validation() {
        let frame = |t| Frame { t, quality: 1.0, polyp: true, payload: Payload::Grid(PatchGrid::new(1, 1, 1, vec![0.0]).unwrap()) };
        let mut s = FrameSequence { video_id: "v".into(), patient_id: None, duration: 3.0, frames: vec![frame(0.0), frame(1.0)] };
        assert!(s.validate().is_ok());
        s.frames.push(frame(1.0));
        assert!(s.validate().is_err());
        s.frames.pop();
        s.frames.push(frame(3.5));
        assert!(s.validate().is_err());
    }

    #[test]
    fn template_sentence() {
        let a = Attributes {
            kind: PolypType::Serrated,
            location: Location::Sigmoid,
            morphology: Morphology::Flat,
            size_mm: 6,
        };
        assert_eq!(a.sentence(), "a 6 mm flat polyp in the sigmoid colon , consistent with serrated polyp .");
        assert_eq!(tokenize(&a.sentence()).len(), 15);
        assert!(Attributes { size_mm: 7, ..a }.size_index().is_err());
    }
}

//! Frame-to-sentence alignment by time-span containment.
//!
//! A frame pairs with the sentence whose span contains its timestamp (both
//! ends inclusive). When several spans contain it, the one with the nearest
//! midpoint wins, then the earlier start, then the earlier sentence.

use crate::error::{data_err, Result};
use crate::types::{FrameSequence, SentenceSpan};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Alignment {
    /// `(frame, sentence)` index pairs.
    pub pairs: Vec<(usize, usize)>,
    /// Frames inside no span.
    pub unaligned: Vec<usize>,
    /// Frames whose candidate spans tied on midpoint distance.
    pub midpoint_ties: Vec<usize>,
}

pub fn align_frames_to_sentences(
    seq: &FrameSequence,
    frames: &[usize],
    spans: &[SentenceSpan],
) -> Result<Alignment> {
    for (k, s) in spans.iter().enumerate() {
        if !(0.0 <= s.start && s.start <= s.end && s.end <= seq.duration) {
            return data_err(format!(
                "{}: sentence {k} span [{}, {}] is not within [0, {}]",
                seq.video_id, s.start, s.end, seq.duration
            ));
        }
    }
    let mut out = Alignment::default();
    for &i in frames {
        let t = seq.frames[i].t;
        let mut best: Option<(usize, f64)> = None;
        let mut tied = false;
        for (k, s) in spans.iter().enumerate().filter(|(_, s)| s.contains(t)) {
            let d = (t - s.midpoint()).abs();
            match best {
                None => best = Some((k, d)),
                Some((b, bd)) => {
                    if d < bd {
                        best = Some((k, d));
                        tied = false;
                    } else if d == bd {
                        tied = true;
                        if s.start < spans[b].start {
                            best = Some((k, d));
                        }
                    }
                }
            }
        }
        match best {
            Some((k, _)) => {
                if tied {
                    log::warn!("{}: frame at t={t} is equidistant from overlapping span midpoints", seq.video_id);
                    out.midpoint_ties.push(i);
                }
                out.pairs.push((i, k));
            }
            None => out.unaligned.push(i),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Frame, PatchGrid, Payload, PolypType};

    fn seq(ts: &[f64]) -> FrameSequence {
        let g = Payload::Grid(PatchGrid::new(1, 1, 1, vec![0.0]).unwrap());
        let frames = ts.iter().map(|&t| Frame { t, quality: 1.0, polyp: true, payload: g.clone() }).collect();
        FrameSequence { video_id: "v".into(), patient_id: None, duration: 20.0, frames }
    }

    fn span(start: f64, end: f64) -> SentenceSpan {
        SentenceSpan { start, end, text: "x".into(), stratum: PolypType::Adenomatous }
    }

    #[test]
    fn containment_and_nearest_midpoint() {
        let s = seq(&[5.0, 10.0, 17.0]);
        let a = align_frames_to_sentences(&s, &[0, 1, 2], &[span(0.0, 5.0), span(5.0, 15.0)]).unwrap();
        assert_eq!(a.pairs, [(0, 0), (1, 1)]);
        assert_eq!(a.unaligned, [2]);
        assert!(a.midpoint_ties.is_empty());
    }

    #[test]
    fn whole_video_span_takes_everything() {
        let s = seq(&[0.0, 3.0, 20.0]);
        let a = align_frames_to_sentences(&s, &[0, 1, 2], &[span(0.0, 20.0)]).unwrap();
        assert_eq!(a.pairs, [(0, 0), (1, 0), (2, 0)]);
    }

    #[test]
    fn equal_midpoints_fall_back_to_earlier_start() {
        let s = seq(&[6.0]);
        let a = align_frames_to_sentences(&s, &[0], &[span(4.0, 8.0), span(2.0, 10.0)]).unwrap();
        assert_eq!(a.pairs, [(0, 1)]);
        assert_eq!(a.midpoint_ties, [0]);
        assert!(align_frames_to_sentences(&s, &[0], &[span(4.0, 30.0)]).is_err());
    }
}

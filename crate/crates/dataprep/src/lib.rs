//! Builds image-report pair corpora from annotated frame sequences.
//!
//! A [`FrameSequence`] is one video as timestamped frames, each with a
//! quality score, a polyp flag and a patch-grid payload. [`run_pipeline`]
//! samples keyframes, drops low-quality and polyp-free frames, pairs the
//! rest with the report sentence whose time span contains them, and keeps
//! a per-frame ledger so every input frame is accounted for.
//! [`stratified_split`] then partitions pairs by polyp type.
//!
//! [`synth`] generates seeded corpora whose patch statistics encode the
//! attributes the template reports describe.

mod align;
mod error;
mod filter;
pub mod io;
mod keyframes;
mod pipeline;
mod split;
pub mod synth;
mod types;

pub use align::{align_frames_to_sentences, Alignment};
pub use error::{DataprepError, Result};
pub use filter::{quality_filter, Rejection, RejectReason};
pub use keyframes::{sample_keyframes, SamplingConfig};
pub use pipeline::{run_pipeline, Fate, LedgerEntry, PrepConfig, PrepOutput};
pub use split::{split_indices, stratified_split, Split, SplitConfig, SplitMode};
pub use types::{
    tokenize, Attributes, Frame, FrameSequence, ImageTextPair, Location, Morphology, Payload, PatchGrid, PolypType,
    SentenceSpan, VideoReport, SIZES_MM,
};

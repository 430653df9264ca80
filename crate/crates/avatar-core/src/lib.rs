//! Audio-driven portrait video pipeline.
//!
//! The pipeline turns (reference image, driving audio, text prompt) into a
//! long portrait video in two passes: a low-fps blueprint spanning the whole
//! audio, then parallel first-last-frame sub-clips anchored on blueprint
//! keyframes and stitched frame-exactly to the audio. Around that core sit
//! the supporting subsystems: audio feature extraction, a rule-based
//! instruction director, the conditioning primitives (attention masks,
//! weighted loss, reference corruption, CFG), a data-curation filter suite,
//! and the GSB preference-evaluation tally.

// `!(x > 0.0)` guards reject NaN along with non-positive values; the
// partial_cmp form clippy suggests would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod backend;
pub mod bench;
pub mod cascade;
pub mod conditioning;
pub mod config;
pub mod curation;
pub mod director;
pub mod dsp;
pub mod media;
pub mod pipeline;
pub mod rng;

//! Generation-backend interface: blueprint generation, first-last-frame
//! sub-clip generation, and audio-conditioned transition interpolation.
//! The shipped implementation is [`ProceduralBackend`], a parametric
//! avatar whose mouth aperture tracks the audio envelope; it exists so the
//! surrounding pipeline (anchoring, alignment, CFG, masks, curation) is
//! verifiable end to end without any learned model.

mod procedural;

pub use procedural::{palette_from_reference, recover_params, render, AvatarParams, Palette, ProceduralBackend};

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioFeatures;
use crate::conditioning::MouthBoxes;
use crate::director::{LocalPlan, Storyline};
use crate::media::{frames_for_audio, Clip, Frame, TimeGrid};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("blueprint generation requires a storyline")]
    MissingStoryline,
    #[error("sub-clip generation requires a local plan")]
    MissingPlan,
    #[error("sub-clip generation requires both first and last anchor frames")]
    MissingAnchors,
    #[error("anchor frames are {0}x{1} and {2}x{3}; dimensions must match")]
    AnchorDimensionMismatch(u32, u32, u32, u32),
    #[error("request implies zero frames (duration {0}s at {1} fps)")]
    ZeroFrames(f64, f64),
    #[error("{0}")]
    Media(#[from] crate::media::MediaError),
}

/// Semantic guidance for one generation call.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Guidance {
    Global(Storyline),
    Local(LocalPlan),
}

impl Guidance {
    /// Global time of the request's first frame.
    pub fn window_start_s(&self) -> f64 {
        match self {
            Guidance::Global(_) => 0.0,
            Guidance::Local(plan) => plan.window.0,
        }
    }
}

/// A self-contained generation task. `duration_s` is the nominal duration
/// of the covered window; the implied output frame count is
/// frames_for_audio(duration_s, grid.fps). In sub-clip mode both anchor
/// frames must be set and the output is pinned to them bit-exactly.
#[derive(Debug, Clone)]
pub struct GenerationRequest {
    pub reference: Frame,
    pub guidance: Guidance,
    /// Features slice covering the window (global token indexing).
    pub audio: AudioFeatures,
    pub grid: TimeGrid,
    pub duration_s: f64,
    pub first_frame: Option<Frame>,
    pub last_frame: Option<Frame>,
    pub seed: u64,
}

impl GenerationRequest {
    pub fn num_frames(&self) -> u64 {
        frames_for_audio(self.duration_s, self.grid.fps)
    }
}

/// A video generation backend. Implementations must be pure functions of
/// (request, seed) and safe to invoke concurrently from multiple sub-clip
/// jobs.
pub trait GenerationBackend: Send + Sync {
    /// Full-audio low-fps pass that fixes the storyline's visual
    /// trajectory; the source of anchor keyframes.
    fn generate_blueprint(&self, request: &GenerationRequest) -> Result<Clip, BackendError>;

    /// First-last-frame conditioned sub-clip: frame 0 and the final frame
    /// equal the provided anchors bit-exactly.
    fn generate_subclip(&self, request: &GenerationRequest) -> Result<Clip, BackendError>;

    /// Synthesize `num_frames` transition frames between two frames,
    /// cross-fading appearance while the mouth follows `envelope` (one
    /// value per frame).
    fn interpolate_transition(
        &self,
        frame_a: &Frame,
        frame_b: &Frame,
        num_frames: usize,
        envelope: &[f64],
        fps: f64,
    ) -> Result<Clip, BackendError>;

    /// Mouth boxes for a clip this backend rendered, if it can recover
    /// them. Used for anchor scoring and keypoints export.
    fn mouth_boxes(&self, _clip: &Clip) -> Option<MouthBoxes> {
        None
    }
}

/// Wraps a backend and sleeps a fixed time per sub-clip call: the
/// workload stand-in for measuring parallel scaling.
pub struct DelayedBackend<B> {
    inner: B,
    delay: Duration,
}

impl<B> DelayedBackend<B> {
    pub fn new(inner: B, delay: Duration) -> Self {
        DelayedBackend { inner, delay }
    }
}

impl<B: GenerationBackend> GenerationBackend for DelayedBackend<B> {
    fn generate_blueprint(&self, request: &GenerationRequest) -> Result<Clip, BackendError> {
        self.inner.generate_blueprint(request)
    }

    fn generate_subclip(&self, request: &GenerationRequest) -> Result<Clip, BackendError> {
        std::thread::sleep(self.delay);
        self.inner.generate_subclip(request)
    }

    fn interpolate_transition(
        &self,
        frame_a: &Frame,
        frame_b: &Frame,
        num_frames: usize,
        envelope: &[f64],
        fps: f64,
    ) -> Result<Clip, BackendError> {
        self.inner.interpolate_transition(frame_a, frame_b, num_frames, envelope, fps)
    }

    fn mouth_boxes(&self, clip: &Clip) -> Option<MouthBoxes> {
        self.inner.mouth_boxes(clip)
    }
}

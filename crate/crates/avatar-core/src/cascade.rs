//! The long-duration engine: segment the timeline evenly, select anchor
//! keyframes from the blueprint, build self-contained parallel sub-clip
//! jobs, run them on a worker pool, and stitch a frame-exact final video.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{extract_features, AudioFeatures};
use crate::backend::{BackendError, GenerationBackend, GenerationRequest, Guidance};
use crate::conditioning::MouthBoxes;
use crate::curation::{histogram_distance, mouth_darkness, rgb_histogram};
use crate::director::{decompose, DirectorError, LocalPlan, Storyline};
use crate::media::{frames_for_audio, AudioTrack, Clip, Frame, MediaError, TimeGrid};
use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum CascadeError {
    #[error("segmentation needs positive duration and at least one clip (duration={0}, clips={1})")]
    BadSegmentation(f64, usize),
    #[error("frame index {0} out of range (blueprint has {1} frames)")]
    IndexOutOfRange(usize, usize),
    #[error("blueprint covers {got:.2}s but the plan needs {need:.2}s")]
    BlueprintTooShort { got: f64, need: f64 },
    #[error("need at least 2 anchors, got {0}")]
    TooFewAnchors(usize),
    #[error("anchor snapped indices are not strictly increasing even at the smallest search window")]
    AnchorsCollide,
    #[error("job {clip_index} failed: {source}")]
    JobFailed { clip_index: usize, source: BackendError },
    #[error("anchor mismatch at junction {0}: shared boundary frames differ")]
    AnchorMismatch(usize),
    #[error("no clips to stitch")]
    NoClips,
    #[error(transparent)]
    Director(#[from] DirectorError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Media(#[from] MediaError),
}

/// Even segmentation of [0, duration] into `num_clips` pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationPlan {
    pub duration_s: f64,
    pub num_clips: usize,
    /// num_clips + 1 strictly increasing timestamps, 0 and duration included.
    pub boundaries: Vec<f64>,
}

pub fn plan_segments(duration_s: f64, num_clips: usize) -> Result<SegmentationPlan, CascadeError> {
    if !(duration_s > 0.0) || num_clips == 0 {
        return Err(CascadeError::BadSegmentation(duration_s, num_clips));
    }
    let boundaries = (0..=num_clips)
        .map(|k| duration_s * k as f64 / num_clips as f64)
        .collect();
    Ok(SegmentationPlan { duration_s, num_clips, boundaries })
}

/// Anchor quality components, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    /// 1 - normalized RGB-histogram distance to the reference.
    pub identity: f64,
    /// Mean absolute pixel difference to neighbor frames, / 255.
    pub motion: f64,
    /// Mouth-box confidence at the frame (absent box = 0).
    pub occlusion_free: f64,
    /// Local variance of the mouth-openness proxy over +-3 frames,
    /// normalized by 0.01 (a 0.1 darkness swing saturates it).
    pub expressiveness: f64,
}

/// Composite weights for anchor selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorWeights {
    pub identity: f64,
    pub motion: f64,
    pub occlusion: f64,
    pub expressiveness: f64,
}

impl Default for AnchorWeights {
    fn default() -> Self {
        AnchorWeights { identity: 0.4, motion: 0.2, occlusion: 0.2, expressiveness: 0.2 }
    }
}

impl ScoreBreakdown {
    pub fn composite(&self, w: &AnchorWeights) -> f64 {
        w.identity * self.identity
            + w.motion * self.motion
            + w.occlusion * self.occlusion_free
            + w.expressiveness * self.expressiveness
    }
}

/// A selected blueprint keyframe, snapped onto the output frame grid.
#[derive(Debug, Clone)]
pub struct AnchorFrame {
    pub blueprint_frame_index: u64,
    pub snapped_output_frame_index: u64,
    pub frame: Frame,
    pub score: f64,
    pub breakdown: ScoreBreakdown,
}

/// Score one blueprint frame against the reference and its neighborhood.
pub fn score_keyframe(
    blueprint: &Clip,
    frame_index: usize,
    reference: &Frame,
    mouth_boxes: &MouthBoxes,
) -> Result<ScoreBreakdown, CascadeError> {
    let n = blueprint.num_frames();
    if frame_index >= n {
        return Err(CascadeError::IndexOutOfRange(frame_index, n));
    }
    let frame = blueprint.frame(frame_index);

    let identity = 1.0 - histogram_distance(&rgb_histogram(frame), &rgb_histogram(reference));

    let mut diff_sum = 0.0;
    let mut diff_n = 0usize;
    for neighbor in [frame_index.checked_sub(1), (frame_index + 1 < n).then_some(frame_index + 1)]
        .into_iter()
        .flatten()
    {
        diff_sum += mean_abs_diff(frame, blueprint.frame(neighbor));
        diff_n += 1;
    }
    let motion = if diff_n == 0 { 0.0 } else { diff_sum / diff_n as f64 / 255.0 };

    let occlusion_free = mouth_boxes.get(frame_index as u64).map_or(0.0, |b| b.conf);

    let lo = frame_index.saturating_sub(3);
    let hi = (frame_index + 3).min(n - 1);
    let mut darkness = Vec::new();
    for j in lo..=hi {
        if let Some(b) = mouth_boxes.get(j as u64) {
            darkness.push(mouth_darkness(blueprint.frame(j), b));
        }
    }
    let expressiveness = if darkness.len() < 2 {
        0.0
    } else {
        let m = darkness.iter().sum::<f64>() / darkness.len() as f64;
        let var = darkness.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / darkness.len() as f64;
        (var / 0.01).min(1.0)
    };

    Ok(ScoreBreakdown { identity, motion, occlusion_free, expressiveness })
}

fn mean_abs_diff(a: &Frame, b: &Frame) -> f64 {
    let sum: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum();
    sum / a.pixels().len() as f64
}

/// Select anchor keyframes: blueprint frame 0 (the reference-conditioned
/// first frame) and the blueprint's last frame are always anchors; around
/// each interior boundary the best-scoring frame within +-window_s wins,
/// ties to the frame nearest the boundary, then to the earlier index.
/// Snapped output indices must come out strictly increasing; if they do
/// not, the window shrinks and selection retries.
#[allow(clippy::too_many_arguments)]
pub fn select_anchors(
    blueprint: &Clip,
    plan: &SegmentationPlan,
    reference: &Frame,
    mouth_boxes: &MouthBoxes,
    window_s: f64,
    weights: &AnchorWeights,
    target_fps: f64,
    total_output_frames: u64,
) -> Result<Vec<AnchorFrame>, CascadeError> {
    let bfps = blueprint.fps();
    let b = blueprint.num_frames();
    if b < 2 {
        return Err(CascadeError::BlueprintTooShort {
            got: blueprint.duration_s(),
            need: plan.duration_s,
        });
    }
    if blueprint.duration_s() + 1.0 / bfps < plan.duration_s {
        return Err(CascadeError::BlueprintTooShort {
            got: blueprint.duration_s(),
            need: plan.duration_s,
        });
    }

    let snap =
        |bi: u64| -> u64 { ((bi as f64 / bfps * target_fps).round() as u64).min(total_output_frames.saturating_sub(1)) };

    let mut window = window_s.max(0.0);
    loop {
        let mut anchors: Vec<AnchorFrame> = Vec::with_capacity(plan.num_clips + 1);
        let make = |bi: u64| -> Result<AnchorFrame, CascadeError> {
            let breakdown = score_keyframe(blueprint, bi as usize, reference, mouth_boxes)?;
            Ok(AnchorFrame {
                blueprint_frame_index: bi,
                snapped_output_frame_index: snap(bi),
                frame: blueprint.frame(bi as usize).clone(),
                score: breakdown.composite(weights),
                breakdown,
            })
        };

        anchors.push(make(0)?);
        for &boundary in &plan.boundaries[1..plan.num_clips] {
            // the frame whose interval contains the boundary is always a
            // candidate and counts as distance 0 for tie-breaking
            let containing = ((boundary * bfps).floor() as u64).min(b as u64 - 1);
            let mut best: Option<(u64, f64, f64)> = None; // (index, score, distance)
            for j in 0..b as u64 {
                let frame_center = (j as f64 + 0.5) / bfps;
                let dist = if j == containing { 0.0 } else { (frame_center - boundary).abs() };
                if j != containing && dist > window {
                    continue;
                }
                let score = score_keyframe(blueprint, j as usize, reference, mouth_boxes)?.composite(weights);
                let replace = match best {
                    None => true,
                    Some((_, bs, bd)) => {
                        score > bs + 1e-12 || ((score - bs).abs() <= 1e-12 && dist < bd - 1e-12)
                        // full tie keeps the earlier index (no replace)
                    }
                };
                if replace {
                    best = Some((j, score, dist));
                }
            }
            let (bi, _, _) = best.expect("window always contains the boundary frame");
            anchors.push(make(bi)?);
        }
        anchors.push(make(b as u64 - 1)?);

        let increasing = anchors
            .windows(2)
            .all(|w| w[0].snapped_output_frame_index < w[1].snapped_output_frame_index);
        if increasing {
            return Ok(anchors);
        }
        if window < 0.5 / bfps {
            return Err(CascadeError::AnchorsCollide);
        }
        window /= 2.0;
    }
}

/// A self-contained sub-clip generation task: everything a worker needs.
#[derive(Debug, Clone)]
pub struct SubClipJob {
    pub clip_index: usize,
    /// Output frame index range, inclusive on both ends; consecutive jobs
    /// share the boundary frame.
    pub window: (u64, u64),
    pub first_anchor_blueprint_index: u64,
    pub last_anchor_blueprint_index: u64,
    pub first_frame: Frame,
    pub last_frame: Frame,
    pub plan: LocalPlan,
    pub audio: AudioFeatures,
    pub reference: Frame,
    pub grid: TimeGrid,
    pub seed: u64,
}

impl SubClipJob {
    pub fn num_frames(&self) -> u64 {
        self.window.1 - self.window.0 + 1
    }

    pub fn to_request(&self) -> GenerationRequest {
        GenerationRequest {
            reference: self.reference.clone(),
            guidance: Guidance::Local(self.plan.clone()),
            audio: self.audio.clone(),
            grid: self.grid,
            duration_s: self.num_frames() as f64 / self.grid.fps,
            first_frame: Some(self.first_frame.clone()),
            last_frame: Some(self.last_frame.clone()),
            seed: self.seed,
        }
    }
}

/// Build jobs from consecutive anchor pairs: local plans come from
/// decomposing the storyline over the snapped windows, audio slices are
/// cut on token boundaries covering each window, and consecutive jobs
/// share their boundary anchor.
pub fn build_jobs(
    anchors: &[AnchorFrame],
    storyline: &Storyline,
    features: &AudioFeatures,
    reference: &Frame,
    grid: &TimeGrid,
    seed: u64,
) -> Result<Vec<SubClipJob>, CascadeError> {
    if anchors.len() < 2 {
        return Err(CascadeError::TooFewAnchors(anchors.len()));
    }
    for w in anchors.windows(2) {
        if w[0].snapped_output_frame_index >= w[1].snapped_output_frame_index {
            return Err(CascadeError::AnchorsCollide);
        }
    }
    let fps = grid.fps;
    let tr = grid.token_rate;
    let num_jobs = anchors.len() - 1;

    // decompose over the snapped windows; the final window runs to the
    // storyline end so the partition is exact
    let mut windows_s = Vec::with_capacity(num_jobs);
    for k in 0..num_jobs {
        let start = anchors[k].snapped_output_frame_index as f64 / fps;
        let end = if k + 1 == num_jobs {
            storyline.duration_s
        } else {
            anchors[k + 1].snapped_output_frame_index as f64 / fps
        };
        windows_s.push((start, end));
    }
    let plans = decompose(storyline, &windows_s)?;

    let total_tokens = features.start_token + features.num_tokens() as u64;
    let rng = Rng::new(seed);
    let mut jobs = Vec::with_capacity(num_jobs);
    for (k, plan) in plans.into_iter().enumerate() {
        let s0 = anchors[k].snapped_output_frame_index;
        let s1 = anchors[k + 1].snapped_output_frame_index;
        let token_lo = ((s0 as f64 / fps) * tr).floor() as u64;
        let token_hi = ((((s1 + 1) as f64) / fps) * tr).ceil() as u64;
        let token_lo = token_lo.min(total_tokens.saturating_sub(1));
        let token_hi = token_hi.clamp(token_lo + 1, total_tokens);
        let audio = features
            .slice(token_lo, token_hi)
            .expect("token window clamped into features range");
        jobs.push(SubClipJob {
            clip_index: k,
            window: (s0, s1),
            first_anchor_blueprint_index: anchors[k].blueprint_frame_index,
            last_anchor_blueprint_index: anchors[k + 1].blueprint_frame_index,
            first_frame: anchors[k].frame.clone(),
            last_frame: anchors[k + 1].frame.clone(),
            plan,
            audio,
            reference: reference.clone(),
            grid: *grid,
            seed: rng.fork(k as u64).next_u64(),
        });
    }
    Ok(jobs)
}

/// Run all jobs concurrently on up to `worker_count` threads. Results come
/// back ordered by clip_index; the output is independent of scheduling
/// because backends are pure functions of their request. A failed job
/// aborts the batch, reporting the smallest failing clip_index.
pub fn run_parallel(
    jobs: &[SubClipJob],
    backend: &dyn GenerationBackend,
    worker_count: usize,
) -> Result<Vec<Clip>, CascadeError> {
    run_parallel_timed(jobs, backend, worker_count).map(|(clips, _)| clips)
}

type JobSlot = Mutex<Option<Result<(Clip, f64), BackendError>>>;

/// Like [`run_parallel`] but also reports per-job wall time in seconds.
pub fn run_parallel_timed(
    jobs: &[SubClipJob],
    backend: &dyn GenerationBackend,
    worker_count: usize,
) -> Result<(Vec<Clip>, Vec<f64>), CascadeError> {
    assert!(worker_count >= 1, "worker_count must be at least 1");
    if jobs.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let results: Vec<JobSlot> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);

    std::thread::scope(|scope| {
        for _ in 0..worker_count.min(jobs.len()) {
            scope.spawn(|| loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= jobs.len() {
                    break;
                }
                let start = Instant::now();
                let out = backend.generate_subclip(&jobs[idx].to_request());
                let elapsed = start.elapsed().as_secs_f64();
                if out.is_err() {
                    stop.store(true, Ordering::Relaxed);
                }
                *results[idx].lock().unwrap() = Some(out.map(|clip| (clip, elapsed)));
            });
        }
    });

    let mut clips = Vec::with_capacity(jobs.len());
    let mut times = Vec::with_capacity(jobs.len());
    for (idx, slot) in results.into_iter().enumerate() {
        match slot.into_inner().unwrap() {
            Some(Ok((clip, elapsed))) => {
                clips.push(clip);
                times.push(elapsed);
            }
            Some(Err(source)) => {
                return Err(CascadeError::JobFailed { clip_index: jobs[idx].clip_index, source })
            }
            // workers grab indices in order, so an unscheduled slot always
            // sits after the failed slot that set the stop flag
            None => unreachable!("unscheduled job slot without an earlier failure"),
        }
    }
    Ok((clips, times))
}

/// Concatenate sub-clips, dropping the duplicated shared frame at the
/// right side of each junction, then adjust the tail so the final frame
/// count equals frames_for_audio(audio duration, fps) exactly: a short
/// result is extended with audio-conditioned transition frames held on
/// the final anchor, a long one is trimmed.
pub fn stitch(
    clips: &[Clip],
    anchors: &[AnchorFrame],
    audio: &AudioTrack,
    grid: &TimeGrid,
    backend: &dyn GenerationBackend,
) -> Result<Clip, CascadeError> {
    if clips.is_empty() {
        return Err(CascadeError::NoClips);
    }
    for (k, pair) in clips.windows(2).enumerate() {
        let left_last = pair[0].frame(pair[0].num_frames() - 1);
        let right_first = pair[1].frame(0);
        if left_last != right_first {
            return Err(CascadeError::AnchorMismatch(k));
        }
    }

    let mut frames: Vec<Frame> = clips[0].frames().to_vec();
    for clip in &clips[1..] {
        frames.extend_from_slice(&clip.frames()[1..]);
    }

    let target = frames_for_audio(audio.duration_s(), grid.fps) as usize;
    if frames.len() > target {
        frames.truncate(target.max(1));
    } else if frames.len() < target {
        let missing = target - frames.len();
        let features = extract_features(audio, grid.token_rate).unwrap_or(AudioFeatures {
            token_rate: grid.token_rate,
            start_token: 0,
            envelope: Vec::new(),
            raw_rms: Vec::new(),
            activity: Vec::new(),
            band_energy: Vec::new(),
        });
        let env: Vec<f64> = (0..missing)
            .map(|k| {
                let i = (frames.len() + k) as u64;
                features.envelope_at_token(grid.frame_center_token(i) as i64)
            })
            .collect();
        let last = frames.last().expect("stitch input non-empty").clone();
        let hold_on = anchors
            .last()
            .map(|a| a.frame.clone())
            .unwrap_or_else(|| last.clone());
        let tail = backend.interpolate_transition(&last, &hold_on, missing, &env, grid.fps)?;
        frames.extend_from_slice(tail.frames());
    }

    Ok(Clip::new(frames, grid.fps, None)?)
}

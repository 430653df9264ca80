//! End-to-end generation: ground the instructions, render the blueprint,
//! select anchors, fan out sub-clip jobs, stitch, and write the output
//! clip directory with its run report and keypoints.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{caption_audio, extract_features, AudioError};
use crate::backend::{BackendError, GenerationBackend, GenerationRequest, Guidance};
use crate::cascade::{
    build_jobs, plan_segments, run_parallel_timed, select_anchors, stitch, AnchorFrame, CascadeError,
    ScoreBreakdown,
};
use crate::conditioning::MouthBoxes;
use crate::config::Config;
use crate::director::{DirectorBackend, DirectorError, DirectorRequest, Framing, ImageCaption, ImageStyle};
use crate::media::{frames_for_audio, save_audio, save_clip, AudioTrack, Clip, Frame, MediaError, TimeGrid};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("audio too short: {0:.3}s yields no frames at {1} fps")]
    AudioTooShort(f64, f64),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Director(#[from] DirectorError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    Media(#[from] MediaError),
}

/// Per-run options on top of the config.
#[derive(Debug, Clone, Default)]
pub struct GenerateOptions {
    /// Number of sub-clips; default ceil(duration / clip_seconds).
    pub num_clips: Option<usize>,
    pub workers: usize,
    pub seed: u64,
    /// Externally supplied blueprint mouth boxes (overrides the backend's).
    pub keypoints: Option<MouthBoxes>,
    /// Externally supplied image caption (overrides the heuristic).
    pub image_caption: Option<ImageCaption>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorReport {
    pub blueprint_frame_index: u64,
    pub snapped_output_frame_index: u64,
    pub score: f64,
    pub breakdown: ScoreBreakdown,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobReport {
    pub clip_index: usize,
    pub window: (u64, u64),
    pub num_frames: u64,
    /// Wall time of the generation call; the only non-reproducible field
    /// in the report.
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub fps: f64,
    pub blueprint_fps: f64,
    pub duration_s: f64,
    pub num_frames: u64,
    pub num_clips: usize,
    pub prompt: String,
    pub unified_prompt: String,
    pub anchors: Vec<AnchorReport>,
    pub jobs: Vec<JobReport>,
    pub blueprint_elapsed_s: f64,
    pub stitch_elapsed_s: f64,
    pub total_elapsed_s: f64,
}

pub struct PipelineOutput {
    pub clip: Clip,
    pub report: RunReport,
    /// Mouth boxes of the final clip when the backend can recover them.
    pub keypoints: Option<MouthBoxes>,
    /// Extracted audio features (exported as features.json).
    pub features: crate::audio::AudioFeatures,
}

/// Heuristic image caption used when none is supplied: framing and style
/// are fixed, the background is named from the border luma.
pub fn heuristic_image_caption(reference: &Frame) -> ImageCaption {
    let (w, h) = (reference.width(), reference.height());
    let mut sum = 0.0;
    let mut n = 0u64;
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                sum += reference.luma(x, y);
                n += 1;
            }
        }
    }
    let border = sum / n as f64;
    let background = if border < 85.0 {
        "dark background"
    } else if border > 170.0 {
        "light background"
    } else {
        "plain background"
    };
    ImageCaption {
        subject: "portrait subject".to_string(),
        style: ImageStyle::Photoreal,
        framing: Framing::Face,
        background: background.to_string(),
    }
}

/// Run the full cascaded pipeline in memory.
pub fn generate(
    reference: &Frame,
    audio: &AudioTrack,
    prompt: &str,
    director: &dyn DirectorBackend,
    backend: &dyn GenerationBackend,
    config: &Config,
    options: &GenerateOptions,
) -> Result<PipelineOutput, PipelineError> {
    let t_start = Instant::now();
    let fps = config.media.fps;
    let token_rate = config.media.token_rate;
    let duration_s = audio.duration_s();
    let total_frames = frames_for_audio(duration_s, fps);
    if total_frames == 0 {
        return Err(PipelineError::AudioTooShort(duration_s, fps));
    }
    let workers = options.workers.max(1);

    let features = extract_features(audio, token_rate)?;
    let audio_caption = caption_audio(&features, &config.audio);
    let image_caption = options
        .image_caption
        .clone()
        .unwrap_or_else(|| heuristic_image_caption(reference));

    let request = DirectorRequest::new(prompt, Some(audio_caption), Some(image_caption), duration_s);
    let storyline = director.ground(&request)?;
    crate::director::validate_storyline(&storyline)?;

    let num_clips = options
        .num_clips
        .unwrap_or_else(|| (duration_s / config.cascade.clip_seconds).ceil().max(1.0) as usize);
    let plan = plan_segments(duration_s, num_clips)?;

    let blueprint_grid = TimeGrid::new(config.media.blueprint_fps, token_rate)?;
    let blueprint_request = GenerationRequest {
        reference: reference.clone(),
        guidance: Guidance::Global(storyline.clone()),
        audio: features.clone(),
        grid: blueprint_grid,
        duration_s,
        first_frame: None,
        last_frame: None,
        seed: options.seed,
    };
    let t0 = Instant::now();
    let blueprint = backend.generate_blueprint(&blueprint_request)?;
    let blueprint_elapsed_s = t0.elapsed().as_secs_f64();

    let boxes = options
        .keypoints
        .clone()
        .or_else(|| backend.mouth_boxes(&blueprint))
        .unwrap_or_default();

    let output_grid = TimeGrid::new(fps, token_rate)?;
    let anchors: Vec<AnchorFrame> = select_anchors(
        &blueprint,
        &plan,
        reference,
        &boxes,
        config.cascade.anchor_window_s,
        &config.cascade.anchor_weights,
        fps,
        total_frames,
    )?;

    let jobs = build_jobs(&anchors, &storyline, &features, reference, &output_grid, options.seed)?;
    let (clips, job_times) = run_parallel_timed(&jobs, backend, workers)?;

    let t0 = Instant::now();
    let clip = stitch(&clips, &anchors, audio, &output_grid, backend)?;
    let stitch_elapsed_s = t0.elapsed().as_secs_f64();

    let keypoints = backend.mouth_boxes(&clip);
    let exported_features = features.clone();
    let report = RunReport {
        seed: options.seed,
        fps,
        blueprint_fps: config.media.blueprint_fps,
        duration_s,
        num_frames: clip.num_frames() as u64,
        num_clips,
        prompt: prompt.to_string(),
        unified_prompt: storyline.unified_prompt.clone(),
        anchors: anchors
            .iter()
            .map(|a| AnchorReport {
                blueprint_frame_index: a.blueprint_frame_index,
                snapped_output_frame_index: a.snapped_output_frame_index,
                score: a.score,
                breakdown: a.breakdown,
            })
            .collect(),
        jobs: jobs
            .iter()
            .zip(&job_times)
            .map(|(job, &elapsed_s)| JobReport {
                clip_index: job.clip_index,
                window: job.window,
                num_frames: job.num_frames(),
                elapsed_s,
            })
            .collect(),
        blueprint_elapsed_s,
        stitch_elapsed_s,
        total_elapsed_s: t_start.elapsed().as_secs_f64(),
    };

    Ok(PipelineOutput { clip, report, keypoints, features: exported_features })
}

/// Write the pipeline output as a self-contained clip directory:
/// frames + clip.json, audio.wav (the resampled driving audio),
/// keypoints.jsonl when available, and report.json.
pub fn write_outputs(
    output: &PipelineOutput,
    audio: &AudioTrack,
    out_dir: &Path,
) -> Result<(), PipelineError> {
    let mut clip = output.clip.clone();
    clip.set_audio_ref(Some("audio.wav".into()));
    save_clip(&clip, out_dir)?;
    save_audio(audio, out_dir.join("audio.wav"))?;
    if let Some(kp) = &output.keypoints {
        kp.save(&out_dir.join("keypoints.jsonl"))
            .map_err(|e| MediaError::Io { path: out_dir.join("keypoints.jsonl"), source: e })?;
    }
    output
        .features
        .write_json(&out_dir.join("features.json"))
        .map_err(|e| MediaError::Io { path: out_dir.join("features.json"), source: e })?;
    let report = serde_json::to_string_pretty(&output.report).expect("report serializes");
    std::fs::write(out_dir.join("report.json"), report + "\n")
        .map_err(|e| MediaError::Io { path: out_dir.join("report.json"), source: e })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ProceduralBackend;
    use crate::director::RulesDirector;
    use crate::rng::Rng;

    fn reference() -> Frame {
        let mut f = Frame::filled(64, 64, [40, 60, 90]).unwrap();
        for y in 16..48 {
            for x in 16..48 {
                f.set(x, y, [190, 150, 120]);
            }
        }
        f
    }

    pub fn speech_like_audio(duration_s: f64, seed: u64) -> AudioTrack {
        let sr = 16_000usize;
        let n = (duration_s * sr as f64).round() as usize;
        let mut rng = Rng::new(seed);
        let mut samples = vec![0.0f32; n];
        let mut pos = 0usize;
        while pos < n {
            let burst = 800 + rng.below(4000) as usize;
            let gap = 400 + rng.below(2400) as usize;
            let amp = 0.2 + 0.75 * rng.next_f64();
            let freq = 80.0 + rng.next_f64() * 220.0;
            for i in 0..burst.min(n - pos) {
                let t = (pos + i) as f64 / sr as f64;
                let carrier = (2.0 * std::f64::consts::PI * freq * t).sin();
                let noise = rng.next_f64() * 2.0 - 1.0;
                samples[pos + i] = ((0.7 * carrier + 0.3 * noise) * amp) as f32;
            }
            pos += burst + gap;
        }
        AudioTrack::new(samples, sr as u32).unwrap()
    }

    #[test]
    fn end_to_end_emits_exact_frame_count() {
        let config = Config::default();
        let audio = speech_like_audio(9.3, 3);
        let out = generate(
            &reference(),
            &audio,
            "calm talking",
            &RulesDirector,
            &ProceduralBackend::new(config.conditioning.boost_factor),
            &config,
            &GenerateOptions { workers: 2, seed: 11, ..Default::default() },
        )
        .unwrap();
        assert_eq!(out.clip.num_frames() as u64, frames_for_audio(9.3, 48.0));
        assert_eq!(out.report.num_clips, 2); // ceil(9.3 / 5)
        assert_eq!(out.report.jobs.len(), 2);
        assert!(out.keypoints.is_some());
    }

    #[test]
    fn pipeline_is_deterministic_across_worker_counts() {
        let config = Config::default();
        let audio = speech_like_audio(6.0, 5);
        let backend = ProceduralBackend::new(config.conditioning.boost_factor);
        let runs: Vec<Clip> = [1usize, 4]
            .iter()
            .map(|&workers| {
                generate(
                    &reference(),
                    &audio,
                    "excited, pan right",
                    &RulesDirector,
                    &backend,
                    &config,
                    &GenerateOptions { workers, seed: 21, ..Default::default() },
                )
                .unwrap()
                .clip
            })
            .collect();
        assert_eq!(runs[0], runs[1]);
    }

    #[test]
    fn outputs_directory_is_loadable() {
        let config = Config::default();
        let audio = speech_like_audio(4.0, 9);
        let out = generate(
            &reference(),
            &audio,
            "",
            &RulesDirector,
            &ProceduralBackend::new(config.conditioning.boost_factor),
            &config,
            &GenerateOptions { workers: 1, seed: 1, ..Default::default() },
        )
        .unwrap();
        let dir = std::env::temp_dir().join(format!("avatar_pipe_{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        write_outputs(&out, &audio, &dir).unwrap();
        let loaded = crate::media::load_clip(&dir).unwrap();
        assert_eq!(loaded.num_frames(), out.clip.num_frames());
        assert!(dir.join("report.json").exists());
        assert!(dir.join("keypoints.jsonl").exists());
        assert!(dir.join("audio.wav").exists());
    }

    #[test]
    fn empty_audio_is_rejected() {
        let config = Config::default();
        let audio = AudioTrack::new(vec![0.0; 10], 16_000).unwrap(); // < 1 frame
        let err = generate(
            &reference(),
            &audio,
            "",
            &RulesDirector,
            &ProceduralBackend::default(),
            &config,
            &GenerateOptions::default(),
        );
        assert!(matches!(err, Err(PipelineError::AudioTooShort(..))));
    }
}

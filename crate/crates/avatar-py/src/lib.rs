//! Python bindings for the portrait-video pipeline.
//!
//! Exposes the main operations to Python: the end-to-end generator, the
//! curation scorers, the GSB tally, manifest validation, and the numeric
//! conditioning primitives. Structured results cross the boundary as
//! JSON strings so Python callers can `json.loads` them without a custom
//! type layer.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use avatar_core::backend::{GenerationBackend, ProceduralBackend};
use avatar_core::conditioning;
use avatar_core::config::Config;
use avatar_core::curation;
use avatar_core::director::RulesDirector;
use avatar_core::media::{self, TimeGrid};
use avatar_core::pipeline::{self, GenerateOptions};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

/// Mandatory frame count for a stretch of audio: round(duration * fps),
/// ties away from zero.
#[pyfunction]
fn frames_for_audio(duration_s: f64, fps: f64) -> PyResult<u64> {
    if duration_s < 0.0 || fps <= 0.0 {
        return Err(value_err("duration must be >= 0 and fps > 0"));
    }
    Ok(media::frames_for_audio(duration_s, fps))
}

/// Sliding-window audio attention mask as a list of inclusive
/// (lo, hi) token ranges, one per frame.
#[pyfunction]
fn build_audio_mask(
    fps: f64,
    token_rate: f64,
    num_frames: u64,
    num_audio_tokens: u64,
    pad_tokens: u64,
) -> PyResult<Vec<(u64, u64)>> {
    let grid = TimeGrid::new(fps, token_rate).map_err(value_err)?;
    let mask = conditioning::build_audio_mask(&grid, num_frames, num_audio_tokens, pad_tokens)
        .map_err(value_err)?;
    Ok(mask.allowed)
}

/// Classifier-free guidance combination: e_neg + scale * (e_pos - e_neg).
#[pyfunction]
fn cfg_combine(e_pos: Vec<f64>, e_neg: Vec<f64>, scale: f64) -> PyResult<Vec<f64>> {
    conditioning::cfg_combine(&e_pos, &e_neg, scale).map_err(value_err)
}

/// Scale audio cross-attention output values.
#[pyfunction]
fn boost_audio_attention(values: Vec<f64>, factor: f64) -> PyResult<Vec<f64>> {
    if factor <= 0.0 {
        return Err(value_err("factor must be positive"));
    }
    Ok(conditioning::boost_audio_attention(&values, factor))
}

/// Weighted MSE and gradient over a mouth-box weight mask. Returns
/// (loss, grad).
#[pyfunction]
#[pyo3(signature = (pred, target, width, height, mouth_box=None, w_mouth=2.0))]
fn weighted_loss(
    pred: Vec<f64>,
    target: Vec<f64>,
    width: u32,
    height: u32,
    mouth_box: Option<(u32, u32, u32, u32, f64)>,
    w_mouth: f64,
) -> PyResult<(f64, Vec<f64>)> {
    let boxed = mouth_box.map(|(x0, y0, x1, y1, conf)| conditioning::MouthBox { x0, y0, x1, y1, conf });
    let (mask, _) = conditioning::build_weight_mask(boxed.as_ref(), width, height, w_mouth);
    conditioning::weighted_loss(&pred, &target, &mask).map_err(value_err)
}

/// Split parameter names into (trainable, frozen) by the text
/// cross-attention pattern.
#[pyfunction]
fn partition_parameters(names: Vec<String>) -> (Vec<String>, Vec<String>) {
    let p = conditioning::partition_parameters(&names);
    (p.trainable, p.frozen)
}

/// Corrupt a reference image on disk (PPM in, PPM out) with the
/// fixed-order recipe: blur, contrast, saturation, hue shift, noise.
#[pyfunction]
#[pyo3(signature = (input_ppm, output_ppm, blur_radius=0, contrast_gain=1.0, saturation_gain=1.0, hue_shift_deg=0.0, texture_noise_amp=0.0, seed=0))]
#[allow(clippy::too_many_arguments)]
fn corrupt_reference(
    input_ppm: PathBuf,
    output_ppm: PathBuf,
    blur_radius: u32,
    contrast_gain: f64,
    saturation_gain: f64,
    hue_shift_deg: f64,
    texture_noise_amp: f64,
    seed: u64,
) -> PyResult<()> {
    let frame = media::load_frame(&input_ppm).map_err(io_err)?;
    let recipe = conditioning::CorruptionRecipe {
        blur_radius,
        contrast_gain,
        saturation_gain,
        hue_shift_deg,
        texture_noise_amp,
        seed,
    };
    let out = conditioning::corrupt_reference(&frame, &recipe);
    media::save_frame(&out, &output_ppm).map_err(io_err)
}

/// Majority vote over exactly three "G"/"S"/"B" labels.
#[pyfunction]
fn majority_vote(labels: Vec<String>) -> PyResult<String> {
    let parsed: Vec<avatar_core::bench::GsbLabel> = labels
        .iter()
        .map(|l| serde_json::from_value(serde_json::Value::String(l.clone())).map_err(value_err))
        .collect::<PyResult<_>>()?;
    let winner = avatar_core::bench::majority_vote(&parsed).map_err(value_err)?;
    Ok(serde_json::to_value(winner).unwrap().as_str().unwrap().to_string())
}

/// Tally a votes JSONL file; returns JSON
/// {"good", "same", "bad", "metric", "metric_display"}.
#[pyfunction]
#[pyo3(signature = (votes_path, sample_ids=None))]
fn tally_votes(votes_path: PathBuf, sample_ids: Option<Vec<String>>) -> PyResult<String> {
    let votes = avatar_core::bench::load_votes(&votes_path).map_err(io_err)?;
    let filter: Option<BTreeSet<String>> = sample_ids.map(|ids| ids.into_iter().collect());
    let result = avatar_core::bench::tally(&votes, filter.as_ref()).map_err(value_err)?;
    Ok(serde_json::json!({
        "good": result.good,
        "same": result.same,
        "bad": result.bad,
        "metric": result.metric(),
        "metric_display": result.metric_display(),
    })
    .to_string())
}

/// Validate a manifest JSONL against a composition spec JSON (or the
/// built-in composition when spec_path is None). Returns the validation
/// report as JSON.
#[pyfunction]
#[pyo3(signature = (manifest_path, spec_path=None))]
fn validate_manifest(manifest_path: PathBuf, spec_path: Option<PathBuf>) -> PyResult<String> {
    let samples = avatar_core::bench::load_manifest(&manifest_path).map_err(value_err)?;
    let spec = match spec_path {
        Some(p) => avatar_core::bench::CompositionSpec::load(&p).map_err(io_err)?,
        None => avatar_core::bench::CompositionSpec::default(),
    };
    let report = avatar_core::bench::validate_manifest(&samples, &spec);
    serde_json::to_string(&report).map_err(value_err)
}

/// Scene-cut indices of a clip directory.
#[pyfunction]
#[pyo3(signature = (clip_dir, threshold=None))]
fn detect_scene_cuts(clip_dir: PathBuf, threshold: Option<f64>) -> PyResult<Vec<usize>> {
    let clip = media::load_clip(&clip_dir).map_err(io_err)?;
    curation::detect_scene_cuts(&clip, threshold.unwrap_or(curation::DEFAULT_CUT_THRESHOLD))
        .map_err(value_err)
}

/// Audio-visual sync of a clip directory against its own audio.
/// keypoints_path defaults to <clip_dir>/keypoints.jsonl. Returns
/// (lag_frames, confidence).
#[pyfunction]
#[pyo3(signature = (clip_dir, keypoints_path=None))]
fn score_sync(clip_dir: PathBuf, keypoints_path: Option<PathBuf>) -> PyResult<(i64, f64)> {
    let clip = media::load_clip(&clip_dir).map_err(io_err)?;
    let kp = keypoints_path.unwrap_or_else(|| clip_dir.join("keypoints.jsonl"));
    let boxes = conditioning::MouthBoxes::load(&kp).map_err(io_err)?;
    let audio_rel = clip
        .audio_ref()
        .ok_or_else(|| value_err("clip.json has no audio reference"))?
        .to_path_buf();
    let audio_path = if audio_rel.is_absolute() { audio_rel } else { clip_dir.join(audio_rel) };
    let audio = media::load_audio(&audio_path).map_err(io_err)?;
    let features = avatar_core::audio::extract_features(&audio, 50.0).map_err(value_err)?;
    curation::score_sync(&clip, &boxes, &features).map_err(value_err)
}

/// Run the full pipeline: reference PPM + driving WAV + prompt out to a
/// clip directory. Returns the run report as JSON.
#[pyfunction]
#[pyo3(signature = (image, audio, prompt, out_dir, seed=0, workers=2, clips=None, fps=None))]
#[allow(clippy::too_many_arguments)]
fn generate(
    image: PathBuf,
    audio: PathBuf,
    prompt: &str,
    out_dir: PathBuf,
    seed: u64,
    workers: usize,
    clips: Option<usize>,
    fps: Option<f64>,
) -> PyResult<String> {
    let mut config = Config::default();
    if let Some(fps) = fps {
        config.media.fps = fps;
    }
    config.validate().map_err(value_err)?;
    let reference = media::load_frame(&image).map_err(io_err)?;
    let track = media::load_audio(&audio).map_err(io_err)?;
    let backend = ProceduralBackend::new(config.conditioning.boost_factor);
    let options =
        GenerateOptions { num_clips: clips, workers: workers.max(1), seed, ..Default::default() };
    let output = pipeline::generate(&reference, &track, prompt, &RulesDirector, &backend, &config, &options)
        .map_err(value_err)?;
    pipeline::write_outputs(&output, &track, &out_dir).map_err(io_err)?;
    serde_json::to_string(&output.report).map_err(value_err)
}

/// Curate clip directories; returns the manifest JSONL text.
#[pyfunction]
#[pyo3(signature = (clip_dirs, keypoints_suffix="/keypoints.jsonl", workers=2))]
fn curate(clip_dirs: Vec<PathBuf>, keypoints_suffix: &str, workers: usize) -> PyResult<String> {
    let thresholds = curation::Thresholds::default();
    let reports = curation::run_curation(&clip_dirs, keypoints_suffix, &thresholds, 50.0, workers.max(1));
    Ok(curation::reports_to_jsonl(&reports))
}

/// Mouth boxes recovered from a rendered clip directory, written as a
/// keypoints JSONL next to the frames. Returns the number of boxes.
#[pyfunction]
#[pyo3(signature = (clip_dir, out_path=None))]
fn export_keypoints(clip_dir: PathBuf, out_path: Option<PathBuf>) -> PyResult<usize> {
    let clip = media::load_clip(&clip_dir).map_err(io_err)?;
    let backend = ProceduralBackend::default();
    let boxes = backend
        .mouth_boxes(&clip)
        .ok_or_else(|| value_err("clip is not a recognizable procedural render"))?;
    let out = out_path.unwrap_or_else(|| clip_dir.join("keypoints.jsonl"));
    boxes.save(Path::new(&out)).map_err(io_err)?;
    Ok(boxes.len())
}

#[pymodule]
fn avatar_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(frames_for_audio, m)?)?;
    m.add_function(wrap_pyfunction!(build_audio_mask, m)?)?;
    m.add_function(wrap_pyfunction!(cfg_combine, m)?)?;
    m.add_function(wrap_pyfunction!(boost_audio_attention, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_loss, m)?)?;
    m.add_function(wrap_pyfunction!(partition_parameters, m)?)?;
    m.add_function(wrap_pyfunction!(corrupt_reference, m)?)?;
    m.add_function(wrap_pyfunction!(majority_vote, m)?)?;
    m.add_function(wrap_pyfunction!(tally_votes, m)?)?;
    m.add_function(wrap_pyfunction!(validate_manifest, m)?)?;
    m.add_function(wrap_pyfunction!(detect_scene_cuts, m)?)?;
    m.add_function(wrap_pyfunction!(score_sync, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(curate, m)?)?;
    m.add_function(wrap_pyfunction!(export_keypoints, m)?)?;
    Ok(())
}

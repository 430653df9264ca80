//! Data-curation filter suite with deterministic scorers: scene-cut
//! detection, lip-clarity scoring, audio-visual sync confidence, an
//! aesthetic proxy, and the thresholded pipeline executor emitting
//! keep/drop reports.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{extract_features, AudioFeatures};
use crate::conditioning::MouthBoxes;
use crate::media::{load_audio, load_clip, Clip, Frame};

/// Scene-cut histogram distance threshold (fraction of the maximum
/// possible distance).
pub const DEFAULT_CUT_THRESHOLD: f64 = 0.3;

/// Sync search range in frames (+- 0.25 s at 48 fps).
pub const SYNC_LAG_RANGE: i64 = 12;

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("scene-cut detection needs at least 2 frames")]
    SingleFrameClip,
    #[error("mouth boxes cover {covered} of {total} frames; need at least half")]
    TooFewBoxes { covered: usize, total: usize },
    #[error("audio-visual overlap is {0:.2}s; need at least 2s")]
    InsufficientOverlap(f64),
    #[error("empty clip")]
    EmptyClip,
}

/// 32-bin-per-channel RGB histogram, normalized to sum 1 per channel.
pub fn rgb_histogram(frame: &Frame) -> [[f64; 32]; 3] {
    let mut hist = [[0.0f64; 32]; 3];
    for px in frame.pixels().chunks_exact(3) {
        for c in 0..3 {
            hist[c][(px[c] >> 3) as usize] += 1.0;
        }
    }
    let n = (frame.width() as f64) * (frame.height() as f64);
    for channel in &mut hist {
        for bin in channel.iter_mut() {
            *bin /= n;
        }
    }
    hist
}

/// Normalized L1 histogram distance in [0, 1]: mean over channels of half
/// the per-channel L1 distance (1 = fully disjoint histograms).
pub fn histogram_distance(a: &[[f64; 32]; 3], b: &[[f64; 32]; 3]) -> f64 {
    let mut total = 0.0;
    for c in 0..3 {
        for bin in 0..32 {
            total += (a[c][bin] - b[c][bin]).abs();
        }
    }
    total / 6.0
}

/// Report frame i when the histogram distance between frames i-1 and i
/// exceeds `threshold`; the reported index is the first frame of the new
/// scene.
pub fn detect_scene_cuts(clip: &Clip, threshold: f64) -> Result<Vec<usize>, CurationError> {
    if clip.num_frames() < 2 {
        return Err(CurationError::SingleFrameClip);
    }
    let mut cuts = Vec::new();
    let mut prev = rgb_histogram(clip.frame(0));
    for i in 1..clip.num_frames() {
        let cur = rgb_histogram(clip.frame(i));
        if histogram_distance(&prev, &cur) > threshold {
            cuts.push(i);
        }
        prev = cur;
    }
    Ok(cuts)
}

/// 3x3 Laplacian response at interior pixels of the luma image, restricted
/// to a crop.
fn laplacian_variance_in(frame: &Frame, x0: u32, y0: u32, x1: u32, y1: u32) -> f64 {
    let x1 = x1.min(frame.width() - 1);
    let y1 = y1.min(frame.height() - 1);
    if x1 < x0 + 2 || y1 < y0 + 2 {
        return 0.0;
    }
    let mut values = Vec::new();
    for y in y0 + 1..y1 {
        for x in x0 + 1..x1 {
            let lap = frame.luma(x, y - 1) + frame.luma(x, y + 1) + frame.luma(x - 1, y)
                + frame.luma(x + 1, y)
                - 4.0 * frame.luma(x, y);
            values.push(lap);
        }
    }
    variance(&values)
}

fn variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Mean over frames of the Laplacian-response variance inside the mouth
/// crop, normalized by 255^2 (so 1.0 is a full-swing checkerboard).
/// Higher = sharper. Errors when boxes cover fewer than half the frames.
pub fn score_lip_clarity(clip: &Clip, boxes: &MouthBoxes) -> Result<f64, CurationError> {
    if clip.num_frames() == 0 {
        return Err(CurationError::EmptyClip);
    }
    let covered = (0..clip.num_frames()).filter(|&i| boxes.get(i as u64).is_some()).count();
    if covered * 2 < clip.num_frames() {
        return Err(CurationError::TooFewBoxes { covered, total: clip.num_frames() });
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, frame) in clip.frames().iter().enumerate() {
        if let Some(b) = boxes.get(i as u64) {
            sum += laplacian_variance_in(frame, b.x0, b.y0, b.x1, b.y1) / (255.0 * 255.0);
            n += 1;
        }
    }
    Ok(sum / n as f64)
}

/// Mean darkness (1 - luma/255) inside the mouth box of one frame.
pub fn mouth_darkness(frame: &Frame, b: &crate::conditioning::MouthBox) -> f64 {
    let x1 = b.x1.min(frame.width() - 1);
    let y1 = b.y1.min(frame.height() - 1);
    let mut sum = 0.0;
    let mut n = 0u64;
    for y in b.y0.min(y1)..=y1 {
        for x in b.x0.min(x1)..=x1 {
            sum += 1.0 - frame.luma(x, y) / 255.0;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Pearson correlation of two equal-length series; 0 when either is
/// constant.
fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    if a.len() < 2 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..a.len() {
        let da = a[i] - ma;
        let db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if va <= 1e-18 || vb <= 1e-18 {
        return 0.0;
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Audio-visual sync: mouth-openness per frame (mean darkness in the
/// mouth box) correlated against the envelope resampled to the frame
/// grid, maximized over lags in [-L, L]. Returns (lag, confidence); lag k
/// means the audio best aligns when advanced by k frames. Ties go to the
/// smallest |lag|, then to the negative lag. Constant signals give
/// confidence 0.
pub fn score_sync(
    clip: &Clip,
    boxes: &MouthBoxes,
    features: &AudioFeatures,
) -> Result<(i64, f64), CurationError> {
    let n = clip.num_frames();
    let fps = clip.fps();
    let overlap_s = (n as f64 / fps).min(features.duration_s());
    if overlap_s < 2.0 {
        return Err(CurationError::InsufficientOverlap(overlap_s));
    }

    // mouth-openness signal; frames without a box hold the previous value
    let mut m = Vec::with_capacity(n);
    let mut last = 0.0;
    for i in 0..n {
        if let Some(b) = boxes.get(i as u64) {
            last = mouth_darkness(clip.frame(i), b);
        }
        m.push(last);
    }
    // envelope resampled to the frame grid (frame-center token)
    let a: Vec<f64> = (0..n)
        .map(|i| {
            let token = ((i as f64 + 0.5) / fps * features.token_rate).floor() as i64;
            features.envelope_at_token(token)
        })
        .collect();

    let mut best_lag = 0i64;
    let mut best_conf = f64::NEG_INFINITY;
    for lag in -SYNC_LAG_RANGE..=SYNC_LAG_RANGE {
        // correlate m[i] with a[i + lag] over valid overlap
        let lo = (-lag).max(0) as usize;
        let hi = (n as i64 - lag.max(0)) as usize;
        if hi <= lo + 8 {
            continue;
        }
        let ms = &m[lo..hi];
        let avs: Vec<f64> = (lo..hi).map(|i| a[(i as i64 + lag) as usize]).collect();
        let conf = pearson(ms, &avs);
        let better = conf > best_conf + 1e-12
            || ((conf - best_conf).abs() <= 1e-12
                && (lag.abs() < best_lag.abs() || (lag.abs() == best_lag.abs() && lag < best_lag)));
        if better {
            best_conf = conf;
            best_lag = lag;
        }
    }
    if best_conf == f64::NEG_INFINITY {
        return Ok((0, 0.0));
    }
    Ok((best_lag, best_conf))
}

/// Aesthetic proxy: mean over every-12th frame of
/// 0.4 * sharpness + 0.3 * contrast + 0.3 * colorfulness, each component
/// normalized to [0, 1]:
/// sharpness   = min(1, laplacian variance / 255^2)
/// contrast    = min(1, intensity std / 128)
/// colorfulness = min(1, M / 128) with the opponent-channel statistic
///                M = sqrt(s_rg^2 + s_yb^2) + 0.3 sqrt(m_rg^2 + m_yb^2).
pub fn score_aesthetic(clip: &Clip) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in (0..clip.num_frames()).step_by(12) {
        sum += frame_aesthetic(clip.frame(i));
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn frame_aesthetic(frame: &Frame) -> f64 {
    let (w, h) = (frame.width(), frame.height());
    let sharpness = (laplacian_variance_in(frame, 0, 0, w - 1, h - 1) / (255.0 * 255.0)).min(1.0);

    let lumas: Vec<f64> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| frame.luma(x, y))
        .collect();
    let contrast = (variance(&lumas).sqrt() / 128.0).min(1.0);

    let mut rg = Vec::with_capacity(lumas.len());
    let mut yb = Vec::with_capacity(lumas.len());
    for px in frame.pixels().chunks_exact(3) {
        let (r, g, b) = (px[0] as f64, px[1] as f64, px[2] as f64);
        rg.push(r - g);
        yb.push(0.5 * (r + g) - b);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let m = (variance(&rg) + variance(&yb)).sqrt() + 0.3 * (mean(&rg).powi(2) + mean(&yb).powi(2)).sqrt();
    let colorfulness = (m / 128.0).min(1.0);

    0.4 * sharpness + 0.3 * contrast + 0.3 * colorfulness
}

/// Keep/drop thresholds; a None disables that check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Thresholds {
    pub max_scene_cuts: Option<usize>,
    pub min_lip_clarity: Option<f64>,
    pub min_sync_confidence: Option<f64>,
    pub max_abs_lag_frames: Option<i64>,
    pub min_aesthetic: Option<f64>,
    /// Scene-cut histogram distance threshold.
    pub cut_threshold: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            max_scene_cuts: Some(0),
            min_lip_clarity: Some(0.0005),
            min_sync_confidence: Some(0.5),
            max_abs_lag_frames: Some(2),
            min_aesthetic: Some(0.02),
            cut_threshold: DEFAULT_CUT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Keep,
    Drop,
}

/// One line of the curation manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurationReport {
    pub clip: String,
    pub scene_cuts: Vec<usize>,
    pub lip_clarity: Option<f64>,
    pub sync_lag_frames: Option<i64>,
    pub sync_confidence: Option<f64>,
    pub aesthetic: Option<f64>,
    pub verdict: Verdict,
    pub failed: Vec<String>,
}

/// Score one loaded clip against the thresholds.
pub fn curate_clip(
    clip_name: &str,
    clip: &Clip,
    boxes: &MouthBoxes,
    features: Option<&AudioFeatures>,
    thresholds: &Thresholds,
) -> CurationReport {
    let mut failed = Vec::new();

    let scene_cuts = detect_scene_cuts(clip, thresholds.cut_threshold).unwrap_or_default();
    if let Some(max) = thresholds.max_scene_cuts {
        if scene_cuts.len() > max {
            failed.push("scene_cuts".to_string());
        }
    }

    let lip_clarity = score_lip_clarity(clip, boxes).ok();
    if let Some(min) = thresholds.min_lip_clarity {
        if lip_clarity.is_none_or(|v| v < min) {
            failed.push("lip_clarity".to_string());
        }
    }

    let sync = features.and_then(|f| score_sync(clip, boxes, f).ok());
    if thresholds.min_sync_confidence.is_some() || thresholds.max_abs_lag_frames.is_some() {
        match sync {
            Some((lag, conf)) => {
                if thresholds.min_sync_confidence.is_some_and(|min| conf < min)
                    || thresholds.max_abs_lag_frames.is_some_and(|max| lag.abs() > max)
                {
                    failed.push("sync".to_string());
                }
            }
            None => failed.push("sync".to_string()),
        }
    }

    let aesthetic = score_aesthetic(clip);
    if let Some(min) = thresholds.min_aesthetic {
        if aesthetic < min {
            failed.push("aesthetic".to_string());
        }
    }

    CurationReport {
        clip: clip_name.to_string(),
        scene_cuts,
        lip_clarity,
        sync_lag_frames: sync.map(|s| s.0),
        sync_confidence: sync.map(|s| s.1),
        aesthetic: Some(aesthetic),
        verdict: if failed.is_empty() { Verdict::Keep } else { Verdict::Drop },
        failed,
    }
}

fn io_error_report(name: &str, detail: String) -> CurationReport {
    CurationReport {
        clip: name.to_string(),
        scene_cuts: Vec::new(),
        lip_clarity: None,
        sync_lag_frames: None,
        sync_confidence: None,
        aesthetic: None,
        verdict: Verdict::Drop,
        failed: vec!["io_error".to_string(), detail],
    }
}

/// Run curation over clip directories in parallel. The output order
/// matches the input order regardless of completion order; an unreadable
/// clip yields a drop verdict with reason "io_error" and processing
/// continues. The keypoints file for `<dir>` is `<dir><keypoints_suffix>`.
pub fn run_curation(
    input_dirs: &[PathBuf],
    keypoints_suffix: &str,
    thresholds: &Thresholds,
    token_rate: f64,
    workers: usize,
) -> Vec<CurationReport> {
    assert!(workers >= 1);
    let results: Vec<Mutex<Option<CurationReport>>> = input_dirs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(input_dirs.len().max(1)) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= input_dirs.len() {
                    break;
                }
                let dir = &input_dirs[idx];
                let report = curate_dir(dir, keypoints_suffix, thresholds, token_rate);
                *results[idx].lock().unwrap() = Some(report);
            });
        }
    });
    results.into_iter().map(|m| m.into_inner().unwrap().unwrap()).collect()
}

fn curate_dir(dir: &Path, keypoints_suffix: &str, thresholds: &Thresholds, token_rate: f64) -> CurationReport {
    let name = dir.display().to_string();
    let clip = match load_clip(dir) {
        Ok(c) => c,
        Err(e) => return io_error_report(&name, e.to_string()),
    };
    let kp_path = PathBuf::from(format!("{}{}", dir.display(), keypoints_suffix));
    let boxes = match MouthBoxes::load(&kp_path) {
        Ok(b) => b,
        Err(e) => return io_error_report(&name, e.to_string()),
    };
    let features = clip.audio_ref().and_then(|rel| {
        let path = if rel.is_absolute() { rel.to_path_buf() } else { dir.join(rel) };
        load_audio(&path).ok().and_then(|track| extract_features(&track, token_rate).ok())
    });
    curate_clip(&name, &clip, &boxes, features.as_ref(), thresholds)
}

/// Serialize reports as JSONL, one report per line, in order.
pub fn reports_to_jsonl(reports: &[CurationReport]) -> String {
    let mut out = String::new();
    for r in reports {
        out.push_str(&serde_json::to_string(r).expect("report serializes"));
        out.push('\n');
    }
    out
}

//! Conditioning mechanisms as standalone numerical components:
//! sliding-window audio attention masks, mouth-region weighted loss,
//! frame-padding augmentation, the trainable/frozen parameter partition,
//! reference-image corruption for negative-frame CFG, and audio-attention
//! boosting.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::media::{Frame, TimeGrid};
use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum ConditioningError {
    #[error("mask needs at least one frame and one audio token (frames={frames}, tokens={tokens})")]
    EmptyMask { frames: u64, tokens: u64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{path}: {detail}")]
    BadKeypointsFile { path: String, detail: String },
}

/// Per-video-token allowed audio-token range (contiguous, inclusive).
/// Ranges are monotonically non-decreasing in the frame index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionMask {
    pub num_video_tokens: u64,
    pub num_audio_tokens: u64,
    pub allowed: Vec<(u64, u64)>,
}

impl AttentionMask {
    pub fn is_allowed(&self, frame: u64, token: u64) -> bool {
        let (lo, hi) = self.allowed[frame as usize];
        token >= lo && token <= hi
    }
}

/// Build the sliding-window audio attention mask: for frame i the base
/// range is every token whose interval overlaps the frame's interval,
/// expanded by `pad_tokens` on each side and clamped to the token count.
pub fn build_audio_mask(
    grid: &TimeGrid,
    num_frames: u64,
    num_audio_tokens: u64,
    pad_tokens: u64,
) -> Result<AttentionMask, ConditioningError> {
    if num_frames == 0 || num_audio_tokens == 0 {
        return Err(ConditioningError::EmptyMask { frames: num_frames, tokens: num_audio_tokens });
    }
    let mut allowed = Vec::with_capacity(num_frames as usize);
    for i in 0..num_frames {
        let (lo, hi) = grid.tokens_overlapping_frame(i);
        let lo = lo.saturating_sub(pad_tokens).min(num_audio_tokens - 1);
        let hi = hi.saturating_add(pad_tokens).min(num_audio_tokens - 1);
        allowed.push((lo, hi));
    }
    Ok(AttentionMask { num_video_tokens: num_frames, num_audio_tokens, allowed })
}

/// Per-frame mouth rectangle in pixels with detector confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MouthBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
    pub conf: f64,
}

/// Confidence below which a box is treated as absent.
pub const BOX_CONFIDENCE_FLOOR: f64 = 0.3;

/// One line of the keypoints JSONL file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeypointRecord {
    pub frame: u64,
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
    pub conf: f64,
}

/// Sparse per-frame mouth boxes, loaded from a keypoints JSONL file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MouthBoxes {
    records: std::collections::BTreeMap<u64, MouthBox>,
}

impl MouthBoxes {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, frame: u64, b: MouthBox) {
        self.records.insert(frame, b);
    }

    pub fn get(&self, frame: u64) -> Option<&MouthBox> {
        self.records.get(&frame)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self, ConditioningError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConditioningError::BadKeypointsFile {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let mut out = MouthBoxes::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: KeypointRecord =
                serde_json::from_str(line).map_err(|e| ConditioningError::BadKeypointsFile {
                    path: path.display().to_string(),
                    detail: format!("line {}: {e}", lineno + 1),
                })?;
            out.insert(r.frame, MouthBox { x0: r.x0, y0: r.y0, x1: r.x1, y1: r.y1, conf: r.conf });
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut text = String::new();
        for (frame, b) in &self.records {
            let r = KeypointRecord { frame: *frame, x0: b.x0, y0: b.y0, x1: b.x1, y1: b.y1, conf: b.conf };
            text.push_str(&serde_json::to_string(&r).expect("record serializes"));
            text.push('\n');
        }
        std::fs::write(path, text)
    }
}

/// Per-pixel loss multiplier: `w_mouth` inside the mouth box, 1 elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMask {
    pub width: u32,
    pub height: u32,
    pub weights: Vec<f64>,
}

impl WeightMask {
    pub fn at(&self, x: u32, y: u32) -> f64 {
        self.weights[y as usize * self.width as usize + x as usize]
    }
}

/// Build the mouth-region weight mask. A box with confidence below
/// [`BOX_CONFIDENCE_FLOOR`] counts as absent (all-ones mask). A box
/// reaching outside the image is clamped, and the clamp recorded as a
/// warning.
pub fn build_weight_mask(
    mouth: Option<&MouthBox>,
    width: u32,
    height: u32,
    w_mouth: f64,
) -> (WeightMask, Vec<String>) {
    assert!(w_mouth >= 1.0, "w_mouth must be >= 1");
    let mut warnings = Vec::new();
    let mut weights = vec![1.0; width as usize * height as usize];
    if let Some(b) = mouth {
        if b.conf >= BOX_CONFIDENCE_FLOOR {
            let (x0, y0) = (b.x0, b.y0);
            let (mut x1, mut y1) = (b.x1, b.y1);
            if x1 >= width || y1 >= height {
                x1 = x1.min(width.saturating_sub(1));
                y1 = y1.min(height.saturating_sub(1));
                warnings.push(format!(
                    "mouth box ({},{})-({},{}) clamped to {}x{} image",
                    b.x0, b.y0, b.x1, b.y1, width, height
                ));
            }
            for y in y0.min(height)..=y1.min(height.saturating_sub(1)) {
                for x in x0.min(width)..=x1.min(width.saturating_sub(1)) {
                    weights[y as usize * width as usize + x as usize] = w_mouth;
                }
            }
        }
    }
    (WeightMask { width, height, weights }, warnings)
}

/// Weighted MSE and its gradient:
/// loss = sum(w * (pred - target)^2) / sum(w), grad = 2 w (pred - target) / sum(w).
pub fn weighted_loss(
    pred: &[f64],
    target: &[f64],
    mask: &WeightMask,
) -> Result<(f64, Vec<f64>), ConditioningError> {
    let n = mask.weights.len();
    if pred.len() != n || target.len() != n {
        return Err(ConditioningError::ShapeMismatch(format!(
            "pred {} / target {} vs mask {n}",
            pred.len(),
            target.len()
        )));
    }
    let wsum: f64 = mask.weights.iter().sum();
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(n);
    for i in 0..n {
        let d = pred[i] - target[i];
        loss += mask.weights[i] * d * d;
        grad.push(2.0 * mask.weights[i] * d / wsum);
    }
    Ok((loss / wsum, grad))
}

/// Pad a frame with `fill` pixels on each side; the original pixels land
/// at offset (pad_left, pad_top).
pub fn pad_frame(frame: &Frame, left: u32, right: u32, top: u32, bottom: u32, fill: [u8; 3]) -> Frame {
    let w = frame.width() + left + right;
    let h = frame.height() + top + bottom;
    let mut out = Frame::filled(w, h, fill).expect("padded frame is non-empty");
    for y in 0..frame.height() {
        for x in 0..frame.width() {
            out.set(x + left, y + top, frame.get(x, y));
        }
    }
    out
}

/// Companion sampler for training-time padding augmentation: each side is
/// drawn uniformly from [0, ratio * dim].
pub fn sample_pads(seed: u64, ratio: f64, width: u32, height: u32) -> (u32, u32, u32, u32) {
    assert!(ratio >= 0.0);
    let mut rng = Rng::new(seed);
    let max_w = (ratio * width as f64).floor() as u64;
    let max_h = (ratio * height as f64).floor() as u64;
    let mut draw = |max: u64| if max == 0 { 0 } else { rng.range_u64(0, max) as u32 };
    let left = draw(max_w);
    let right = draw(max_w);
    let top = draw(max_h);
    let bottom = draw(max_h);
    (left, right, top, bottom)
}

/// Result of splitting a named parameter set into trainable and frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPartition {
    pub trainable: Vec<String>,
    pub frozen: Vec<String>,
    pub warnings: Vec<String>,
}

/// Path segment that marks a parameter as part of the text cross-attention
/// layer (the frozen side of the partition).
pub const TEXT_XATTN_SEGMENT: &str = "text_xattn";

/// Partition parameter names: any name with a `text_xattn` path segment is
/// frozen, everything else trains. The partition is exhaustive and
/// disjoint; an input with no frozen matches records a warning.
pub fn partition_parameters(names: &[String]) -> ParameterPartition {
    let mut trainable = Vec::new();
    let mut frozen = Vec::new();
    for name in names {
        if name.split('.').any(|seg| seg == TEXT_XATTN_SEGMENT) {
            frozen.push(name.clone());
        } else {
            trainable.push(name.clone());
        }
    }
    let mut warnings = Vec::new();
    if frozen.is_empty() && !names.is_empty() {
        warnings.push(format!("no parameter names matched the '{TEXT_XATTN_SEGMENT}' pattern"));
    }
    ParameterPartition { trainable, frozen, warnings }
}

/// Reference-image corruption recipe. The identity recipe
/// (0, 1, 1, 0, 0) leaves images bit-identical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionRecipe {
    pub blur_radius: u32,
    pub contrast_gain: f64,
    pub saturation_gain: f64,
    pub hue_shift_deg: f64,
    pub texture_noise_amp: f64,
    pub seed: u64,
}

impl CorruptionRecipe {
    pub const fn identity(seed: u64) -> Self {
        CorruptionRecipe {
            blur_radius: 0,
            contrast_gain: 1.0,
            saturation_gain: 1.0,
            hue_shift_deg: 0.0,
            texture_noise_amp: 0.0,
            seed,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.blur_radius == 0
            && self.contrast_gain == 1.0
            && self.saturation_gain == 1.0
            && self.hue_shift_deg == 0.0
            && self.texture_noise_amp == 0.0
    }
}

/// Corrupt a reference image, applying in fixed order: box blur, contrast,
/// saturation, hue rotation, seeded uniform noise. Identity stages are
/// skipped outright, so the identity recipe is bit-exact.
pub fn corrupt_reference(image: &Frame, recipe: &CorruptionRecipe) -> Frame {
    let mut out = image.clone();
    if recipe.blur_radius > 0 {
        out = box_blur(&out, recipe.blur_radius);
    }
    if recipe.contrast_gain != 1.0 {
        out = map_pixels(&out, |c| {
            let v = 128.0 + recipe.contrast_gain * (c as f64 - 128.0);
            v.round().clamp(0.0, 255.0) as u8
        });
    }
    if recipe.saturation_gain != 1.0 || recipe.hue_shift_deg != 0.0 {
        out = adjust_hsv(&out, recipe.saturation_gain, recipe.hue_shift_deg);
    }
    if recipe.texture_noise_amp > 0.0 {
        let mut rng = Rng::new(recipe.seed);
        let amp = recipe.texture_noise_amp * 255.0;
        let mut noisy = out.clone();
        for y in 0..out.height() {
            for x in 0..out.width() {
                let px = out.get(x, y);
                let mut np = [0u8; 3];
                for (c, out_c) in np.iter_mut().enumerate() {
                    let n = rng.range_f64(-amp, amp);
                    *out_c = (px[c] as f64 + n).round().clamp(0.0, 255.0) as u8;
                }
                noisy.set(x, y, np);
            }
        }
        out = noisy;
    }
    out
}

fn map_pixels(frame: &Frame, f: impl Fn(u8) -> u8) -> Frame {
    let pixels = frame.pixels().iter().map(|&c| f(c)).collect();
    Frame::from_pixels(frame.width(), frame.height(), pixels).expect("same dims")
}

/// Box blur with clamped borders: mean over the (2r+1)^2 window.
fn box_blur(frame: &Frame, radius: u32) -> Frame {
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    let r = radius as i64;
    let mut out = frame.clone();
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0u64; 3];
            let mut count = 0u64;
            for dy in -r..=r {
                for dx in -r..=r {
                    let sx = (x + dx).clamp(0, w - 1) as u32;
                    let sy = (y + dy).clamp(0, h - 1) as u32;
                    let px = frame.get(sx, sy);
                    for c in 0..3 {
                        acc[c] += px[c] as u64;
                    }
                    count += 1;
                }
            }
            let px = [
                (acc[0] as f64 / count as f64).round() as u8,
                (acc[1] as f64 / count as f64).round() as u8,
                (acc[2] as f64 / count as f64).round() as u8,
            ];
            out.set(x as u32, y as u32, px);
        }
    }
    out
}

/// RGB -> HSV -> RGB with saturation gain and hue rotation. Standard
/// hexcone conversion over [0,1] channels, rounded back to u8.
fn adjust_hsv(frame: &Frame, sat_gain: f64, hue_shift_deg: f64) -> Frame {
    let mut out = frame.clone();
    for y in 0..frame.height() {
        for x in 0..frame.width() {
            let [r8, g8, b8] = frame.get(x, y);
            let (r, g, b) = (r8 as f64 / 255.0, g8 as f64 / 255.0, b8 as f64 / 255.0);
            let max = r.max(g).max(b);
            let min = r.min(g).min(b);
            let delta = max - min;
            let mut h = if delta == 0.0 {
                0.0
            } else if max == r {
                60.0 * (((g - b) / delta) % 6.0)
            } else if max == g {
                60.0 * ((b - r) / delta + 2.0)
            } else {
                60.0 * ((r - g) / delta + 4.0)
            };
            if h < 0.0 {
                h += 360.0;
            }
            let s = if max == 0.0 { 0.0 } else { delta / max };
            let v = max;

            let s = (s * sat_gain).clamp(0.0, 1.0);
            let h = (h + hue_shift_deg).rem_euclid(360.0);

            let c = v * s;
            let x1 = c * (1.0 - ((h / 60.0) % 2.0 - 1.0).abs());
            let m = v - c;
            let (r1, g1, b1) = match h {
                h if h < 60.0 => (c, x1, 0.0),
                h if h < 120.0 => (x1, c, 0.0),
                h if h < 180.0 => (0.0, c, x1),
                h if h < 240.0 => (0.0, x1, c),
                h if h < 300.0 => (x1, 0.0, c),
                _ => (c, 0.0, x1),
            };
            out.set(
                x,
                y,
                [
                    ((r1 + m) * 255.0).round().clamp(0.0, 255.0) as u8,
                    ((g1 + m) * 255.0).round().clamp(0.0, 255.0) as u8,
                    ((b1 + m) * 255.0).round().clamp(0.0, 255.0) as u8,
                ],
            );
        }
    }
    out
}

/// Classifier-free guidance combination: e_neg + scale * (e_pos - e_neg).
/// scale 1 recovers the positive branch, scale 0 the negative.
pub fn cfg_combine(e_pos: &[f64], e_neg: &[f64], scale: f64) -> Result<Vec<f64>, ConditioningError> {
    if e_pos.len() != e_neg.len() {
        return Err(ConditioningError::ShapeMismatch(format!(
            "e_pos {} vs e_neg {}",
            e_pos.len(),
            e_neg.len()
        )));
    }
    Ok(e_pos
        .iter()
        .zip(e_neg)
        .map(|(&p, &n)| n + scale * (p - n))
        .collect())
}

/// Scale audio cross-attention output values by `factor` (applied
/// post-attention, pre-residual by backends that honor it).
pub fn boost_audio_attention(values: &[f64], factor: f64) -> Vec<f64> {
    assert!(factor > 0.0, "boost factor must be positive");
    values.iter().map(|&v| v * factor).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::TimeGrid;

    /// Brute-force interval-overlap oracle over all (frame, token) pairs.
    fn oracle_mask(grid: &TimeGrid, frames: u64, tokens: u64, pad: u64) -> Vec<(u64, u64)> {
        let mut out = Vec::new();
        for i in 0..frames {
            let (fs, fe) = grid.frame_interval(i);
            let mut lo = None;
            let mut hi = None;
            for j in 0..tokens {
                let (ts, te) = grid.token_interval(j);
                if ts.max(fs) < te.min(fe) {
                    if lo.is_none() {
                        lo = Some(j);
                    }
                    hi = Some(j);
                }
            }
            let lo = lo.unwrap().saturating_sub(pad).min(tokens - 1);
            let hi = hi.unwrap().saturating_add(pad).min(tokens - 1);
            out.push((lo, hi));
        }
        out
    }

    #[test]
    fn mask_matches_oracle_fps10_tr50() {
        let grid = TimeGrid::new(10.0, 50.0).unwrap();
        let mask = build_audio_mask(&grid, 20, 100, 0).unwrap();
        assert_eq!(mask.allowed, oracle_mask(&grid, 20, 100, 0));
        for i in 0..20u64 {
            assert_eq!(mask.allowed[i as usize], (5 * i, 5 * i + 4));
        }
    }

    #[test]
    fn mask_pad_clamps_at_edges() {
        let grid = TimeGrid::new(10.0, 50.0).unwrap();
        let mask = build_audio_mask(&grid, 3, 20, 2).unwrap();
        assert_eq!(mask.allowed, oracle_mask(&grid, 3, 20, 2));
        assert_eq!(mask.allowed[0], (0, 6));
        assert_eq!(mask.allowed[1], (3, 11));
        assert_eq!(mask.allowed[2], (8, 16));
    }

    #[test]
    fn saturating_pad_allows_everything() {
        let grid = TimeGrid::new(10.0, 50.0).unwrap();
        let mask = build_audio_mask(&grid, 4, 20, 20).unwrap();
        for &(lo, hi) in &mask.allowed {
            assert_eq!((lo, hi), (0, 19));
        }
    }

    #[test]
    fn mask_is_monotone_and_local() {
        for &(fps, tr, pad) in &[(10.0, 50.0, 0u64), (24.0, 50.0, 2), (48.0, 50.0, 3), (12.0, 30.0, 1)] {
            let grid = TimeGrid::new(fps, tr).unwrap();
            let frames = 50;
            let tokens = (frames as f64 / fps * tr).ceil() as u64 + pad + 4;
            let mask = build_audio_mask(&grid, frames, tokens, pad).unwrap();
            for w in mask.allowed.windows(2) {
                assert!(w[0].0 <= w[1].0 && w[0].1 <= w[1].1, "fps={fps} tr={tr}");
            }
            // locality: no allowed token lies farther than (pad+1)/tr
            // seconds from the frame interval
            for (i, &(lo, hi)) in mask.allowed.iter().enumerate() {
                let (fs, fe) = grid.frame_interval(i as u64);
                for j in [lo, hi] {
                    let (ts, te) = grid.token_interval(j);
                    let dist = if te <= fs {
                        fs - te
                    } else if ts >= fe {
                        ts - fe
                    } else {
                        0.0
                    };
                    assert!(dist <= (pad as f64 + 1.0) / tr + 1e-12, "frame {i} token {j} dist {dist}");
                }
            }
        }
    }

    #[test]
    fn empty_mask_inputs_rejected() {
        let grid = TimeGrid::new(10.0, 50.0).unwrap();
        assert!(build_audio_mask(&grid, 0, 10, 0).is_err());
        assert!(build_audio_mask(&grid, 10, 0, 0).is_err());
    }

    #[test]
    fn weight_mask_geometry() {
        let b = MouthBox { x0: 10, y0: 20, x1: 30, y1: 40, conf: 0.9 };
        let (mask, warnings) = build_weight_mask(Some(&b), 64, 64, 2.0);
        assert!(warnings.is_empty());
        let heavy = mask.weights.iter().filter(|&&w| w == 2.0).count();
        assert_eq!(heavy, 21 * 21);
        assert_eq!(mask.at(10, 20), 2.0);
        assert_eq!(mask.at(30, 40), 2.0);
        assert_eq!(mask.at(9, 20), 1.0);
        assert_eq!(mask.at(31, 40), 1.0);
    }

    #[test]
    fn weight_mask_identity_and_low_confidence() {
        let b = MouthBox { x0: 0, y0: 0, x1: 5, y1: 5, conf: 0.1 };
        let (mask, _) = build_weight_mask(Some(&b), 8, 8, 2.0);
        assert!(mask.weights.iter().all(|&w| w == 1.0));
        let b2 = MouthBox { conf: 0.9, ..b };
        let (mask2, _) = build_weight_mask(Some(&b2), 8, 8, 1.0);
        assert!(mask2.weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn weight_mask_out_of_bounds_clamps_with_warning() {
        let b = MouthBox { x0: 4, y0: 4, x1: 100, y1: 100, conf: 0.9 };
        let (mask, warnings) = build_weight_mask(Some(&b), 8, 8, 3.0);
        assert_eq!(warnings.len(), 1);
        assert_eq!(mask.at(7, 7), 3.0);
        assert_eq!(mask.at(3, 3), 1.0);
    }

    #[test]
    fn loss_zero_when_equal_and_mse_when_unweighted() {
        let (mask, _) = build_weight_mask(None, 4, 4, 2.0);
        let a: Vec<f64> = (0..16).map(|i| i as f64 * 0.1).collect();
        let (loss, grad) = weighted_loss(&a, &a, &mask).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));

        let b: Vec<f64> = (0..16).map(|i| i as f64 * 0.1 + 1.0).collect();
        let (loss, _) = weighted_loss(&a, &b, &mask).unwrap();
        let mse = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / 16.0;
        assert!((loss - mse).abs() < 1e-12);
    }

    /// Central finite-difference gradient oracle at rel. error < 1e-6,
    /// 100 random instances.
    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Rng::new(99);
        for trial in 0..100 {
            let (w, h) = (8u32, 8u32);
            let n = (w * h) as usize;
            let boxed = MouthBox {
                x0: rng.below(4) as u32,
                y0: rng.below(4) as u32,
                x1: 4 + rng.below(4) as u32,
                y1: 4 + rng.below(4) as u32,
                conf: 1.0,
            };
            let (mask, _) = build_weight_mask(Some(&boxed), w, h, 1.0 + rng.next_f64() * 3.0);
            let pred: Vec<f64> = (0..n).map(|_| rng.range_f64(-1.0, 1.0)).collect();
            let target: Vec<f64> = (0..n).map(|_| rng.range_f64(-1.0, 1.0)).collect();
            let (_, grad) = weighted_loss(&pred, &target, &mask).unwrap();
            // the loss is quadratic in pred, so central differences have no
            // truncation error; a larger step only reduces roundoff
            let eps = 1e-4;
            for i in (0..n).step_by(7) {
                let mut up = pred.clone();
                up[i] += eps;
                let mut dn = pred.clone();
                dn[i] -= eps;
                let (lu, _) = weighted_loss(&up, &target, &mask).unwrap();
                let (ld, _) = weighted_loss(&dn, &target, &mask).unwrap();
                let fd = (lu - ld) / (2.0 * eps);
                let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-9);
                assert!(rel < 1e-6, "trial {trial} idx {i}: {} vs {fd}", grad[i]);
            }
        }
    }

    #[test]
    fn loss_shape_mismatch_rejected() {
        let (mask, _) = build_weight_mask(None, 4, 4, 1.0);
        assert!(weighted_loss(&[0.0; 15], &[0.0; 16], &mask).is_err());
    }

    #[test]
    fn pad_frame_geometry_and_identity() {
        let mut f = Frame::filled(64, 64, [10, 20, 30]).unwrap();
        f.set(0, 0, [1, 2, 3]);
        let padded = pad_frame(&f, 16, 16, 16, 16, [0, 0, 0]);
        assert_eq!(padded.width(), 96);
        assert_eq!(padded.height(), 96);
        assert_eq!(padded.get(16, 16), [1, 2, 3]);
        assert_eq!(padded.get(17, 16), [10, 20, 30]);
        assert_eq!(padded.get(0, 0), [0, 0, 0]);
        assert_eq!(pad_frame(&f, 0, 0, 0, 0, [0, 0, 0]), f);
    }

    #[test]
    fn pad_sampler_is_seed_deterministic_and_bounded() {
        let a = sample_pads(123, 0.25, 64, 48);
        let b = sample_pads(123, 0.25, 64, 48);
        assert_eq!(a, b);
        for seed in 0..50 {
            let (l, r, t, btm) = sample_pads(seed, 0.25, 64, 48);
            assert!(l <= 16 && r <= 16 && t <= 12 && btm <= 12);
        }
        assert_ne!(sample_pads(1, 0.25, 64, 48), sample_pads(2, 0.25, 64, 48));
    }

    #[test]
    fn partition_by_pattern() {
        let names: Vec<String> = ["text_xattn.q", "audio_xattn.q", "blocks.0.text_xattn.out", "mlp.w1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let p = partition_parameters(&names);
        assert_eq!(p.frozen, vec!["text_xattn.q".to_string(), "blocks.0.text_xattn.out".to_string()]);
        assert_eq!(p.trainable, vec!["audio_xattn.q".to_string(), "mlp.w1".to_string()]);
        assert!(p.warnings.is_empty());
        assert_eq!(p.frozen.len() + p.trainable.len(), names.len());
    }

    #[test]
    fn partition_empty_and_no_match() {
        let p = partition_parameters(&[]);
        assert!(p.trainable.is_empty() && p.frozen.is_empty() && p.warnings.is_empty());

        let names = vec!["audio_xattn.q".to_string()];
        let p = partition_parameters(&names);
        assert!(p.frozen.is_empty());
        assert_eq!(p.warnings.len(), 1);
    }

    fn textured_frame(w: u32, h: u32) -> Frame {
        let mut f = Frame::filled(w, h, [0, 0, 0]).unwrap();
        for y in 0..h {
            for x in 0..w {
                f.set(
                    x,
                    y,
                    [((x * 37 + y * 11) % 256) as u8, ((x * 5 + y * 91) % 256) as u8, ((x * 13) % 256) as u8],
                );
            }
        }
        f
    }

    #[test]
    fn identity_recipe_is_bit_exact() {
        let f = textured_frame(16, 16);
        let out = corrupt_reference(&f, &CorruptionRecipe::identity(5));
        assert_eq!(out, f);
    }

    #[test]
    fn contrast_fixed_point_and_formula() {
        let gray = Frame::filled(8, 8, [128, 128, 128]).unwrap();
        let recipe = CorruptionRecipe { contrast_gain: 1.5, ..CorruptionRecipe::identity(0) };
        assert_eq!(corrupt_reference(&gray, &recipe), gray);

        // 128 + 1.5 * (200 - 128) = 236
        let px = Frame::filled(2, 2, [200, 200, 200]).unwrap();
        let out = corrupt_reference(&px, &recipe);
        assert_eq!(out.get(0, 0), [236, 236, 236]);
    }

    #[test]
    fn non_identity_recipes_change_a_textured_image_deterministically() {
        let f = textured_frame(16, 16);
        let recipes = [
            CorruptionRecipe { blur_radius: 2, ..CorruptionRecipe::identity(3) },
            CorruptionRecipe { contrast_gain: 1.8, ..CorruptionRecipe::identity(3) },
            CorruptionRecipe { saturation_gain: 1.6, ..CorruptionRecipe::identity(3) },
            CorruptionRecipe { hue_shift_deg: 90.0, ..CorruptionRecipe::identity(3) },
            CorruptionRecipe { texture_noise_amp: 0.1, ..CorruptionRecipe::identity(3) },
        ];
        for r in recipes {
            let a = corrupt_reference(&f, &r);
            let b = corrupt_reference(&f, &r);
            assert_eq!(a, b, "seeded determinism for {r:?}");
            assert_ne!(a, f, "recipe must change the image: {r:?}");
        }
        let noisy1 =
            corrupt_reference(&f, &CorruptionRecipe { texture_noise_amp: 0.1, ..CorruptionRecipe::identity(3) });
        let noisy2 =
            corrupt_reference(&f, &CorruptionRecipe { texture_noise_amp: 0.1, ..CorruptionRecipe::identity(4) });
        assert_ne!(noisy1, noisy2, "different seeds give different noise");
    }

    #[test]
    fn cfg_endpoints_and_linearity() {
        let pos = [1.0, 2.0, -3.0];
        let neg = [0.5, 0.0, 1.0];
        assert_eq!(cfg_combine(&pos, &neg, 1.0).unwrap(), pos.to_vec());
        assert_eq!(cfg_combine(&pos, &neg, 0.0).unwrap(), neg.to_vec());
        assert_eq!(cfg_combine(&[1.0], &[0.0], 2.0).unwrap(), vec![2.0]);
        assert!(cfg_combine(&[1.0], &[1.0, 2.0], 1.0).is_err());
    }

    /// combine(s1) + combine(s2) == 2 * combine((s1+s2)/2), exactly, on
    /// dyadic inputs (so every float op is exact).
    #[test]
    fn cfg_is_affine_in_scale() {
        let mut rng = Rng::new(2024);
        for _ in 0..200 {
            let n = 1 + rng.below(8) as usize;
            let dyadic = |rng: &mut Rng| (rng.below(16385) as f64 - 8192.0) / 1024.0;
            let pos: Vec<f64> = (0..n).map(|_| dyadic(&mut rng)).collect();
            let neg: Vec<f64> = (0..n).map(|_| dyadic(&mut rng)).collect();
            let s1 = (rng.below(33) as f64 - 16.0) / 4.0;
            let s2 = (rng.below(33) as f64 - 16.0) / 4.0;
            let c1 = cfg_combine(&pos, &neg, s1).unwrap();
            let c2 = cfg_combine(&pos, &neg, s2).unwrap();
            let mid = cfg_combine(&pos, &neg, (s1 + s2) / 2.0).unwrap();
            for i in 0..n {
                assert_eq!(c1[i] + c2[i], 2.0 * mid[i]);
            }
        }
    }

    #[test]
    fn boost_scales_elementwise() {
        assert_eq!(boost_audio_attention(&[2.0, 4.0], 1.5), vec![3.0, 6.0]);
        assert_eq!(boost_audio_attention(&[2.0, 4.0], 1.0), vec![2.0, 4.0]);
        assert_eq!(boost_audio_attention(&[2.0, 4.0], 0.5), vec![1.0, 2.0]);
    }

    #[test]
    fn keypoints_roundtrip() {
        let mut boxes = MouthBoxes::new();
        boxes.insert(0, MouthBox { x0: 1, y0: 2, x1: 3, y1: 4, conf: 0.8 });
        boxes.insert(5, MouthBox { x0: 5, y0: 6, x1: 7, y1: 8, conf: 0.4 });
        let path = std::env::temp_dir().join(format!("avatar_kp_{}.jsonl", std::process::id()));
        boxes.save(&path).unwrap();
        let loaded = MouthBoxes::load(&path).unwrap();
        assert_eq!(loaded, boxes);
        assert!(loaded.get(1).is_none());

        std::fs::write(&path, "{bad json\n").unwrap();
        assert!(matches!(MouthBoxes::load(&path), Err(ConditioningError::BadKeypointsFile { .. })));
    }
}

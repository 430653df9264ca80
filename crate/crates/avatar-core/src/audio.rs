//! Per-token audio features (envelope, activity, band energies) and a
//! rule-based audio caption. This is the deterministic stand-in for a
//! learned audio front end: the envelope drives lip motion, the caption
//! feeds the director.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::director::{Emotion, Intensity};
use crate::dsp;
use crate::media::AudioTrack;

/// Band edges in Hz for the 4 log-spaced energy bands.
pub const BAND_EDGES_HZ: [f64; 5] = [0.0, 500.0, 1000.0, 2000.0, 8000.0];

/// Envelope activity threshold: a token is "voiced" when its normalized
/// envelope exceeds this.
pub const ACTIVITY_THRESHOLD: f64 = 0.05;

/// Envelope normalization percentile (robust to one-sample spikes).
pub const NORM_PERCENTILE: f64 = 0.99;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("audio is empty")]
    EmptyAudio,
    #[error("token rate must be positive, got {0}")]
    BadTokenRate(f64),
    #[error("token range {lo}..{hi} outside slice {start}..{end}")]
    BadSlice { lo: u64, hi: u64, start: u64, end: u64 },
}

/// Per-token audio features on the token grid. `start_token` anchors a
/// slice on the global grid (0 for features of a whole track).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioFeatures {
    pub token_rate: f64,
    pub start_token: u64,
    /// Normalized RMS in [0, 1] per token.
    pub envelope: Vec<f64>,
    /// Raw (un-normalized) RMS per token.
    pub raw_rms: Vec<f64>,
    /// Voiced flag per token: envelope > ACTIVITY_THRESHOLD.
    pub activity: Vec<bool>,
    /// L1-normalized energy in the 4 bands of BAND_EDGES_HZ per token.
    pub band_energy: Vec<[f64; 4]>,
}

impl AudioFeatures {
    pub fn num_tokens(&self) -> usize {
        self.envelope.len()
    }

    pub fn duration_s(&self) -> f64 {
        self.envelope.len() as f64 / self.token_rate
    }

    /// Envelope at a global token index, clamped into this slice.
    pub fn envelope_at_token(&self, global: i64) -> f64 {
        if self.envelope.is_empty() {
            return 0.0;
        }
        let rel = global - self.start_token as i64;
        let idx = rel.clamp(0, self.envelope.len() as i64 - 1) as usize;
        self.envelope[idx]
    }

    /// Owned sub-slice over global token indices [lo, hi).
    pub fn slice(&self, lo: u64, hi: u64) -> Result<AudioFeatures, AudioError> {
        let end = self.start_token + self.envelope.len() as u64;
        if lo < self.start_token || hi > end || lo > hi {
            return Err(AudioError::BadSlice { lo, hi, start: self.start_token, end });
        }
        let a = (lo - self.start_token) as usize;
        let b = (hi - self.start_token) as usize;
        Ok(AudioFeatures {
            token_rate: self.token_rate,
            start_token: lo,
            envelope: self.envelope[a..b].to_vec(),
            raw_rms: self.raw_rms[a..b].to_vec(),
            activity: self.activity[a..b].to_vec(),
            band_energy: self.band_energy[a..b].to_vec(),
        })
    }

    /// JSON export (`features.json`), arrays keyed by name.
    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("features serialize");
        std::fs::write(path, json + "\n")
    }
}

/// Structured audio caption: the director's view of the audio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioCaption {
    /// Empty in the reference implementation; a real captioner may fill it.
    pub transcript: String,
    pub emotion: Emotion,
    pub intensity: Intensity,
    /// Voiced tokens per second.
    pub speech_rate: f64,
}

/// One row of the emotion classification table: all present bounds must
/// hold (means inclusive lower, exclusive upper) for the rule to fire.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmotionRule {
    pub emotion: Emotion,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_var: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_var: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rate: Option<f64>,
}

impl EmotionRule {
    fn matches(&self, mean: f64, var: f64, rate: f64) -> bool {
        self.min_mean.is_none_or(|v| mean >= v)
            && self.max_mean.is_none_or(|v| mean < v)
            && self.min_var.is_none_or(|v| var >= v)
            && self.max_var.is_none_or(|v| var < v)
            && self.min_rate.is_none_or(|v| rate >= v)
            && self.max_rate.is_none_or(|v| rate < v)
    }
}

/// Caption thresholds; the defaults here are the published calibration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaptionConfig {
    /// Mean-envelope tercile bounds for intensity: low < first <= medium < second <= high.
    pub intensity_terciles: (f64, f64),
    /// Ordered emotion rules; first match wins, fallback is calm.
    pub emotion_rules: Vec<EmotionRule>,
}

impl Default for CaptionConfig {
    fn default() -> Self {
        let rule = |emotion, min_mean, max_mean, min_var, max_var, min_rate, max_rate| EmotionRule {
            emotion,
            min_mean,
            max_mean,
            min_var,
            max_var,
            min_rate,
            max_rate,
        };
        CaptionConfig {
            intensity_terciles: (1.0 / 3.0, 2.0 / 3.0),
            emotion_rules: vec![
                // near-silence
                rule(Emotion::Calm, None, Some(0.05), None, None, None, None),
                // loud and uneven
                rule(Emotion::Excitement, Some(0.6), None, Some(0.05), None, None, None),
                // loud and steady
                rule(Emotion::Anger, Some(0.6), None, None, Some(0.05), None, None),
                // bursty at lower level
                rule(Emotion::Surprise, None, Some(0.6), Some(0.10), None, None, None),
                // quiet and slow
                rule(Emotion::Sadness, None, Some(0.25), None, None, None, Some(15.0)),
                // fast and uneven
                rule(Emotion::Confusion, None, None, Some(0.04), None, Some(30.0), None),
            ],
        }
    }
}

/// Extract per-token features: RMS envelope over each token's sample
/// window normalized by the clip's 99th-percentile RMS and clamped to
/// [0, 1]; activity = envelope > 0.05; 4-band energies via Hann-windowed
/// DFT, L1-normalized per token (an all-zero token gets the uniform 0.25
/// vector).
pub fn extract_features(audio: &AudioTrack, token_rate: f64) -> Result<AudioFeatures, AudioError> {
    if audio.samples().is_empty() {
        return Err(AudioError::EmptyAudio);
    }
    if !(token_rate > 0.0) {
        return Err(AudioError::BadTokenRate(token_rate));
    }
    let sr = audio.sample_rate() as f64;
    let samples = audio.samples();
    let num_tokens = (audio.duration_s() * token_rate).ceil() as usize;
    let num_tokens = num_tokens.max(1);

    let mut raw_rms = Vec::with_capacity(num_tokens);
    let mut band_energy = Vec::with_capacity(num_tokens);
    let nominal_window = (sr / token_rate).ceil() as usize;
    let window = dsp::hann(nominal_window.max(2));

    for j in 0..num_tokens {
        let a = ((j as f64 * sr) / token_rate).floor() as usize;
        let b = (((j + 1) as f64 * sr) / token_rate).floor() as usize;
        let a = a.min(samples.len());
        let b = b.min(samples.len()).max(a);
        let token = &samples[a..b];

        if token.is_empty() {
            raw_rms.push(0.0);
            band_energy.push([0.25; 4]);
            continue;
        }
        let energy: f64 = token.iter().map(|&s| (s as f64) * (s as f64)).sum();
        raw_rms.push((energy / token.len() as f64).sqrt());

        let windowed: Vec<f64> = token
            .iter()
            .enumerate()
            .map(|(i, &s)| s as f64 * window[i.min(window.len() - 1)])
            .collect();
        band_energy.push(band_energies(&windowed, sr));
    }

    let p99 = percentile(&raw_rms, NORM_PERCENTILE);
    let envelope: Vec<f64> = raw_rms
        .iter()
        .map(|&r| if p99 > 0.0 { (r / p99).clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    let activity: Vec<bool> = envelope.iter().map(|&e| e > ACTIVITY_THRESHOLD).collect();

    Ok(AudioFeatures {
        token_rate,
        start_token: 0,
        envelope,
        raw_rms,
        activity,
        band_energy,
    })
}

/// Sum of one-sided spectral power inside each band, L1-normalized.
fn band_energies(windowed: &[f64], sample_rate: f64) -> [f64; 4] {
    let ps = dsp::power_spectrum(windowed);
    let fft_n = (ps.len() - 1) * 2;
    let bin_hz = sample_rate / fft_n as f64;
    let nyquist = sample_rate / 2.0;
    let mut bands = [0.0f64; 4];
    for (k, &p) in ps.iter().enumerate() {
        let f = k as f64 * bin_hz;
        for b in 0..4 {
            let lo = BAND_EDGES_HZ[b];
            let hi = BAND_EDGES_HZ[b + 1].min(nyquist);
            let in_band = if b == 3 { f >= lo && f <= hi } else { f >= lo && f < hi };
            if in_band {
                bands[b] += p;
                break;
            }
        }
    }
    let total: f64 = bands.iter().sum();
    if total <= 1e-30 {
        return [0.25; 4];
    }
    bands.map(|b| b / total)
}

/// Nearest-rank percentile (q in (0, 1]) of an unsorted slice.
fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Deterministic caption from features: emotion from the config's rule
/// table over (mean envelope, envelope variance, speech rate), intensity
/// from mean-envelope terciles, speech_rate = voiced tokens / duration.
pub fn caption_audio(features: &AudioFeatures, config: &CaptionConfig) -> AudioCaption {
    let n = features.envelope.len().max(1) as f64;
    let mean = features.envelope.iter().sum::<f64>() / n;
    let var = features.envelope.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
    let duration = features.duration_s();
    let active = features.activity.iter().filter(|&&a| a).count() as f64;
    let speech_rate = if duration > 0.0 { active / duration } else { 0.0 };

    let emotion = features
        .envelope
        .is_empty()
        .then_some(Emotion::Calm)
        .or_else(|| {
            config
                .emotion_rules
                .iter()
                .find(|r| r.matches(mean, var, speech_rate))
                .map(|r| r.emotion)
        })
        .unwrap_or(Emotion::Calm);

    let (t1, t2) = config.intensity_terciles;
    let intensity = if mean < t1 {
        Intensity::Low
    } else if mean < t2 {
        Intensity::Medium
    } else {
        Intensity::High
    };

    AudioCaption { transcript: String::new(), emotion, intensity, speech_rate }
}

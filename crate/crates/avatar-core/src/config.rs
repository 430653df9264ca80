//! Global configuration: every tunable default in one validated TOML
//! document. CLI flags override individual fields after loading.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::CaptionConfig;
use crate::cascade::AnchorWeights;
use crate::curation::Thresholds;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {detail}")]
    Unreadable { path: String, detail: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MediaConfig {
    /// Output frame rate.
    pub fps: f64,
    /// Audio tokens per second (20 ms hop).
    pub token_rate: f64,
    /// Frame rate of the cheap global blueprint pass.
    pub blueprint_fps: f64,
}

impl Default for MediaConfig {
    fn default() -> Self {
        MediaConfig { fps: 48.0, token_rate: 50.0, blueprint_fps: 12.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditioningConfig {
    /// Extra audio tokens allowed on each side of a frame's aligned range.
    pub pad_tokens: u64,
    /// Loss multiplier inside the mouth box.
    pub w_mouth: f64,
    /// Guidance scale for the negative-frame CFG combination.
    pub cfg_scale: f64,
    /// Audio cross-attention output boost applied at inference.
    pub boost_factor: f64,
    /// Default reference-corruption recipe for the negative CFG branch:
    /// mild blur, exaggerated contrast/saturation, a color shift, and
    /// texture noise.
    pub corruption: crate::conditioning::CorruptionRecipe,
}

impl Default for ConditioningConfig {
    fn default() -> Self {
        ConditioningConfig {
            pad_tokens: 2,
            w_mouth: 2.0,
            cfg_scale: 4.0,
            boost_factor: 1.5,
            corruption: crate::conditioning::CorruptionRecipe {
                blur_radius: 1,
                contrast_gain: 1.3,
                saturation_gain: 1.3,
                hue_shift_deg: 12.0,
                texture_noise_amp: 0.04,
                seed: 0,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeConfig {
    /// Anchor search half-window around each segmentation boundary.
    pub anchor_window_s: f64,
    /// Default sub-clip length; num_clips = ceil(duration / clip_seconds).
    pub clip_seconds: f64,
    pub anchor_weights: AnchorWeights,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig { anchor_window_s: 0.5, clip_seconds: 5.0, anchor_weights: AnchorWeights::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Config {
    pub media: MediaConfig,
    pub audio: CaptionConfig,
    pub conditioning: ConditioningConfig,
    pub cascade: CascadeConfig,
    pub curation: Thresholds,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let config: Config = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if !(self.media.fps > 0.0) {
            return bad(format!("media.fps must be positive, got {}", self.media.fps));
        }
        if !(self.media.token_rate > 0.0) {
            return bad(format!("media.token_rate must be positive, got {}", self.media.token_rate));
        }
        if !(self.media.blueprint_fps > 0.0) {
            return bad(format!("media.blueprint_fps must be positive, got {}", self.media.blueprint_fps));
        }
        if self.conditioning.w_mouth < 1.0 {
            return bad(format!("conditioning.w_mouth must be >= 1, got {}", self.conditioning.w_mouth));
        }
        if !(self.conditioning.boost_factor > 0.0) {
            return bad(format!(
                "conditioning.boost_factor must be positive, got {}",
                self.conditioning.boost_factor
            ));
        }
        let amp = self.conditioning.corruption.texture_noise_amp;
        if !(0.0..=1.0).contains(&amp) {
            return bad(format!("conditioning.corruption.texture_noise_amp must be in [0,1], got {amp}"));
        }
        if self.cascade.anchor_window_s < 0.0 {
            return bad(format!(
                "cascade.anchor_window_s must be non-negative, got {}",
                self.cascade.anchor_window_s
            ));
        }
        if !(self.cascade.clip_seconds > 0.0) {
            return bad(format!("cascade.clip_seconds must be positive, got {}", self.cascade.clip_seconds));
        }
        let w = &self.cascade.anchor_weights;
        for (name, v) in [
            ("identity", w.identity),
            ("motion", w.motion),
            ("occlusion", w.occlusion),
            ("expressiveness", w.expressiveness),
        ] {
            if v < 0.0 {
                return bad(format!("cascade.anchor_weights.{name} must be non-negative, got {v}"));
            }
        }
        let (t1, t2) = self.audio.intensity_terciles;
        if !(0.0 <= t1 && t1 <= t2 && t2 <= 1.0) {
            return bad(format!("audio.intensity_terciles must be ordered within [0,1], got ({t1}, {t2})"));
        }
        if !(self.curation.cut_threshold > 0.0 && self.curation.cut_threshold <= 1.0) {
            return bad(format!(
                "curation.cut_threshold must be in (0,1], got {}",
                self.curation.cut_threshold
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let config = Config::default();
        config.validate().unwrap();
        assert_eq!(config.media.fps, 48.0);
        assert_eq!(config.media.token_rate, 50.0);
        assert_eq!(config.media.blueprint_fps, 12.0);
        assert_eq!(config.conditioning.pad_tokens, 2);
        assert_eq!(config.conditioning.w_mouth, 2.0);
        assert_eq!(config.conditioning.cfg_scale, 4.0);
        assert_eq!(config.conditioning.boost_factor, 1.5);
        assert_eq!(config.cascade.anchor_weights.identity, 0.4);
        assert_eq!(config.curation.min_sync_confidence, Some(0.5));
        assert_eq!(config.curation.max_abs_lag_frames, Some(2));
    }

    #[test]
    fn toml_roundtrip_and_partial_files() {
        let config = Config::default();
        let text = config.to_toml();
        let parsed: Config = toml::from_str(&text).unwrap();
        parsed.validate().unwrap();
        assert_eq!(parsed.media.fps, config.media.fps);

        // partial file: unspecified sections fall back to defaults
        let partial: Config = toml::from_str("[media]\nfps = 24.0\n").unwrap();
        assert_eq!(partial.media.fps, 24.0);
        assert_eq!(partial.media.token_rate, 50.0);
        assert_eq!(partial.conditioning.w_mouth, 2.0);
    }

    #[test]
    fn invalid_values_rejected() {
        let mut config = Config::default();
        config.media.fps = 0.0;
        assert!(config.validate().is_err());

        let mut config = Config::default();
        config.conditioning.w_mouth = 0.5;
        assert!(config.validate().is_err());

        let mut config = Config::default();
        config.audio.intensity_terciles = (0.9, 0.1);
        assert!(config.validate().is_err());
    }

    #[test]
    fn load_reports_parse_errors() {
        let path = std::env::temp_dir().join(format!("avatar_cfg_{}.toml", std::process::id()));
        std::fs::write(&path, "media = \"not a table\"").unwrap();
        assert!(matches!(Config::load(&path), Err(ConfigError::Parse(_))));
        std::fs::write(&path, "[media]\nfps = -1.0\n").unwrap();
        assert!(matches!(Config::load(&path), Err(ConfigError::Invalid(_))));
    }
}

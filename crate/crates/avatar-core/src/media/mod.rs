//! Core media types, time-grid arithmetic, and bit-exact file I/O.
//!
//! Clips are stored codec-free: one binary PPM (P6) per frame plus a
//! `clip.json` sidecar, so round-trips are byte-identical and diffable.
//! Audio is RIFF WAV PCM16 on disk, mono f32 at 16 kHz in memory.

mod wav;

pub use wav::{load_audio, save_audio};

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Canonical internal audio sample rate (Hz).
pub const INTERNAL_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("frame dimensions must be at least 1x1, got {0}x{1}")]
    BadDimensions(u32, u32),
    #[error("pixel buffer length {got} does not match {width}x{height}x3 = {expected}")]
    BadPixelBuffer { width: u32, height: u32, got: usize, expected: usize },
    #[error("empty clip")]
    EmptyClip,
    #[error("fps must be positive, got {0}")]
    BadFps(f64),
    #[error("frame {index} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch { index: usize, got_w: u32, got_h: u32, want_w: u32, want_h: u32 },
    #[error("missing frame {0}")]
    MissingFrame(usize),
    #[error("unexpected extra frame file {0}")]
    ExtraFrame(usize),
    #[error("frame count mismatch: clip.json says {expected}, found {found}")]
    FrameCountMismatch { expected: usize, found: usize },
    #[error("corrupt {kind} header in {path}: {detail}")]
    CorruptHeader { kind: &'static str, path: PathBuf, detail: String },
    #[error("unsupported audio encoding in {path}: {detail}")]
    UnsupportedEncoding { path: PathBuf, detail: String },
    #[error("audio track is empty")]
    EmptyAudio,
    #[error("sample rate must be positive")]
    BadSampleRate,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl MediaError {
    fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MediaError::Io { path: path.into(), source }
    }
}

/// One RGB frame, 8 bits per channel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Frame {
    /// Solid-color frame.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, MediaError> {
        if width == 0 || height == 0 {
            return Err(MediaError::BadDimensions(width, height));
        }
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..width as usize * height as usize {
            pixels.extend_from_slice(&rgb);
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, MediaError> {
        if width == 0 || height == 0 {
            return Err(MediaError::BadDimensions(width, height));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(MediaError::BadPixelBuffer { width, height, got: pixels.len(), expected });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        debug_assert!(x < self.width && y < self.height);
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        debug_assert!(x < self.width && y < self.height);
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Rec. 601 luma, used by every grayscale-based scorer in the crate.
    pub fn luma(&self, x: u32, y: u32) -> f64 {
        let [r, g, b] = self.get(x, y);
        0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64
    }

    /// Mean luma over the whole frame.
    pub fn mean_luma(&self) -> f64 {
        let mut sum = 0.0;
        for p in self.pixels.chunks_exact(3) {
            sum += 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
        }
        sum / (self.width as f64 * self.height as f64)
    }
}

/// An ordered frame sequence with timing metadata; the universal video
/// currency of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    frames: Vec<Frame>,
    fps: f64,
    audio_ref: Option<PathBuf>,
}

impl Clip {
    pub fn new(frames: Vec<Frame>, fps: f64, audio_ref: Option<PathBuf>) -> Result<Self, MediaError> {
        if !(fps > 0.0) {
            return Err(MediaError::BadFps(fps));
        }
        if let Some(first) = frames.first() {
            let (w, h) = (first.width(), first.height());
            for (i, f) in frames.iter().enumerate() {
                if f.width() != w || f.height() != h {
                    return Err(MediaError::DimensionMismatch {
                        index: i,
                        got_w: f.width(),
                        got_h: f.height(),
                        want_w: w,
                        want_h: h,
                    });
                }
            }
        }
        Ok(Self { frames, fps, audio_ref })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> &Frame {
        &self.frames[i]
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn audio_ref(&self) -> Option<&Path> {
        self.audio_ref.as_deref()
    }

    pub fn set_audio_ref(&mut self, path: Option<PathBuf>) {
        self.audio_ref = path;
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    pub fn width(&self) -> u32 {
        self.frames.first().map_or(0, Frame::width)
    }

    pub fn height(&self) -> u32 {
        self.frames.first().map_or(0, Frame::height)
    }
}

/// Mono PCM amplitudes in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioTrack {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioTrack {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, MediaError> {
        if sample_rate == 0 {
            return Err(MediaError::BadSampleRate);
        }
        let samples = samples
            .into_iter()
            .map(|s| s.clamp(-1.0, 1.0))
            .collect();
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Linear resample to `target_rate`. Output length is
    /// round(n * target/source), so duration is preserved within one
    /// sample period.
    pub fn resampled(&self, target_rate: u32) -> AudioTrack {
        if target_rate == self.sample_rate || self.samples.is_empty() {
            return AudioTrack { samples: self.samples.clone(), sample_rate: target_rate };
        }
        let ratio = target_rate as f64 / self.sample_rate as f64;
        let out_len = (self.samples.len() as f64 * ratio).round() as usize;
        let mut out = Vec::with_capacity(out_len);
        let n = self.samples.len();
        for k in 0..out_len {
            let pos = k as f64 / ratio;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            let a = self.samples[i.min(n - 1)] as f64;
            let b = self.samples[(i + 1).min(n - 1)] as f64;
            out.push((a * (1.0 - frac) + b * frac) as f32);
        }
        AudioTrack { samples: out, sample_rate: target_rate }
    }
}

/// Shared frame/audio-token timing arithmetic. Frame i covers
/// [i/fps, (i+1)/fps); token j covers [j/token_rate, (j+1)/token_rate).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub fps: f64,
    pub token_rate: f64,
}

impl TimeGrid {
    pub fn new(fps: f64, token_rate: f64) -> Result<Self, MediaError> {
        if !(fps > 0.0) {
            return Err(MediaError::BadFps(fps));
        }
        if !(token_rate > 0.0) {
            return Err(MediaError::BadFps(token_rate));
        }
        Ok(Self { fps, token_rate })
    }

    pub fn frame_interval(&self, i: u64) -> (f64, f64) {
        (i as f64 / self.fps, (i + 1) as f64 / self.fps)
    }

    pub fn token_interval(&self, j: u64) -> (f64, f64) {
        (j as f64 / self.token_rate, (j + 1) as f64 / self.token_rate)
    }

    /// Inclusive range [lo, hi] of token indices whose interval overlaps
    /// frame i's interval. Overlap is strict (touching endpoints do not
    /// count), evaluated by cross-multiplication so integer rates are
    /// exact. The range is never empty: token_rate > 0 guarantees at
    /// least one token interval intersects every frame interval.
    pub fn tokens_overlapping_frame(&self, i: u64) -> (u64, u64) {
        // token j overlaps frame i  <=>  j*fps < (i+1)*tr  and  (j+1)*fps > i*tr
        let fps = self.fps;
        let tr = self.token_rate;
        let i = i as f64;
        // lo: smallest j >= 0 with (j+1)*fps > i*tr; seed below it, walk up.
        let mut lo = ((i * tr / fps).floor() - 2.0).max(0.0) as u64;
        while ((lo + 1) as f64) * fps <= i * tr {
            lo += 1;
        }
        // hi: largest j with j*fps < (i+1)*tr; seed above it, walk down.
        let mut hi = ((i + 1.0) * tr / fps).ceil() as u64 + 2;
        while hi > lo && (hi as f64) * fps >= (i + 1.0) * tr {
            hi -= 1;
        }
        (lo, hi)
    }

    /// Token containing the center time of frame i (clamped to >= 0).
    pub fn frame_center_token(&self, i: u64) -> u64 {
        let center = (i as f64 + 0.5) / self.fps;
        (center * self.token_rate).floor() as u64
    }
}

/// Mandatory frame count for a video driven by `duration_s` of audio:
/// round(duration * fps), ties away from zero.
pub fn frames_for_audio(duration_s: f64, fps: f64) -> u64 {
    assert!(duration_s >= 0.0 && fps > 0.0);
    (duration_s * fps).round() as u64
}

/// `clip.json` sidecar schema.
#[derive(Debug, Serialize, Deserialize)]
struct ClipMeta {
    fps: f64,
    width: u32,
    height: u32,
    num_frames: usize,
    audio: Option<String>,
}

fn frame_file_name(index: usize) -> String {
    format!("frame_{index:06}.ppm")
}

/// Write one frame as binary PPM (P6, maxval 255).
pub fn save_frame(frame: &Frame, path: &Path) -> Result<(), MediaError> {
    let mut buf = Vec::with_capacity(frame.pixels().len() + 32);
    buf.extend_from_slice(format!("P6\n{} {}\n255\n", frame.width(), frame.height()).as_bytes());
    buf.extend_from_slice(frame.pixels());
    fs::write(path, buf).map_err(|e| MediaError::io(path, e))
}

/// Read a binary PPM (P6, maxval 255).
pub fn load_frame(path: &Path) -> Result<Frame, MediaError> {
    let data = fs::read(path).map_err(|e| MediaError::io(path, e))?;
    parse_ppm(&data).map_err(|detail| MediaError::CorruptHeader {
        kind: "PPM",
        path: path.to_path_buf(),
        detail,
    })
}

fn parse_ppm(data: &[u8]) -> Result<Frame, String> {
    let mut pos = 0usize;
    let mut next_token = || -> Result<String, String> {
        // skip whitespace and '#' comments
        loop {
            while pos < data.len() && data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < data.len() && data[pos] == b'#' {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("unexpected end of header".into());
        }
        Ok(String::from_utf8_lossy(&data[start..pos]).into_owned())
    };

    let magic = next_token()?;
    if magic != "P6" {
        return Err(format!("expected P6 magic, got {magic:?}"));
    }
    let width: u32 = next_token()?.parse().map_err(|e| format!("bad width: {e}"))?;
    let height: u32 = next_token()?.parse().map_err(|e| format!("bad height: {e}"))?;
    let maxval: u32 = next_token()?.parse().map_err(|e| format!("bad maxval: {e}"))?;
    if maxval != 255 {
        return Err(format!("only maxval 255 supported, got {maxval}"));
    }
    // exactly one whitespace byte separates header from pixel data
    if pos >= data.len() || !data[pos].is_ascii_whitespace() {
        return Err("missing separator before pixel data".into());
    }
    pos += 1;
    let expected = width as usize * height as usize * 3;
    let body = &data[pos..];
    if body.len() != expected {
        return Err(format!("pixel payload is {} bytes, expected {expected}", body.len()));
    }
    Frame::from_pixels(width, height, body.to_vec()).map_err(|e| e.to_string())
}

/// Write a clip directory: `clip.json` plus `frame_%06d.ppm`.
/// `load_clip(save_clip(c))` reproduces `c` bit-exactly.
pub fn save_clip(clip: &Clip, dir: &Path) -> Result<(), MediaError> {
    if clip.num_frames() == 0 {
        return Err(MediaError::EmptyClip);
    }
    fs::create_dir_all(dir).map_err(|e| MediaError::io(dir, e))?;
    let meta = ClipMeta {
        fps: clip.fps(),
        width: clip.width(),
        height: clip.height(),
        num_frames: clip.num_frames(),
        audio: clip.audio_ref().map(|p| p.to_string_lossy().into_owned()),
    };
    let meta_path = dir.join("clip.json");
    let json = serde_json::to_string_pretty(&meta).expect("clip meta serializes");
    let mut f = fs::File::create(&meta_path).map_err(|e| MediaError::io(&meta_path, e))?;
    f.write_all(json.as_bytes()).map_err(|e| MediaError::io(&meta_path, e))?;
    f.write_all(b"\n").map_err(|e| MediaError::io(&meta_path, e))?;
    for (i, frame) in clip.frames().iter().enumerate() {
        save_frame(frame, &dir.join(frame_file_name(i)))?;
    }
    Ok(())
}

/// Read a clip directory written by [`save_clip`]. Metadata is
/// cross-checked against the actual frame files: a missing or extra frame
/// index and any dimension mismatch are structured errors naming the frame.
pub fn load_clip(dir: &Path) -> Result<Clip, MediaError> {
    let meta_path = dir.join("clip.json");
    let mut json = String::new();
    fs::File::open(&meta_path)
        .and_then(|mut f| f.read_to_string(&mut json).map(|_| ()))
        .map_err(|e| MediaError::io(&meta_path, e))?;
    let meta: ClipMeta = serde_json::from_str(&json).map_err(|e| MediaError::CorruptHeader {
        kind: "clip.json",
        path: meta_path.clone(),
        detail: e.to_string(),
    })?;

    let mut frames = Vec::with_capacity(meta.num_frames);
    for i in 0..meta.num_frames {
        let path = dir.join(frame_file_name(i));
        if !path.exists() {
            return Err(MediaError::MissingFrame(i));
        }
        let frame = load_frame(&path)?;
        if frame.width() != meta.width || frame.height() != meta.height {
            return Err(MediaError::DimensionMismatch {
                index: i,
                got_w: frame.width(),
                got_h: frame.height(),
                want_w: meta.width,
                want_h: meta.height,
            });
        }
        frames.push(frame);
    }
    if dir.join(frame_file_name(meta.num_frames)).exists() {
        return Err(MediaError::ExtraFrame(meta.num_frames));
    }
    Clip::new(frames, meta.fps, meta.audio.map(PathBuf::from))
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Frame({}x{})", self.width, self.height)
    }
}

//! Minimal RIFF WAV PCM16 reader/writer.
//!
//! Only PCM16 is accepted (mono or stereo, any rate); everything else is an
//! unsupported-encoding error. Loading normalizes to mono f32 at the
//! canonical 16 kHz internal rate.

use std::fs;
use std::path::Path;

use super::{AudioTrack, MediaError, INTERNAL_SAMPLE_RATE};

fn corrupt(path: &Path, detail: impl Into<String>) -> MediaError {
    MediaError::CorruptHeader { kind: "WAV", path: path.to_path_buf(), detail: detail.into() }
}

fn u16_at(data: &[u8], pos: usize) -> u16 {
    u16::from_le_bytes([data[pos], data[pos + 1]])
}

fn u32_at(data: &[u8], pos: usize) -> u32 {
    u32::from_le_bytes([data[pos], data[pos + 1], data[pos + 2], data[pos + 3]])
}

/// Load a WAV file, average stereo to mono, resample to 16 kHz by linear
/// interpolation, and normalize amplitudes to [-1, 1].
pub fn load_audio(path: impl AsRef<Path>) -> Result<AudioTrack, MediaError> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| MediaError::Io { path: path.into(), source: e })?;
    let raw = parse_wav(path, &data)?;
    Ok(raw.resampled(INTERNAL_SAMPLE_RATE))
}

fn parse_wav(path: &Path, data: &[u8]) -> Result<AudioTrack, MediaError> {
    if data.len() < 12 || &data[0..4] != b"RIFF" || &data[8..12] != b"WAVE" {
        return Err(corrupt(path, "not a RIFF/WAVE file"));
    }
    let mut pos = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut pcm: Option<&[u8]> = None;
    while pos + 8 <= data.len() {
        let id = &data[pos..pos + 4];
        let size = u32_at(data, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start.checked_add(size).filter(|&e| e <= data.len());
        let body_end = match body_end {
            Some(e) => e,
            None => return Err(corrupt(path, "chunk size overruns file")),
        };
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(corrupt(path, "fmt chunk too short"));
                }
                fmt = Some((
                    u16_at(data, body_start),
                    u16_at(data, body_start + 2),
                    u32_at(data, body_start + 4),
                    u16_at(data, body_start + 14),
                ));
            }
            b"data" => pcm = Some(&data[body_start..body_end]),
            _ => {} // LIST, fact, etc. — skipped
        }
        // chunks are word-aligned
        pos = body_end + (size & 1);
    }
    let (format, channels, rate, bits) = fmt.ok_or_else(|| corrupt(path, "missing fmt chunk"))?;
    if format != 1 || bits != 16 {
        return Err(MediaError::UnsupportedEncoding {
            path: path.to_path_buf(),
            detail: format!("need PCM16 (format tag 1, 16 bits), got format tag {format} with {bits} bits"),
        });
    }
    if channels == 0 || channels > 2 {
        return Err(MediaError::UnsupportedEncoding {
            path: path.to_path_buf(),
            detail: format!("need mono or stereo, got {channels} channels"),
        });
    }
    if rate == 0 {
        return Err(corrupt(path, "zero sample rate"));
    }
    let pcm = pcm.ok_or_else(|| corrupt(path, "missing data chunk"))?;
    let bytes_per_frame = 2 * channels as usize;
    let n = pcm.len() / bytes_per_frame;
    let mut samples = Vec::with_capacity(n);
    for f in 0..n {
        let base = f * bytes_per_frame;
        let mut acc = 0.0f32;
        for c in 0..channels as usize {
            let s = i16::from_le_bytes([pcm[base + 2 * c], pcm[base + 2 * c + 1]]);
            acc += s as f32 / 32768.0;
        }
        samples.push((acc / channels as f32).clamp(-1.0, 1.0));
    }
    AudioTrack::new(samples, rate)
}

/// Write a track as RIFF WAV PCM16 mono. Samples are quantized with
/// round-to-nearest; used for fixtures and pipeline output copies.
pub fn save_audio(track: &AudioTrack, path: impl AsRef<Path>) -> Result<(), MediaError> {
    let path: &Path = path.as_ref();
    let n = track.samples().len();
    let data_len = (n * 2) as u32;
    let mut out = Vec::with_capacity(44 + n * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&track.sample_rate().to_le_bytes());
    out.extend_from_slice(&(track.sample_rate() * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in track.samples() {
        let q = (s * 32767.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| MediaError::Io { path: path.into(), source: e })
}

//! Minimal RIFF/WAVE reader and writer for 16-bit mono PCM.

use std::fmt;
use std::path::Path;

/// Decoded audio: samples normalized to `[-1, 1]` by `s / 32768`.
#[derive(Debug, Clone, PartialEq)]
pub struct WavAudio {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WavError {
    Io(String),
    /// Malformed header or an unsupported encoding.
    Format(String),
    UnsupportedChannels(u16),
    EmptyRecording,
}

impl fmt::Display for WavError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WavError::Io(msg) => write!(f, "wav i/o error: {msg}"),
            WavError::Format(msg) => write!(f, "invalid wav: {msg}"),
            WavError::UnsupportedChannels(n) => write!(f, "unsupported channel count {n}, need mono"),
            WavError::EmptyRecording => write!(f, "wav data chunk is empty"),
        }
    }
}

impl std::error::Error for WavError {}

pub fn read_wav(path: &Path) -> Result<WavAudio, WavError> {
    let bytes = std::fs::read(path).map_err(|e| WavError::Io(format!("{}: {e}", path.display())))?;
    parse_wav(&bytes)
}

pub fn parse_wav(bytes: &[u8]) -> Result<WavAudio, WavError> {
    if bytes.len() < 12 {
        return Err(WavError::Format("file shorter than the RIFF header".into()));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(WavError::Format("missing RIFF tag".into()));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(WavError::Format("missing WAVE tag".into()));
    }

    let mut pos = 12usize;
    let mut fmt_seen = false;
    let mut channels = 0u16;
    let mut sample_rate = 0u32;
    let mut bits = 0u16;
    let mut audio_format = 0u16;

    while pos + 8 <= bytes.len() {
        let chunk_id = &bytes[pos..pos + 4];
        let chunk_size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body = pos + 8;

        if chunk_id == b"fmt " {
            if body + 16 > bytes.len() {
                return Err(WavError::Format("fmt chunk truncated".into()));
            }
            audio_format = u16::from_le_bytes(bytes[body..body + 2].try_into().unwrap());
            channels = u16::from_le_bytes(bytes[body + 2..body + 4].try_into().unwrap());
            sample_rate = u32::from_le_bytes(bytes[body + 4..body + 8].try_into().unwrap());
            bits = u16::from_le_bytes(bytes[body + 14..body + 16].try_into().unwrap());
            fmt_seen = true;
        } else if chunk_id == b"data" {
            if !fmt_seen {
                return Err(WavError::Format("data chunk before fmt chunk".into()));
            }
            if audio_format != 1 || bits != 16 {
                return Err(WavError::Format(format!(
                    "need 16-bit integer PCM, got format {audio_format} at {bits} bits"
                )));
            }
            if channels != 1 {
                return Err(WavError::UnsupportedChannels(channels));
            }
            if sample_rate == 0 {
                return Err(WavError::Format("sample rate is zero".into()));
            }
            if chunk_size == 0 {
                return Err(WavError::EmptyRecording);
            }
            if body + chunk_size > bytes.len() {
                return Err(WavError::Format("data chunk truncated".into()));
            }
            let samples = bytes[body..body + chunk_size]
                .chunks_exact(2)
                .map(|pair| i16::from_le_bytes([pair[0], pair[1]]) as f32 / 32768.0)
                .collect();
            return Ok(WavAudio { samples, sample_rate });
        }
        // Chunks are word-aligned.
        pos = body + chunk_size + (chunk_size & 1);
    }
    Err(WavError::Format("no data chunk found".into()))
}

/// Encodes samples as 16-bit mono PCM, clamping to `[-1, 1]`.
pub fn encode_wav(samples: &[f32], sample_rate: u32) -> Vec<u8> {
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn write_wav(path: &Path, samples: &[f32], sample_rate: u32) -> Result<(), WavError> {
    std::fs::write(path, encode_wav(samples, sample_rate))
        .map_err(|e| WavError::Io(format!("{}: {e}", path.display())))
}

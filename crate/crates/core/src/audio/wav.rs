//! RIFF/WAVE reading and writing for 16-bit PCM, mono or stereo.

use std::path::Path;

use thiserror::Error;

use super::{AudioClip, AudioError};

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;
const SCALE: f32 = 32768.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WavError {
    #[error("malformed WAV container: {0}")]
    Malformed(String),
    #[error("non-PCM encoding (format tag {0:#06x})")]
    NotPcm(u16),
    #[error("unsupported bit depth {0} (only 16-bit PCM is supported)")]
    UnsupportedBitDepth(u16),
    #[error("unsupported channel count {0}")]
    UnsupportedChannels(u16),
}

fn malformed(msg: impl Into<String>) -> WavError {
    WavError::Malformed(msg.into())
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Format {
    channels: u16,
    sample_rate: u32,
}

fn parse_fmt(body: &[u8]) -> Result<Format, WavError> {
    if body.len() < 16 {
        return Err(malformed(format!("fmt chunk is {} bytes", body.len())));
    }
    let mut tag = u16_at(body, 0);
    let channels = u16_at(body, 2);
    let sample_rate = u32_at(body, 4);
    let block_align = u16_at(body, 12);
    let bits = u16_at(body, 14);
    if tag == FORMAT_EXTENSIBLE {
        // WAVEFORMATEXTENSIBLE: the real format tag leads the sub-format GUID.
        if body.len() < 40 {
            return Err(malformed("truncated WAVE_FORMAT_EXTENSIBLE fmt chunk"));
        }
        tag = u16_at(body, 24);
    }
    if tag != FORMAT_PCM {
        return Err(WavError::NotPcm(tag));
    }
    if bits != 16 {
        return Err(WavError::UnsupportedBitDepth(bits));
    }
    if channels == 0 || channels > 2 {
        return Err(WavError::UnsupportedChannels(channels));
    }
    if sample_rate == 0 {
        return Err(malformed("sample rate is zero"));
    }
    if block_align != channels * 2 {
        return Err(malformed(format!(
            "block align {block_align} inconsistent with {channels} channel(s)"
        )));
    }
    Ok(Format {
        channels,
        sample_rate,
    })
}

/// Decode a RIFF/WAVE byte stream. Samples are scaled by 1/32768.
pub fn read_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 {
        return Err(malformed(format!("{} bytes is too short for a RIFF header", bytes.len())).into());
    }
    if &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE signature").into());
    }

    let mut format = None;
    let mut data = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = u32_at(bytes, at + 4) as usize;
        let start = at + 8;
        let end = start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                malformed(format!(
                    "chunk '{}' declares {size} bytes but only {} remain",
                    String::from_utf8_lossy(id),
                    bytes.len() - start
                ))
            })?;
        match id {
            b"fmt " => format = Some(parse_fmt(&bytes[start..end])?),
            b"data" => data = Some(&bytes[start..end]),
            _ => {}
        }
        // chunks are word aligned
        at = end + (size & 1);
    }

    let format = format.ok_or_else(|| malformed("missing fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("missing data chunk"))?;
    let frame_bytes = usize::from(format.channels) * 2;
    if data.len() % frame_bytes != 0 {
        return Err(malformed(format!(
            "data chunk of {} bytes is not a whole number of {frame_bytes}-byte frames",
            data.len()
        ))
        .into());
    }

    let frames = data.len() / frame_bytes;
    let mut channels = vec![Vec::with_capacity(frames); usize::from(format.channels)];
    for frame in data.chunks_exact(frame_bytes) {
        for (c, pcm) in frame.chunks_exact(2).enumerate() {
            let v = i16::from_le_bytes([pcm[0], pcm[1]]);
            channels[c].push(f32::from(v) / SCALE);
        }
    }
    AudioClip::new(format.sample_rate, channels)
}

fn quantize(sample: f32) -> i16 {
    (sample * SCALE).round().clamp(-32768.0, 32767.0) as i16
}

/// Encode as a canonical 44-byte-header 16-bit PCM WAV. Full-scale positive
/// samples saturate at 32767.
pub fn write_wav(clip: &AudioClip) -> Vec<u8> {
    let channels = clip.num_channels() as u16;
    let rate = clip.sample_rate();
    let data_len = (clip.len() * usize::from(channels) * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * u32::from(channels) * 2).to_le_bytes());
    out.extend_from_slice(&(channels * 2).to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for i in 0..clip.len() {
        for ch in clip.channels() {
            out.extend_from_slice(&quantize(ch[i]).to_le_bytes());
        }
    }
    out
}

pub fn read_wav_file(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_wav(&bytes)
}

pub fn write_wav_file(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), AudioError> {
    let path = path.as_ref();
    std::fs::write(path, write_wav(clip)).map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })
}

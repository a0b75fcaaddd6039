//! RIFF/WAVE decode and encode, restricted to 16-bit PCM mono.
//!
//! The decoder walks the chunk list, takes the first `fmt ` and `data`
//! chunks, and ignores everything else (LIST, cue, bext, ...). Every parse
//! failure carries the byte offset of the field that caused it.

use super::{AudioClip, DspError};

const PCM_SCALE: f64 = 32768.0;

fn wav_err(offset: usize, detail: impl Into<String>) -> DspError {
    DspError::Wav {
        offset,
        detail: detail.into(),
    }
}

fn read_u16(bytes: &[u8], offset: usize) -> Result<u16, DspError> {
    let end = offset
        .checked_add(2)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| wav_err(offset, "truncated field"))?;
    Ok(u16::from_le_bytes([bytes[end - 2], bytes[end - 1]]))
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32, DspError> {
    let end = offset
        .checked_add(4)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| wav_err(offset, "truncated field"))?;
    Ok(u32::from_le_bytes([
        bytes[end - 4],
        bytes[end - 3],
        bytes[end - 2],
        bytes[end - 1],
    ]))
}

// ==== decoding ====

/// Decode a RIFF/WAVE byte stream into an [`AudioClip`].
///
/// Only uncompressed 16-bit mono PCM is accepted; samples are scaled by
/// 1/32768, so they land in [-1, 32767/32768].
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, DspError> {
    if bytes.len() < 12 {
        return Err(wav_err(0, format!("file of {} bytes is too short", bytes.len())));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(wav_err(0, "missing RIFF tag"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(wav_err(8, "missing WAVE tag"));
    }

    let mut fmt: Option<(u32, usize)> = None; // (sample_rate, fmt chunk offset)
    let mut offset = 12;
    while offset < bytes.len() {
        let id_offset = offset;
        if offset + 8 > bytes.len() {
            return Err(wav_err(id_offset, "truncated chunk header"));
        }
        let id = &bytes[offset..offset + 4];
        let size = read_u32(bytes, offset + 4)? as usize;
        let body = offset + 8;
        if body + size > bytes.len() {
            return Err(wav_err(
                offset + 4,
                format!("chunk size {size} overruns the file"),
            ));
        }

        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(wav_err(id_offset, format!("fmt chunk of {size} bytes")));
                }
                let format = read_u16(bytes, body)?;
                if format != 1 {
                    return Err(wav_err(body, format!("unsupported encoding {format} (PCM required)")));
                }
                let channels = read_u16(bytes, body + 2)?;
                if channels != 1 {
                    return Err(wav_err(body + 2, format!("unsupported channel count {channels}")));
                }
                let sample_rate = read_u32(bytes, body + 4)?;
                if sample_rate == 0 {
                    return Err(wav_err(body + 4, "sample rate is zero"));
                }
                let bits = read_u16(bytes, body + 14)?;
                if bits != 16 {
                    return Err(wav_err(body + 14, format!("unsupported sample width {bits} bits")));
                }
                fmt = Some((sample_rate, id_offset));
            }
            b"data" => {
                let Some((sample_rate, _)) = fmt else {
                    return Err(wav_err(id_offset, "data chunk before fmt chunk"));
                };
                if !size.is_multiple_of(2) {
                    return Err(wav_err(
                        offset + 4,
                        format!("odd data chunk size {size} for 16-bit samples"),
                    ));
                }
                let samples: Vec<f64> = bytes[body..body + size]
                    .chunks_exact(2)
                    .map(|pair| f64::from(i16::from_le_bytes([pair[0], pair[1]])) / PCM_SCALE)
                    .collect();
                return AudioClip::new(samples, sample_rate);
            }
            _ => {}
        }
        // Chunk bodies are padded to even length.
        offset = body + size + (size % 2);
    }

    let tail = bytes.len();
    if fmt.is_none() {
        Err(wav_err(tail, "missing fmt chunk"))
    } else {
        Err(wav_err(tail, "missing data chunk"))
    }
}

// ==== encoding ====

/// Encode samples as a 16-bit PCM mono WAV file.
///
/// Each sample is quantized as `round(s * 32768)` clamped to the i16 range,
/// the exact inverse of the decoder's scaling: any clip produced by
/// [`decode_wav`] re-encodes to identical sample bytes.
pub fn encode_wav_pcm16(samples: &[f64], sample_rate: u32) -> Vec<u8> {
    let data_size = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_size);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_size) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");

    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits per sample

    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_size as u32).to_le_bytes());
    for &s in samples {
        let q = (s * PCM_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

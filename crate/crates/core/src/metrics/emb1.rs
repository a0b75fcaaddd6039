//! The EMB1 embedding-sequence file format.
//!
//! Layout: 8-byte magic `EMBSEQ01`, two little-endian u32 values (frame
//! count T, dimension d), then T*d little-endian f32 entries, row-major.
//! The same layout stores matrix fixtures for the architecture kernel.

use std::path::Path;

use thiserror::Error;

use super::EmbeddingSequence;

pub const MAGIC: &[u8; 8] = b"EMBSEQ01";

#[derive(Debug, Error)]
pub enum Emb1Error {
    #[error("bad magic: expected EMBSEQ01")]
    BadMagic,
    #[error("file holds {got} bytes, expected {expected}")]
    Truncated { got: usize, expected: usize },
    #[error("frame count is zero")]
    ZeroFrames,
    #[error("dimension is zero")]
    ZeroDim,
    #[error("entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Decode header and entries: (frames, dim, row-major data).
pub fn decode_raw(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>), Emb1Error> {
    if bytes.len() < 16 {
        return Err(Emb1Error::Truncated {
            got: bytes.len(),
            expected: 16,
        });
    }
    if &bytes[0..8] != MAGIC {
        return Err(Emb1Error::BadMagic);
    }
    let frames = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if frames == 0 {
        return Err(Emb1Error::ZeroFrames);
    }
    if dim == 0 {
        return Err(Emb1Error::ZeroDim);
    }
    let expected = 16 + frames * dim * 4;
    if bytes.len() != expected {
        return Err(Emb1Error::Truncated {
            got: bytes.len(),
            expected,
        });
    }
    let mut data = Vec::with_capacity(frames * dim);
    for (index, chunk) in bytes[16..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Emb1Error::NonFinite { index });
        }
        data.push(f64::from(v));
    }
    Ok((frames, dim, data))
}

/// Encode row-major entries. Values are stored as f32.
pub fn encode_raw(frames: usize, dim: usize, data: &[f64]) -> Vec<u8> {
    assert_eq!(data.len(), frames * dim, "entry count must be frames * dim");
    let mut out = Vec::with_capacity(16 + data.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(frames as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for &v in data {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Decode a byte buffer into an [`EmbeddingSequence`].
pub fn decode(bytes: &[u8]) -> Result<EmbeddingSequence, Emb1Error> {
    let (frames, dim, data) = decode_raw(bytes)?;
    let vectors: Vec<Vec<f64>> = data.chunks_exact(dim).map(<[f64]>::to_vec).collect();
    debug_assert_eq!(vectors.len(), frames);
    // Invariants were just verified; new() cannot fail here.
    Ok(EmbeddingSequence::new(vectors).expect("decoded sequence is valid"))
}

/// Encode a sequence; entries are narrowed to f32.
pub fn encode(seq: &EmbeddingSequence) -> Vec<u8> {
    let data: Vec<f64> = seq.vectors().iter().flatten().copied().collect();
    encode_raw(seq.len(), seq.dim(), &data)
}

pub fn read_file(path: &Path) -> Result<EmbeddingSequence, Emb1Error> {
    decode(&std::fs::read(path)?)
}

pub fn write_file(seq: &EmbeddingSequence, path: &Path) -> Result<(), Emb1Error> {
    std::fs::write(path, encode(seq))?;
    Ok(())
}

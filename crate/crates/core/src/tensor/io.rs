//! `.spfu` tensor files.
//!
//! Layout, little-endian, no padding:
//!
//! | bytes | field                                  |
//! |-------|----------------------------------------|
//! | 4     | magic `SPFU`                           |
//! | 2     | format version, `u16` = 1              |
//! | 1     | dtype, `u8` (0 = f32)                  |
//! | 1     | rank, `u8` = 4                         |
//! | 16    | dims C, T, H, W as `u32`               |
//! | 4·N   | payload, `f32`, row-major, W fastest   |

use std::fs;
use std::path::Path;

use super::{Shape4, VideoLatent};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"SPFU";
pub const FORMAT_VERSION: u16 = 1;
const DTYPE_F32: u8 = 0;
const RANK: u8 = 4;
const HEADER_LEN: usize = 4 + 2 + 1 + 1 + 4 * 4;

pub fn encode_tensor(latent: &VideoLatent) -> Vec<u8> {
    let shape = latent.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * shape.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.push(RANK);
    for d in [shape.channels, shape.frames, shape.height, shape.width] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in latent.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<VideoLatent> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(Error::BadMagic(bytes[..4].try_into().unwrap()));
        }
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    if bytes[6] != DTYPE_F32 {
        return Err(Error::UnsupportedDtype(bytes[6]));
    }
    if bytes[7] != RANK {
        return Err(Error::UnsupportedRank(bytes[7]));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize;
    let shape = Shape4::new(dim(0), dim(1), dim(2), dim(3));
    shape.validate()?;

    let expected = shape
        .len()
        .checked_mul(4)
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::InvalidShape(format!("{shape} overflows")))?;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes(bytes.len() - expected));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    VideoLatent::new(shape, data)
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<VideoLatent> {
    decode_tensor(&fs::read(path)?)
}

pub fn write_tensor(path: impl AsRef<Path>, latent: &VideoLatent) -> Result<()> {
    fs::write(path, encode_tensor(latent))?;
    Ok(())
}

//! Binary checkpoint: `"3DPMNET"`, a u32 version, a u32-length-prefixed
//! JSON architecture, a u64 parameter count, little-endian f32 values and
//! a trailing FNV-1a 64 checksum over everything before it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::arch::Architecture;
use crate::error::{NnetError, Result};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 7] = b"3DPMNET";
pub const VERSION: u32 = 1;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

fn bad(msg: impl Into<String>) -> NnetError {
    NnetError::Format(msg.into())
}

pub fn encode<T: Scalar>(arch: &Architecture, params: &[T]) -> Result<Vec<u8>> {
    let expected = arch.layout().total;
    if params.len() != expected {
        return Err(crate::error::shape(format!("architecture needs {expected} parameters, got {}", params.len())));
    }
    let json = serde_json::to_vec(arch)?;
    let mut buf = Vec::with_capacity(32 + json.len() + 4 * params.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params {
        buf.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
    }
    let sum = fnv1a64(&buf);
    buf.extend_from_slice(&sum.to_le_bytes());
    Ok(buf)
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<(Architecture, Vec<T>)> {
    if bytes.len() < MAGIC.len() + 8 + 8 + 8 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(bad("not a checkpoint"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    if stored != fnv1a64(body) {
        return Err(bad("checksum mismatch"));
    }
    let mut pos = MAGIC.len();
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = body.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
        pos += n;
        Ok(s)
    };
    let version = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let jlen = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
    let arch: Architecture = serde_json::from_slice(take(jlen)?)?;
    arch.validate()?;
    let count = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    if count != arch.layout().total {
        return Err(bad(format!("{count} parameters stored, architecture needs {}", arch.layout().total)));
    }
    let raw = take(4 * count)?;
    let params = raw.chunks_exact(4).map(|c| T::lit(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)).collect();
    if pos != body.len() {
        return Err(bad("trailing bytes"));
    }
    Ok((arch, params))
}

pub fn save<T: Scalar>(path: impl AsRef<Path>, arch: &Architecture, params: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode(arch, params)?)?;
    w.flush()?;
    Ok(())
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<(Architecture, Vec<T>)> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode(&bytes)
}

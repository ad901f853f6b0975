use serde::{Deserialize, Serialize};

use crate::error::FormatError;

const MAGIC: &[u8; 4] = b"CAMB";
const VERSION: u32 = 1;
const HEADER: usize = 20;

/// Channel-major float maps as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawStack {
    pub channels: usize,
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

/// Category id of each channel, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CamSidecar {
    pub categories: Vec<u32>,
}

/// Magic, version, `C`, `H`, `W`, then `C * H * W` float32 values.
pub fn encode_camb(stack: &RawStack) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 4 * stack.values.len());
    out.extend_from_slice(MAGIC);
    for n in [VERSION, stack.channels as u32, stack.height as u32, stack.width as u32] {
        out.extend_from_slice(&n.to_le_bytes());
    }
    for v in &stack.values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

fn word(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("slice of four bytes"))
}

pub fn decode_camb(bytes: &[u8]) -> Result<RawStack, FormatError> {
    if bytes.len() < HEADER {
        return Err(FormatError::new(bytes.len(), "truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(FormatError::new(0, "bad magic, expected \"CAMB\""));
    }
    let version = word(bytes, 4);
    if version != VERSION {
        return Err(FormatError::new(4, format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 3];
    for (k, at) in [8, 12, 16].into_iter().enumerate() {
        let d = word(bytes, at);
        if d == 0 {
            return Err(FormatError::new(at, "dimension must be positive"));
        }
        dims[k] = d as usize;
    }
    let [channels, height, width] = dims;
    let count = channels
        .checked_mul(height)
        .and_then(|n| n.checked_mul(width))
        .ok_or_else(|| FormatError::new(8, "stack is too large"))?;
    let expected = count
        .checked_mul(4)
        .and_then(|n| n.checked_add(HEADER))
        .ok_or_else(|| FormatError::new(8, "stack is too large"))?;
    if bytes.len() < expected {
        return Err(FormatError::new(bytes.len(), format!("truncated data, expected {expected} bytes")));
    }
    if bytes.len() > expected {
        return Err(FormatError::new(expected, "trailing bytes after score data"));
    }
    let mut values = Vec::with_capacity(count);
    for (k, chunk) in bytes[HEADER..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("chunk of four bytes"));
        if !v.is_finite() || v < 0.0 {
            return Err(FormatError::new(HEADER + 4 * k, format!("score {v} must be finite and non-negative")));
        }
        values.push(f64::from(v));
    }
    Ok(RawStack {
        channels,
        width,
        height,
        values,
    })
}

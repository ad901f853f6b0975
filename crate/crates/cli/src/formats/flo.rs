use maskcon_core::field::VectorField;

use crate::error::FormatError;

/// Little-endian float tag that opens every `.flo` file.
pub const FLO_MAGIC: f32 = 202021.25;

const HEADER: usize = 12;
/// Components above this magnitude mark unknown flow in the Middlebury format.
const UNKNOWN_FLOW: f32 = 1e9;

/// Magic, width, height, then interleaved `(u, v)` as float32, row-major.
pub fn encode_flo(flow: &VectorField) -> Vec<u8> {
    let (w, h) = flow.dims();
    let mut out = Vec::with_capacity(HEADER + 8 * w * h);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(w as i32).to_le_bytes());
    out.extend_from_slice(&(h as i32).to_le_bytes());
    for (u, v) in flow.u().iter().zip(flow.v()) {
        out.extend_from_slice(&(*u as f32).to_le_bytes());
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> [u8; 4] {
    bytes[at..at + 4].try_into().expect("slice of four bytes")
}

pub fn decode_flo(bytes: &[u8]) -> Result<VectorField, FormatError> {
    if bytes.len() < HEADER {
        return Err(FormatError::new(bytes.len(), "truncated header"));
    }
    if f32::from_le_bytes(read_u32(bytes, 0)) != FLO_MAGIC {
        return Err(FormatError::new(0, "bad magic, expected 202021.25"));
    }
    let mut dims = [0usize; 2];
    for (k, at) in [4, 8].into_iter().enumerate() {
        let d = i32::from_le_bytes(read_u32(bytes, at));
        if d <= 0 {
            return Err(FormatError::new(at, format!("dimension {d} must be positive")));
        }
        dims[k] = d as usize;
    }
    let [w, h] = dims;
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER))
        .ok_or_else(|| FormatError::new(4, format!("{w}x{h} raster is too large")))?;
    if bytes.len() < expected {
        return Err(FormatError::new(bytes.len(), format!("truncated data, expected {expected} bytes")));
    }
    if bytes.len() > expected {
        return Err(FormatError::new(expected, "trailing bytes after flow data"));
    }
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for (k, chunk) in bytes[HEADER..].chunks_exact(4).enumerate() {
        let value = f32::from_le_bytes(chunk.try_into().expect("chunk of four bytes"));
        if !value.is_finite() || value.abs() > UNKNOWN_FLOW {
            return Err(FormatError::new(HEADER + 4 * k, format!("unknown or non-finite flow value {value}")));
        }
        if k % 2 == 0 { &mut u } else { &mut v }.push(f64::from(value));
    }
    VectorField::new(w, h, u, v).map_err(|e| FormatError::new(HEADER, e.to_string()))
}

//! On-disk formats: Middlebury flow, raw CAM stacks, 16-bit label PNGs with
//! JSON sidecars, and JSON-lines predictions.

mod camb;
mod flo;
mod jsonl;
mod labels;
mod overlay;

pub use camb::{decode_camb, encode_camb, CamSidecar, RawStack};
pub use flo::{decode_flo, encode_flo, FLO_MAGIC};
pub use jsonl::{decode_jsonl, encode_jsonl, group_by_frame, PredictionRecord};
pub use labels::{
    decode_label_png, encode_label_png, label_map_to_raster, raster_to_set, set_to_raster, InstanceInfo,
    LabelRaster, LabelSidecar,
};
pub use overlay::encode_overlay;

use serde::de::DeserializeOwned;

use crate::error::FormatError;

/// Parses a JSON document, locating syntax and schema errors by byte offset.
pub fn decode_json<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, FormatError> {
    serde_json::from_slice(bytes).map_err(|e| json_error(bytes, 0, &e))
}

/// Converts serde_json's line/column into an absolute byte offset; `base` is
/// the offset of `text` inside the file.
pub(crate) fn json_error(text: &[u8], base: usize, e: &serde_json::Error) -> FormatError {
    let line_start: usize = text
        .split_inclusive(|&b| b == b'\n')
        .take(e.line().saturating_sub(1))
        .map(<[u8]>::len)
        .sum();
    FormatError::new(base + line_start + e.column().saturating_sub(1), e.to_string())
}

use std::collections::BTreeMap;
use std::io::Cursor;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};
use maskcon_core::mask::BinaryMask;
use maskcon_core::prediction::{CategoryId, InstanceLabelMap, Prediction, PredictionSet, Provenance};
use serde::{Deserialize, Serialize};

use crate::error::FormatError;

const SIGNATURE: &[u8; 8] = b"\x89PNG\r\n\x1a\n";

/// Instance ids per pixel, 0 for background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRaster {
    pub width: usize,
    pub height: usize,
    pub ids: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceInfo {
    pub category: u32,
    pub score: f64,
}

/// Instance id to category and score; JSON keys are the ids as strings.
pub type LabelSidecar = BTreeMap<u32, InstanceInfo>;

/// 16-bit grayscale PNG whose pixel values are instance ids.
pub fn encode_label_png(raster: &LabelRaster) -> Result<Vec<u8>, String> {
    let ids = raster
        .ids
        .iter()
        .map(|&id| u16::try_from(id).map_err(|_| format!("instance id {id} does not fit in 16 bits")))
        .collect::<Result<Vec<u16>, _>>()?;
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(raster.width as u32, raster.height as u32, ids).ok_or("raster size mismatch")?;
    let mut out = Cursor::new(Vec::new());
    let encoder = PngEncoder::new_with_quality(&mut out, CompressionType::Default, FilterType::Adaptive);
    buf.write_with_encoder(encoder).map_err(|e| e.to_string())?;
    Ok(out.into_inner())
}

/// Walks the chunk layout so structural damage is reported where it occurs.
/// Returns the offset of the first IDAT chunk.
fn check_structure(bytes: &[u8]) -> Result<usize, FormatError> {
    if bytes.len() < SIGNATURE.len() || &bytes[..8] != SIGNATURE {
        return Err(FormatError::new(0, "missing PNG signature"));
    }
    let mut pos = 8;
    let mut first_idat = None;
    loop {
        if bytes.len() - pos < 12 {
            return Err(FormatError::new(pos, "truncated chunk header"));
        }
        let len = u32::from_be_bytes(bytes[pos..pos + 4].try_into().expect("four bytes")) as usize;
        let kind = &bytes[pos + 4..pos + 8];
        let end = pos
            .checked_add(12)
            .and_then(|p| p.checked_add(len))
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| FormatError::new(pos, format!("chunk {} overruns the file", String::from_utf8_lossy(kind))))?;
        if pos == 8 {
            if kind != b"IHDR" || len != 13 {
                return Err(FormatError::new(pos, "first chunk must be a 13-byte IHDR"));
            }
            if bytes[pos + 16] != 16 {
                return Err(FormatError::new(pos + 16, format!("bit depth {} is not 16", bytes[pos + 16])));
            }
            if bytes[pos + 17] != 0 {
                return Err(FormatError::new(pos + 17, "color type is not single-channel grayscale"));
            }
        }
        if kind == b"IDAT" && first_idat.is_none() {
            first_idat = Some(pos);
        }
        pos = end;
        if kind == b"IEND" {
            break;
        }
    }
    if pos != bytes.len() {
        return Err(FormatError::new(pos, "trailing bytes after IEND"));
    }
    first_idat.ok_or_else(|| FormatError::new(pos, "no image data"))
}

pub fn decode_label_png(bytes: &[u8]) -> Result<LabelRaster, FormatError> {
    let idat = check_structure(bytes)?;
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| FormatError::new(idat, format!("cannot decode image data: {e}")))?;
    match img {
        DynamicImage::ImageLuma16(buf) => Ok(LabelRaster {
            width: buf.width() as usize,
            height: buf.height() as usize,
            ids: buf.into_raw().into_iter().map(u32::from).collect(),
        }),
        _ => Err(FormatError::new(8, "not a 16-bit grayscale image")),
    }
}

/// Paints instances `1..=n` in set order; later instances win where masks overlap.
pub fn set_to_raster(set: &PredictionSet) -> (LabelRaster, LabelSidecar) {
    let (width, height) = set.dims();
    let mut ids = vec![0u32; width * height];
    let mut sidecar = LabelSidecar::new();
    for (k, p) in set.iter().enumerate() {
        let id = k as u32 + 1;
        for (x, y) in p.mask().iter_ones() {
            ids[y * width + x] = id;
        }
        sidecar.insert(
            id,
            InstanceInfo {
                category: p.category().0,
                score: p.score(),
            },
        );
    }
    (LabelRaster { width, height, ids }, sidecar)
}

/// Seed or instance maps carry no scores; every instance gets score 1.
pub fn label_map_to_raster(map: &InstanceLabelMap) -> (LabelRaster, LabelSidecar) {
    let (width, height) = map.dims();
    let sidecar = map
        .categories()
        .iter()
        .map(|(&id, c)| (id, InstanceInfo { category: c.0, score: 1.0 }))
        .collect();
    let raster = LabelRaster {
        width,
        height,
        ids: map.labels().to_vec(),
    };
    (raster, sidecar)
}

/// Rebuilds a prediction set; sidecar entries without pixels are skipped.
pub fn raster_to_set(
    frame: usize,
    raster: &LabelRaster,
    sidecar: &LabelSidecar,
    provenance: Provenance,
) -> Result<PredictionSet, String> {
    if let Some(id) = raster.ids.iter().find(|&&id| id != 0 && !sidecar.contains_key(&id)) {
        return Err(format!("instance {id} has no sidecar entry"));
    }
    let mut set = PredictionSet::empty(frame, raster.width, raster.height, provenance);
    for (&id, info) in sidecar {
        if id == 0 || info.category == 0 {
            return Err(format!("instance {id}: ids and categories must be non-zero"));
        }
        let mut mask = BinaryMask::new(raster.width, raster.height).map_err(|e| e.to_string())?;
        for (i, _) in raster.ids.iter().enumerate().filter(|(_, &v)| v == id) {
            mask.set_index(i, true);
        }
        if mask.is_empty() {
            continue;
        }
        let p = Prediction::new(mask, CategoryId(info.category), info.score, frame)
            .map_err(|e| format!("instance {id}: {e}"))?;
        set.push(p).map_err(|e| e.to_string())?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use maskcon_core::mask::BBox;

    fn raster() -> LabelRaster {
        LabelRaster {
            width: 5,
            height: 3,
            ids: vec![0, 1, 1, 0, 0, 0, 1, 0, 300, 300, 0, 0, 0, 300, 65535],
        }
    }

    #[test]
    fn png_round_trip_keeps_16_bit_ids() {
        let bytes = encode_label_png(&raster()).unwrap();
        assert_eq!(decode_label_png(&bytes).unwrap(), raster());
        assert_eq!(bytes, encode_label_png(&raster()).unwrap());
    }

    #[test]
    fn ids_beyond_16_bits_are_rejected() {
        let mut r = raster();
        r.ids[0] = 70_000;
        assert!(encode_label_png(&r).is_err());
    }

    #[test]
    fn damage_is_located() {
        let good = encode_label_png(&raster()).unwrap();
        assert_eq!(decode_label_png(b"GIF89a").unwrap_err().offset, 0);
        assert_eq!(decode_label_png(&good[..good.len() - 5]).unwrap_err().offset, good.len() as u64 - 12);
        let mut extra = good.clone();
        extra.push(0);
        assert_eq!(decode_label_png(&extra).unwrap_err().offset, good.len() as u64);
        let mut depth = good.clone();
        depth[24] = 8;
        assert_eq!(decode_label_png(&depth).unwrap_err().offset, 24);
        let idat = check_structure(&good).unwrap();
        let mut data = good;
        data[idat + 9] ^= 0xff;
        assert_eq!(decode_label_png(&data).unwrap_err().offset, idat as u64);
    }

    #[test]
    fn sets_round_trip_through_rasters() {
        let m = |x0, x1| BinaryMask::from_box(6, 4, BBox::new(x0, 0, x1, 3).unwrap()).unwrap();
        let preds = vec![
            Prediction::new(m(0, 2), CategoryId(3), 0.75, 4).unwrap(),
            Prediction::new(m(3, 6), CategoryId(1), 0.5, 4).unwrap(),
        ];
        let set = PredictionSet::new(4, 6, 4, Provenance::Model, preds).unwrap();
        let (r, side) = set_to_raster(&set);
        let back = raster_to_set(4, &r, &side, Provenance::Model).unwrap();
        assert_eq!(back.predictions(), set.predictions());
        let json = serde_json::to_string(&side).unwrap();
        assert_eq!(json, r#"{"1":{"category":3,"score":0.75},"2":{"category":1,"score":0.5}}"#);
    }

    #[test]
    fn unknown_ids_are_rejected() {
        let side = LabelSidecar::from([(1, InstanceInfo { category: 1, score: 1.0 })]);
        assert!(raster_to_set(0, &raster(), &side, Provenance::Model).is_err());
    }
}

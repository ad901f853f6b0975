use std::io::Cursor;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{ImageBuffer, Rgb};

use super::LabelRaster;

/// Distinct fully saturated color per instance id (golden-ratio hue steps).
fn color(id: u32) -> [u8; 3] {
    if id == 0 {
        return [0, 0, 0];
    }
    let hue = (f64::from(id) * 0.618_033_988_749_895).fract() * 6.0;
    let x = 1.0 - (hue % 2.0 - 1.0).abs();
    let (r, g, b) = match hue as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [r, g, b].map(|c: f64| (c * 255.0).round() as u8)
}

/// RGB visualization of a label raster; instance borders are darkened.
pub fn encode_overlay(raster: &LabelRaster) -> Result<Vec<u8>, String> {
    let (w, h) = (raster.width, raster.height);
    let at = |x: usize, y: usize| raster.ids[y * w + x];
    let img = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        let id = at(x, y);
        let edge = [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)]
            .into_iter()
            .any(|(nx, ny)| nx < w && ny < h && at(nx, ny) != id);
        let c = color(id);
        Rgb(if edge && id != 0 { c.map(|v| v / 2) } else { c })
    });
    let mut out = Cursor::new(Vec::new());
    let encoder = PngEncoder::new_with_quality(&mut out, CompressionType::Default, FilterType::Adaptive);
    img.write_with_encoder(encoder).map_err(|e| e.to_string())?;
    Ok(out.into_inner())
}

//! Binary PGM (P5) input.

use std::path::Path;

use crate::error::{Error, Result};

/// A square grayscale image, row-major, values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub side: usize,
    pub pixels: Vec<f64>,
}

pub fn load_image_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path)?;
    parse_pgm(&bytes)
}

/// Parses a P5 file with `maxval` 255 and a square power-of-two side.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let magic = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(Error::UnsupportedFormat(format!(
            "expected binary PGM magic P5, found {magic:?}"
        )));
    }
    let mut pos = 2;
    let mut header = [0usize; 3];
    for field in header.iter_mut() {
        *field = next_header_int(bytes, &mut pos)?;
    }
    let [width, height, maxval] = header;
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::UnsupportedFormat("truncated PGM header".into())),
    }
    if maxval != 255 {
        return Err(Error::UnsupportedFormat(format!(
            "maxval {maxval} (only 255 is supported)"
        )));
    }
    if width != height {
        return Err(Error::NonSquare { width, height });
    }
    if width == 0 || !width.is_power_of_two() {
        return Err(Error::NonPowerOfTwo(width));
    }
    let raster = &bytes[pos..];
    if raster.len() < width * height {
        return Err(Error::UnsupportedFormat(format!(
            "raster has {} bytes, expected {}",
            raster.len(),
            width * height
        )));
    }
    Ok(GrayImage {
        side: width,
        pixels: raster[..width * height].iter().map(|&b| b as f64).collect(),
    })
}

fn next_header_int(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::UnsupportedFormat("truncated PGM header".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| b.is_ascii_digit()) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::UnsupportedFormat("malformed PGM header".into()))
}

/// Block-averages an image down to `side`, which must divide its side.
pub fn downsample(img: &GrayImage, side: usize) -> Result<GrayImage> {
    if side == 0 || img.side % side != 0 {
        return Err(Error::BadGeometry(format!(
            "cannot resample a {0}x{0} image to {side}x{side}",
            img.side
        )));
    }
    let f = img.side / side;
    let norm = (f * f) as f64;
    let mut pixels = vec![0.0; side * side];
    for (i, px) in pixels.iter_mut().enumerate() {
        let (r, c) = (i / side, i % side);
        let mut acc = 0.0;
        for dr in 0..f {
            let row = (r * f + dr) * img.side;
            acc += img.pixels[row + c * f..row + c * f + f].iter().sum::<f64>();
        }
        *px = acc / norm;
    }
    Ok(GrayImage { side, pixels })
}

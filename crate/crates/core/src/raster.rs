//! Image containers, grayscale conversion, cropping and binary PGM/PPM I/O.
//!
//! Conventions used throughout the crate: row-major storage, top-left origin,
//! y increasing downward. All image types are immutable after construction in
//! pipeline code; mutation is limited to builders and the synth renderer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RasterError {
    #[error("image dimensions must be nonzero (got {width}x{height})")]
    BadDimensions { width: usize, height: usize },
    #[error("pixel buffer length {got} does not match {width}x{height}")]
    BadBufferLength { width: usize, height: usize, got: usize },
    #[error("crop region {x},{y} {width}x{height} exceeds image bounds {img_width}x{img_height}")]
    RegionOutOfBounds {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
        img_width: usize,
        img_height: usize,
    },
    #[error("corner fraction {0} yields a zero-size region")]
    ZeroRegion(f64),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PnmError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported format {0:?} (only binary P5/P6 are handled)")]
    UnsupportedFormat(String),
    #[error("unsupported maxval {0} (only 255 is handled)")]
    UnsupportedMaxval(u32),
    #[error("truncated payload: expected {expected} bytes, got {got}")]
    TruncatedPayload { expected: usize, got: usize },
}

/// Which upper frame corner a crop region covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Corner {
    UpperLeft,
    UpperRight,
}

impl std::fmt::Display for Corner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Corner::UpperLeft => write!(f, "upper-left"),
            Corner::UpperRight => write!(f, "upper-right"),
        }
    }
}

/// A crop rectangle anchored to the top edge of its parent frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropRegion {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
    pub corner: Corner,
}

/// 8-bit RGB image, row-major interleaved triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

/// 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

/// Binary image; `true` is foreground/white.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        if data.len() != width * height * 3 {
            return Err(RasterError::BadBufferLength { width, height, got: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn crop(&self, region: &CropRegion) -> Result<ColorImage, RasterError> {
        check_region(region, self.width, self.height)?;
        let mut data = Vec::with_capacity(region.width * region.height * 3);
        for y in region.y..region.y + region.height {
            let start = (y * self.width + region.x) * 3;
            data.extend_from_slice(&self.data[start..start + region.width * 3]);
        }
        Ok(ColorImage { width: region.width, height: region.height, data })
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(RasterError::BadBufferLength { width, height, got: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self, RasterError> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(RasterError::BadBufferLength { width, height, got: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn inverted(&self) -> BinaryImage {
        BinaryImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|b| !b).collect(),
        }
    }

    /// Renders foreground as 255, background as 0 (debug dumps).
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }
}

fn check_dims(width: usize, height: usize) -> Result<(), RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::BadDimensions { width, height });
    }
    Ok(())
}

fn check_region(region: &CropRegion, img_width: usize, img_height: usize) -> Result<(), RasterError> {
    if region.width == 0
        || region.height == 0
        || region.x + region.width > img_width
        || region.y + region.height > img_height
    {
        return Err(RasterError::RegionOutOfBounds {
            x: region.x,
            y: region.y,
            width: region.width,
            height: region.height,
            img_width,
            img_height,
        });
    }
    Ok(())
}

/// BT.601 luma conversion: round(0.299 R + 0.587 G + 0.114 B).
pub fn to_grayscale(img: &ColorImage) -> GrayImage {
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| {
            // The coefficients have three decimals, so integer millis are exact.
            let millis =
                299 * u32::from(p[0]) + 587 * u32::from(p[1]) + 114 * u32::from(p[2]);
            ((millis + 500) / 1000) as u8
        })
        .collect();
    GrayImage { width: img.width, height: img.height, data }
}

/// Luma conversion of a crop region in one pass, without materializing the
/// RGB sub-image. Identical output to `to_grayscale(&img.crop(region)?)`.
pub fn grayscale_region(img: &ColorImage, region: &CropRegion) -> Result<GrayImage, RasterError> {
    check_region(region, img.width, img.height)?;
    let luma = |p: &[u8]| {
        let millis = 299 * u32::from(p[0]) + 587 * u32::from(p[1]) + 114 * u32::from(p[2]);
        ((millis + 500) / 1000) as u8
    };
    let mut data = Vec::with_capacity(region.width * region.height);
    for y in region.y..region.y + region.height {
        let start = (y * img.width + region.x) * 3;
        let row = &img.data[start..start + region.width * 3];
        // Four pixels per step: independent chains pipeline better than the
        // strided one-pixel loop.
        let mut quads = row.chunks_exact(12);
        for q in &mut quads {
            data.extend_from_slice(&[luma(&q[0..3]), luma(&q[3..6]), luma(&q[6..9]), luma(&q[9..12])]);
        }
        data.extend(quads.remainder().chunks_exact(3).map(luma));
    }
    Ok(GrayImage { width: region.width, height: region.height, data })
}

pub fn crop(img: &GrayImage, region: &CropRegion) -> Result<GrayImage, RasterError> {
    check_region(region, img.width, img.height)?;
    let mut data = Vec::with_capacity(region.width * region.height);
    for y in region.y..region.y + region.height {
        let start = y * img.width + region.x;
        data.extend_from_slice(&img.data[start..start + region.width]);
    }
    Ok(GrayImage { width: region.width, height: region.height, data })
}

/// Upper-left and upper-right corner regions of `floor(fraction * dim)` size.
pub fn corner_regions(
    frame_width: usize,
    frame_height: usize,
    fraction_w: f64,
    fraction_h: f64,
) -> Result<(CropRegion, CropRegion), RasterError> {
    for f in [fraction_w, fraction_h] {
        if !(f > 0.0 && f <= 1.0) {
            return Err(RasterError::ZeroRegion(f));
        }
    }
    let width = (fraction_w * frame_width as f64).floor() as usize;
    let height = (fraction_h * frame_height as f64).floor() as usize;
    if width == 0 {
        return Err(RasterError::ZeroRegion(fraction_w));
    }
    if height == 0 {
        return Err(RasterError::ZeroRegion(fraction_h));
    }
    let left = CropRegion { x: 0, y: 0, width, height, corner: Corner::UpperLeft };
    let right =
        CropRegion { x: frame_width - width, y: 0, width, height, corner: Corner::UpperRight };
    Ok((left, right))
}

/// A decoded netpbm image: P5 gray or P6 color.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PnmImage {
    Gray(GrayImage),
    Color(ColorImage),
}

pub fn read_pnm(bytes: &[u8]) -> Result<PnmImage, PnmError> {
    let mut cursor = 0usize;
    let magic = read_token(bytes, &mut cursor)
        .ok_or_else(|| PnmError::MalformedHeader("missing magic".into()))?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(PnmError::UnsupportedFormat(other.to_string())),
    };
    let width = read_number(bytes, &mut cursor, "width")?;
    let height = read_number(bytes, &mut cursor, "height")?;
    let maxval = read_number(bytes, &mut cursor, "maxval")?;
    if maxval != 255 {
        return Err(PnmError::UnsupportedMaxval(maxval as u32));
    }
    if width == 0 || height == 0 {
        return Err(PnmError::MalformedHeader("zero dimension".into()));
    }
    // Exactly one whitespace byte separates the header from the payload.
    cursor += 1;
    let expected = width * height * channels;
    let payload = bytes.get(cursor..cursor + expected).ok_or(PnmError::TruncatedPayload {
        expected,
        got: bytes.len().saturating_sub(cursor),
    })?;
    let img = if channels == 1 {
        PnmImage::Gray(GrayImage { width, height, data: payload.to_vec() })
    } else {
        PnmImage::Color(ColorImage { width, height, data: payload.to_vec() })
    };
    Ok(img)
}

fn read_token(bytes: &[u8], cursor: &mut usize) -> Option<String> {
    // Skips whitespace and '#' comments between tokens.
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
            continue;
        }
        break;
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    if *cursor == start {
        return None;
    }
    Some(String::from_utf8_lossy(&bytes[start..*cursor]).into_owned())
}

fn read_number(bytes: &[u8], cursor: &mut usize, what: &str) -> Result<usize, PnmError> {
    let token = read_token(bytes, cursor)
        .ok_or_else(|| PnmError::MalformedHeader(format!("missing {what}")))?;
    token.parse().map_err(|_| PnmError::MalformedHeader(format!("bad {what} {token:?}")))
}

pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn write_ppm(img: &ColorImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn write_pnm(img: &PnmImage) -> Vec<u8> {
    match img {
        PnmImage::Gray(g) => write_pgm(g),
        PnmImage::Color(c) => write_ppm(c),
    }
}

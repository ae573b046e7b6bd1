//! Image containers, grayscale conversion and indexed-PNG I/O.

use std::fmt;
use std::io::Cursor;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image: {0}")]
    CorruptImage(String),
    #[error("label index {0} has no palette entry")]
    MissingPaletteEntry(u8),
    #[error("palette slot 0 must be white, found {0}")]
    BackgroundNotWhite(Rgb),
    #[error("not a palette-type PNG")]
    NotIndexedPng,
    #[error("invalid dimensions {width}x{height} for {len} samples")]
    BadDimensions { width: u32, height: u32, len: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RasterError>;

fn check_dims(width: u32, height: u32, len: usize, per_pixel: usize) -> Result<()> {
    if width == 0 || height == 0 || (width as usize) * (height as usize) * per_pixel != len {
        return Err(RasterError::BadDimensions { width, height, len });
    }
    Ok(())
}

/// 8-bit grayscale raster, row-major, 0 = black.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height, data.len(), 1)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Panics if either dimension is zero.
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        let mut img = Self::filled(width, height, 0);
        for y in 0..height {
            for x in 0..width {
                img.data[(y * width + x) as usize] = f(x, y);
            }
        }
        img
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[(y as usize) * (self.width as usize) + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        let w = self.width as usize;
        self.data[(y as usize) * w + x as usize] = v;
    }

    pub fn row(&self, y: u32) -> &[u8] {
        let w = self.width as usize;
        &self.data[y as usize * w..(y as usize + 1) * w]
    }

    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| 255 - v).collect(),
        }
    }

    pub fn to_png(&self) -> Vec<u8> {
        encode_png(
            self.width,
            self.height,
            png::ColorType::Grayscale,
            &self.data,
            None,
        )
    }
}

impl fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GrayImage({}x{})", self.width, self.height)
    }
}

/// Foreground mask, row-major, `true` = foreground.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height, bits.len(), 1)?;
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: u32, height: u32) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut m = Self::empty(width, height);
        for y in 0..height {
            for x in 0..width {
                m.bits[(y * width + x) as usize] = f(x, y);
            }
        }
        m
    }

    /// Parses rows of `#` (foreground) and `.` (background). Handy for fixtures.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len() as u32;
        let width = rows.first().map_or(0, |r| r.len()) as u32;
        let bits = rows
            .iter()
            .flat_map(|r| r.bytes().map(|b| b == b'#'))
            .collect();
        Self::new(width, height, bits).expect("ragged ascii mask")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub(crate) fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn row(&self, y: u32) -> &[bool] {
        let w = self.width as usize;
        &self.bits[y as usize * w..(y as usize + 1) * w]
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y as usize) * (self.width as usize) + x as usize]
    }

    /// Out-of-bounds coordinates read as background.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && x < self.width as i64
            && y < self.height as i64
            && self.get(x as u32, y as u32)
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.bits[(y as usize) * w + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        assert_eq!((self.width, self.height), (other.width, other.height));
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(bool, bool) -> bool) -> Self {
        assert_eq!(
            (self.width, self.height),
            (other.width, other.height),
            "mask size mismatch"
        );
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self {
            width: self.width,
            height: self.height,
            bits,
        }
    }

    /// Foreground rendered black on white.
    pub fn to_png(&self) -> Vec<u8> {
        let data: Vec<u8> = self.bits.iter().map(|&b| if b { 0 } else { 255 }).collect();
        encode_png(
            self.width,
            self.height,
            png::ColorType::Grayscale,
            &data,
            None,
        )
    }
}

impl fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinaryMask({}x{})", self.width, self.height)?;
        if self.width <= 64 && self.height <= 64 {
            for y in 0..self.height {
                let row: String = self
                    .row(y)
                    .iter()
                    .map(|&b| if b { '#' } else { '.' })
                    .collect();
                writeln!(f, "{row}")?;
            }
        }
        Ok(())
    }
}

/// Per-pixel label indices, 0 = background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    width: u32,
    height: u32,
    indices: Vec<u8>,
}

impl LabelImage {
    pub fn new(width: u32, height: u32, indices: Vec<u8>) -> Result<Self> {
        check_dims(width, height, indices.len(), 1)?;
        Ok(Self {
            width,
            height,
            indices,
        })
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        assert!(
            width > 0 && height > 0,
            "label image dimensions must be positive"
        );
        Self {
            width,
            height,
            indices: vec![0; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn indices(&self) -> &[u8] {
        &self.indices
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.indices[(y as usize) * (self.width as usize) + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        let w = self.width as usize;
        self.indices[(y as usize) * w + x as usize] = v;
    }

    pub(crate) fn indices_mut(&mut self) -> &mut [u8] {
        &mut self.indices
    }

    /// Pixel count per index value.
    pub fn index_counts(&self) -> [u64; 256] {
        let mut counts = [0u64; 256];
        for &i in &self.indices {
            counts[i as usize] += 1;
        }
        counts
    }
}

/// An sRGB color, serialized as `#RRGGBB`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const WHITE: Rgb = Rgb([255, 255, 255]);
    pub const BLACK: Rgb = Rgb([0, 0, 0]);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb([r, g, b])
    }

    pub fn hex(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [r, g, b] = self.0;
        write!(f, "#{r:02X}{g:02X}{b:02X}")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid color {0:?}, expected #RRGGBB")]
pub struct ParseColorError(pub String);

impl FromStr for Rgb {
    type Err = ParseColorError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let err = || ParseColorError(s.to_string());
        let hex = s.strip_prefix('#').ok_or_else(err)?;
        if hex.len() != 6 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(err());
        }
        let channel = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| err());
        Ok(Rgb([channel(0)?, channel(2)?, channel(4)?]))
    }
}

impl Serialize for Rgb {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// 8-bit RGB raster used for previews and the original color scan.
#[derive(Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height, data.len(), 3)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_gray(gray: &GrayImage) -> Self {
        let data = gray.data().iter().flat_map(|&v| [v, v, v]).collect();
        Self {
            width: gray.width(),
            height: gray.height(),
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let i = 3 * ((y as usize) * (self.width as usize) + x as usize);
        Rgb([self.data[i], self.data[i + 1], self.data[i + 2]])
    }

    pub fn set(&mut self, x: u32, y: u32, c: Rgb) {
        let i = 3 * ((y as usize) * (self.width as usize) + x as usize);
        self.data[i..i + 3].copy_from_slice(&c.0);
    }

    /// Copies the `w`×`h` window at (`x`,`y`); the window must lie inside the image.
    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> Self {
        assert!(
            x + w <= self.width && y + h <= self.height,
            "crop outside image"
        );
        let mut data = Vec::with_capacity(3 * w as usize * h as usize);
        for row in y..y + h {
            let start = 3 * (row as usize * self.width as usize + x as usize);
            data.extend_from_slice(&self.data[start..start + 3 * w as usize]);
        }
        Self {
            width: w,
            height: h,
            data,
        }
    }

    pub fn to_png(&self) -> Vec<u8> {
        encode_png(
            self.width,
            self.height,
            png::ColorType::Rgb,
            &self.data,
            None,
        )
    }
}

impl fmt::Debug for RgbImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RgbImage({}x{})", self.width, self.height)
    }
}

/// A decoded input scan: its luma plane, the color planes when the input
/// had them, and the resolution when the file recorded one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceImage {
    pub gray: GrayImage,
    pub color: Option<RgbImage>,
    pub dpi: Option<u32>,
}

/// ITU-R BT.601 luma, rounded half up.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    Ok(load_source(path)?.gray)
}

pub fn load_source(path: impl AsRef<Path>) -> Result<SourceImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => RasterError::FileNotFound(path.display().to_string()),
        _ => RasterError::Io(e),
    })?;
    decode_source(&bytes)
}

/// Decodes PNG or JPEG bytes.
pub fn decode_source(bytes: &[u8]) -> Result<SourceImage> {
    use image::{DynamicImage, ImageFormat};

    if bytes.is_empty() {
        return Err(RasterError::CorruptImage("empty file".into()));
    }
    let format = image::guess_format(bytes)
        .map_err(|_| RasterError::UnsupportedFormat("unrecognized signature".into()))?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Jpeg) {
        return Err(RasterError::UnsupportedFormat(format!("{format:?}")));
    }
    let decoded = image::load_from_memory_with_format(bytes, format).map_err(|e| match e {
        image::ImageError::Unsupported(u) => RasterError::UnsupportedFormat(u.to_string()),
        other => RasterError::CorruptImage(other.to_string()),
    })?;
    let (width, height) = (decoded.width(), decoded.height());
    let is_gray = matches!(
        decoded,
        DynamicImage::ImageLuma8(_)
            | DynamicImage::ImageLumaA8(_)
            | DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
    );
    let (gray, color) = if is_gray {
        let l = decoded.into_luma8();
        (GrayImage::new(width, height, l.into_raw())?, None)
    } else {
        let rgb = decoded.into_rgb8().into_raw();
        let luma_plane = rgb
            .chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect();
        (
            GrayImage::new(width, height, luma_plane)?,
            Some(RgbImage::new(width, height, rgb)?),
        )
    };
    let dpi = if format == ImageFormat::Png {
        png_dpi(bytes)
    } else {
        None
    };
    Ok(SourceImage { gray, color, dpi })
}

fn png_dpi(bytes: &[u8]) -> Option<u32> {
    let reader = png::Decoder::new(Cursor::new(bytes)).read_info().ok()?;
    let dims = reader.info().pixel_dims?;
    match dims.unit {
        png::Unit::Meter if dims.xppu > 0 => Some((dims.xppu as f64 * 0.0254).round() as u32),
        _ => None,
    }
}

fn encode_png(
    width: u32,
    height: u32,
    color: png::ColorType,
    data: &[u8],
    palette: Option<&[u8]>,
) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        if let Some(p) = palette {
            enc.set_palette(p.to_vec());
        }
        // Writing into a Vec cannot fail for consistent dimensions.
        let mut writer = enc.write_header().expect("png header");
        writer.write_image_data(data).expect("png data");
    }
    out
}

/// Encodes `img` as a palette PNG; `palette[k]` is the color for index `k`.
pub fn encode_indexed_png(img: &LabelImage, palette: &[Rgb]) -> Result<Vec<u8>> {
    match palette.first() {
        None => return Err(RasterError::MissingPaletteEntry(0)),
        Some(&c) if c != Rgb::WHITE => return Err(RasterError::BackgroundNotWhite(c)),
        _ => {}
    }
    if palette.len() > 256 {
        return Err(RasterError::CorruptImage(format!(
            "palette of {} entries exceeds 256",
            palette.len()
        )));
    }
    if let Some(&missing) = img.indices.iter().find(|&&i| i as usize >= palette.len()) {
        return Err(RasterError::MissingPaletteEntry(missing));
    }
    let flat: Vec<u8> = palette.iter().flat_map(|c| c.0).collect();
    Ok(encode_png(
        img.width,
        img.height,
        png::ColorType::Indexed,
        &img.indices,
        Some(&flat),
    ))
}

pub fn write_indexed_png(img: &LabelImage, palette: &[Rgb], path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_indexed_png(img, palette)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn decode_indexed_png(bytes: &[u8]) -> Result<(LabelImage, Vec<Rgb>)> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| RasterError::CorruptImage(e.to_string()))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Indexed {
        return Err(RasterError::NotIndexedPng);
    }
    let (width, height, depth) = (info.width, info.height, info.bit_depth);
    let palette: Vec<Rgb> = info
        .palette
        .as_ref()
        .ok_or(RasterError::NotIndexedPng)?
        .chunks_exact(3)
        .map(|c| Rgb([c[0], c[1], c[2]]))
        .collect();
    let mut buf = vec![
        0;
        reader
            .output_buffer_size()
            .ok_or(RasterError::NotIndexedPng)?
    ];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| RasterError::CorruptImage(e.to_string()))?;
    let indices = unpack_indices(&buf, width, height, frame.line_size, depth);
    Ok((LabelImage::new(width, height, indices)?, palette))
}

/// Expands 1/2/4-bit packed rows so files from other encoders read correctly.
fn unpack_indices(
    buf: &[u8],
    width: u32,
    height: u32,
    line_size: usize,
    depth: png::BitDepth,
) -> Vec<u8> {
    let bits = match depth {
        png::BitDepth::One => 1,
        png::BitDepth::Two => 2,
        png::BitDepth::Four => 4,
        _ => 8,
    };
    let mut out = Vec::with_capacity(width as usize * height as usize);
    for row in buf.chunks(line_size).take(height as usize) {
        if bits == 8 {
            out.extend_from_slice(&row[..width as usize]);
            continue;
        }
        let per_byte = 8 / bits;
        let mask = (1u8 << bits) - 1;
        for x in 0..width as usize {
            let byte = row[x / per_byte];
            let shift = 8 - bits * (x % per_byte + 1);
            out.push((byte >> shift) & mask);
        }
    }
    out
}

pub fn read_indexed_png(path: impl AsRef<Path>) -> Result<(LabelImage, Vec<Rgb>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => RasterError::FileNotFound(path.display().to_string()),
        _ => RasterError::Io(e),
    })?;
    decode_indexed_png(&bytes)
}

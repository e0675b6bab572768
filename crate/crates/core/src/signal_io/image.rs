use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use super::resample::{self, AxisMap};
use crate::error::{Error, Result};

/// An `H × W × 3` RGB image with channel values in `[0, 1]`, stored
/// row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl ImageBuffer {
    pub const CHANNELS: usize = 3;

    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if pixels.len() != height * width * 3 {
            return Err(Error::shape(height * width * 3, pixels.len()));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "pixel value {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    /// Builds an image from arbitrary values, clamping each into `[0, 1]`.
    /// Non-finite values map to 0.
    pub fn from_clamped(height: usize, width: usize, mut pixels: Vec<f64>) -> Self {
        assert!(height > 0 && width > 0);
        assert_eq!(pixels.len(), height * width * 3);
        for v in &mut pixels {
            *v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
        }
        Self {
            height,
            width,
            pixels,
        }
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        let pixels = (0..height * width).flat_map(|_| rgb).collect();
        Self::from_clamped(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Applies a separable linear map. The maps must be convex (non-negative
    /// weights summing to one) for the result to stay in range; it is
    /// clamped regardless.
    pub fn map_axes(&self, rows: &AxisMap, cols: &AxisMap) -> ImageBuffer {
        let out = resample::apply(&self.pixels, 3, rows, cols);
        ImageBuffer::from_clamped(rows.dst_len(), cols.dst_len(), out)
    }
}

/// Bilinear resize (half-pixel centers).
pub fn resize_image(img: &ImageBuffer, height: usize, width: usize) -> Result<ImageBuffer> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidArgument(format!(
            "target size must be positive, got {height}x{width}"
        )));
    }
    Ok(img.map_axes(
        &AxisMap::bilinear(img.height, height),
        &AxisMap::bilinear(img.width, width),
    ))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let (info, data) = read_png(path)?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedImage {
            path: path.to_path_buf(),
            reason: format!(
                "expected 8-bit RGB, found {:?} at {:?}",
                info.color_type, info.bit_depth
            ),
        });
    }
    let (h, w) = (info.height as usize, info.width as usize);
    let mut pixels = Vec::with_capacity(h * w * 3);
    for row in data.chunks(info.line_size).take(h) {
        pixels.extend(row[..w * 3].iter().map(|&b| f64::from(b) / 255.0));
    }
    ImageBuffer::new(h, w, pixels)
}

pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = img.pixels.iter().map(|&v| quantize(v)).collect();
    write_png(
        path.as_ref(),
        img.height,
        img.width,
        png::ColorType::Rgb,
        &bytes,
    )
}

/// Reads an 8-bit grayscale PNG into raw bytes, returning `(height, width, bytes)`.
pub fn load_gray_png(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    let path = path.as_ref();
    let (info, data) = read_png(path)?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedImage {
            path: path.to_path_buf(),
            reason: format!(
                "expected 8-bit grayscale, found {:?} at {:?}",
                info.color_type, info.bit_depth
            ),
        });
    }
    let (h, w) = (info.height as usize, info.width as usize);
    let mut bytes = Vec::with_capacity(h * w);
    for row in data.chunks(info.line_size).take(h) {
        bytes.extend_from_slice(&row[..w]);
    }
    Ok((h, w, bytes))
}

pub fn save_gray_png(path: impl AsRef<Path>, height: usize, width: usize, bytes: &[u8]) -> Result<()> {
    if bytes.len() != height * width {
        return Err(Error::shape(height * width, bytes.len()));
    }
    write_png(path.as_ref(), height, width, png::ColorType::Grayscale, bytes)
}

/// Maps `[0, 1]` to a byte as `round(255 v)`.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn read_png(path: &Path) -> Result<(png::OutputInfo, Vec<u8>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let unsupported = |e: png::DecodingError| Error::UnsupportedImage {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut reader = decoder.read_info().map_err(unsupported)?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::UnsupportedImage {
        path: path.to_path_buf(),
        reason: "image too large".into(),
    })?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(unsupported)?;
    buf.truncate(info.buffer_size());
    Ok((info, buf))
}

fn write_png(
    path: &Path,
    height: usize,
    width: usize,
    color: png::ColorType,
    bytes: &[u8],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
    let mut writer = encoder.write_header().map_err(to_io)?;
    writer.write_image_data(bytes).map_err(to_io)?;
    writer.finish().map_err(to_io)
}

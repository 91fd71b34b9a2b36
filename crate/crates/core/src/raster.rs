//! 8-bit pixel grids, color conversion, resampling and PNG I/O.
//!
//! A [`Raster`] stores interleaved, row-major 8-bit samples with either one
//! (grayscale) or three (RGB) channels. Numeric code that wants floating
//! point works on the unit-interval view from [`Raster::to_unit`] and comes
//! back through [`Raster::from_unit`], which quantizes with round-half-up.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major interleaved 8-bit image with 1 or 3 channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

/// Quantize a value on the 0..=255 scale with round-half-up and clamping.
#[inline]
pub fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Quantize a value on the unit scale.
#[inline]
pub fn quantize_unit(v: f64) -> u8 {
    quantize(v * 255.0)
}

/// Reflect-101 border index (`dcb|abcd|cba`), valid for any offset.
#[inline]
pub(crate) fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidRaster(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::InvalidRaster(format!(
                "data length {} does not match {width}x{height}x{channels} = {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image where every sample equals `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Build from a per-sample function `f(x, y, channel)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    /// Quantize a unit-scale buffer (same layout as `data`) into a raster.
    pub fn from_unit(width: usize, height: usize, channels: usize, unit: &[f64]) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            unit.iter().map(|&v| quantize_unit(v)).collect(),
        )
    }

    /// Quantize a 0..=255-scale buffer into a raster.
    pub fn from_f64(width: usize, height: usize, channels: usize, values: &[f64]) -> Result<Self> {
        Self::new(
            width,
            height,
            channels,
            values.iter().map(|&v| quantize(v)).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn is_gray(&self) -> bool {
        self.channels == 1
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Floating-point view with samples in [0, 1].
    pub fn to_unit(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v) / 255.0).collect()
    }

    /// Floating-point view on the 0..=255 scale.
    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }

    /// Extract one channel as a 0..=255-scale plane.
    pub fn channel_plane(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .map(|&v| f64::from(v))
            .collect()
    }

    pub fn same_shape(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn check_same_shape(&self, other: &Raster) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    /// Grayscale view: returns a clone if already single-channel.
    pub fn gray(&self) -> Raster {
        if self.is_gray() {
            self.clone()
        } else {
            to_grayscale(self).expect("rgb input")
        }
    }
}

/// BT.601 luma, `round(0.299 R + 0.587 G + 0.114 B)`.
pub fn to_grayscale(r: &Raster) -> Result<Raster> {
    if r.channels != 3 {
        return Err(Error::InvalidParameter(
            "to_grayscale expects an RGB raster".into(),
        ));
    }
    // Integer weights in thousandths give an exact round-half-up.
    let data = r
        .data
        .chunks_exact(3)
        .map(|p| {
            let acc = 299 * u32::from(p[0]) + 587 * u32::from(p[1]) + 114 * u32::from(p[2]);
            ((acc + 500) / 1000) as u8
        })
        .collect();
    Raster::new(r.width, r.height, 1, data)
}

/// Catmull-Rom cubic (a = -0.5).
#[inline]
pub(crate) fn cubic_weight(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Source coordinate of output sample `i` under half-pixel-center alignment.
#[inline]
pub(crate) fn source_coord(i: usize, in_len: usize, out_len: usize) -> f64 {
    (i as f64 + 0.5) * in_len as f64 / out_len as f64 - 0.5
}

struct Taps {
    index: [usize; 4],
    weight: [f64; 4],
}

fn cubic_taps(in_len: usize, out_len: usize) -> Vec<Taps> {
    (0..out_len)
        .map(|i| {
            let src = source_coord(i, in_len, out_len);
            let base = src.floor() as isize;
            let mut index = [0usize; 4];
            let mut weight = [0f64; 4];
            for k in 0..4 {
                let tap = base - 1 + k as isize;
                index[k] = tap.clamp(0, in_len as isize - 1) as usize;
                weight[k] = cubic_weight(src - tap as f64);
            }
            Taps { index, weight }
        })
        .collect()
}

fn check_target(out_w: usize, out_h: usize) -> Result<()> {
    if out_w == 0 || out_h == 0 {
        Err(Error::InvalidParameter(format!(
            "resize target must be at least 1x1, got {out_w}x{out_h}"
        )))
    } else {
        Ok(())
    }
}

/// Separable Catmull-Rom resize, horizontal pass first, clamp-to-edge.
pub fn resize_bicubic(r: &Raster, out_w: usize, out_h: usize) -> Result<Raster> {
    check_target(out_w, out_h)?;
    if out_w == r.width && out_h == r.height {
        return Ok(r.clone());
    }
    let c = r.channels;
    let htaps = cubic_taps(r.width, out_w);
    let vtaps = cubic_taps(r.height, out_h);

    let mut horiz = vec![0f64; out_w * r.height * c];
    for y in 0..r.height {
        let row = &r.data[y * r.width * c..(y + 1) * r.width * c];
        for (x, t) in htaps.iter().enumerate() {
            for ch in 0..c {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += t.weight[k] * f64::from(row[t.index[k] * c + ch]);
                }
                horiz[(y * out_w + x) * c + ch] = acc;
            }
        }
    }

    let mut out = vec![0u8; out_w * out_h * c];
    for (y, t) in vtaps.iter().enumerate() {
        for x in 0..out_w {
            for ch in 0..c {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += t.weight[k] * horiz[(t.index[k] * out_w + x) * c + ch];
                }
                out[(y * out_w + x) * c + ch] = quantize(acc);
            }
        }
    }
    Raster::new(out_w, out_h, c, out)
}

/// Nearest-neighbour resize; source index is `floor((i + 0.5) * in / out)`.
pub fn resize_nearest(r: &Raster, out_w: usize, out_h: usize) -> Result<Raster> {
    check_target(out_w, out_h)?;
    let nearest = |i: usize, in_len: usize, out_len: usize| {
        (((2 * i + 1) * in_len) / (2 * out_len)).min(in_len - 1)
    };
    let xs: Vec<usize> = (0..out_w).map(|i| nearest(i, r.width, out_w)).collect();
    let c = r.channels;
    let mut out = Vec::with_capacity(out_w * out_h * c);
    for y in 0..out_h {
        let sy = nearest(y, r.height, out_h);
        for &sx in &xs {
            let at = (sy * r.width + sx) * c;
            out.extend_from_slice(&r.data[at..at + c]);
        }
    }
    Raster::new(out_w, out_h, c, out)
}

fn png_error(path: &Path, e: png::DecodingError) -> Error {
    match e {
        png::DecodingError::IoError(io) if io.kind() != std::io::ErrorKind::UnexpectedEof => {
            Error::io(path, io)
        }
        other => Error::MalformedPng {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

/// Decoded PNG before interpretation: dimensions, channel count, bit depth, raw bytes.
struct DecodedPng {
    width: usize,
    height: usize,
    channels: usize,
    depth: png::BitDepth,
    bytes: Vec<u8>,
}

fn decode_png(path: &Path) -> Result<DecodedPng> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| png_error(path, e))?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    let channels = match color {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                message: format!("color type {other:?}; only grayscale and RGB are supported"),
            })
        }
    };
    let size = reader.output_buffer_size().ok_or_else(|| Error::MalformedPng {
        path: path.to_path_buf(),
        message: "image too large".into(),
    })?;
    let mut bytes = vec![0u8; size];
    let frame = reader.next_frame(&mut bytes).map_err(|e| png_error(path, e))?;
    bytes.truncate(frame.buffer_size());
    Ok(DecodedPng {
        width: frame.width as usize,
        height: frame.height as usize,
        channels,
        depth,
        bytes,
    })
}

/// Read an 8-bit grayscale or RGB PNG.
pub fn load_image(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let png = decode_png(path)?;
    if png.depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            message: format!("bit depth {:?}; images must be 8-bit", png.depth),
        });
    }
    Raster::new(png.width, png.height, png.channels, png.bytes)
}

/// Read a 16-bit single-channel PNG as row-major samples.
pub(crate) fn load_gray16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let png = decode_png(path)?;
    if png.depth != png::BitDepth::Sixteen || png.channels != 1 {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            message: format!(
                "expected 16-bit grayscale, found {:?} with {} channel(s)",
                png.depth, png.channels
            ),
        });
    }
    let samples = png
        .bytes
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    Ok((png.width, png.height, samples))
}

fn encode_png(
    path: &Path,
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    bytes: &[u8],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(depth);
    let to_err = |e: png::EncodingError| match e {
        png::EncodingError::IoError(io) => Error::io(path, io),
        other => Error::InvalidParameter(other.to_string()),
    };
    let mut writer = encoder.write_header().map_err(to_err)?;
    writer.write_image_data(bytes).map_err(to_err)?;
    writer.finish().map_err(to_err)
}

/// Write a raster as an 8-bit PNG.
pub fn save_image(r: &Raster, path: impl AsRef<Path>) -> Result<()> {
    let color = if r.is_gray() {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    };
    encode_png(
        path.as_ref(),
        r.width,
        r.height,
        color,
        png::BitDepth::Eight,
        &r.data,
    )
}

/// Write 16-bit grayscale samples as a PNG.
pub(crate) fn save_gray16(path: &Path, width: usize, height: usize, samples: &[u16]) -> Result<()> {
    let bytes: Vec<u8> = samples.iter().flat_map(|v| v.to_be_bytes()).collect();
    encode_png(
        path,
        width,
        height,
        png::ColorType::Grayscale,
        png::BitDepth::Sixteen,
        &bytes,
    )
}

//! Raster images, single-channel planes and intensity histograms.
//!
//! Everything downstream (segmentation, metrics, seed features) works on
//! these two containers. Pixels are row-major, 8 bits per sample, and
//! channel-interleaved for colour images.

use std::path::Path;

use image::{ColorType, DynamicImage, ImageReader};

use crate::error::{Error, Result};

/// 8-bit raster with one (grayscale) or three (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "buffer holds {} samples, expected {}",
                pixels.len(),
                width * height * channels
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    /// Uniform RGB image.
    pub fn filled_rgb(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, 3, pixels)
    }

    /// Builds an RGB image by evaluating `f(x, y)` at every pixel.
    pub fn from_rgb_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, 3, pixels)
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

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Samples of the pixel at `(x, y)`; length equals `channels()`.
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let at = (y * self.width + x) * self.channels;
        &self.pixels[at..at + self.channels]
    }

    /// Reassembles an RGB image from three equally sized planes.
    pub fn from_planes(r: &GrayPlane, g: &GrayPlane, b: &GrayPlane) -> Result<Self> {
        if r.dims() != g.dims() || r.dims() != b.dims() {
            return Err(Error::DimensionMismatch(
                "channel planes differ in size".into(),
            ));
        }
        let mut pixels = Vec::with_capacity(r.pixels.len() * 3);
        for i in 0..r.pixels.len() {
            pixels.extend_from_slice(&[r.pixels[i], g.pixels[i], b.pixels[i]]);
        }
        Self::new(r.width, r.height, 3, pixels)
    }

    /// Splits a colour image into its R, G and B planes.
    pub fn split_channels(&self) -> Result<[GrayPlane; 3]> {
        Ok([
            extract_channel(self, Channel::Red)?,
            extract_channel(self, Channel::Green)?,
            extract_channel(self, Channel::Blue)?,
        ])
    }

    /// Writes the image as PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let color = if self.channels == 3 {
            image::ExtendedColorType::Rgb8
        } else {
            image::ExtendedColorType::L8
        };
        image::save_buffer_with_format(
            path,
            &self.pixels,
            self.width as u32,
            self.height as u32,
            color,
            image::ImageFormat::Png,
        )
        .map_err(|e| match e {
            image::ImageError::IoError(source) => Error::io(path, source),
            other => Error::Decode {
                path: path.into(),
                message: other.to_string(),
            },
        })
    }
}

/// One 8-bit intensity per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayPlane {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayPlane {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "buffer holds {} samples, expected {}",
                pixels.len(),
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn to_image(&self) -> RasterImage {
        RasterImage {
            width: self.width,
            height: self.height,
            channels: 1,
            pixels: self.pixels.clone(),
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_image().save_png(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Red,
    Green,
    Blue,
}

impl Channel {
    fn offset(self) -> usize {
        match self {
            Channel::Red => 0,
            Channel::Green => 1,
            Channel::Blue => 2,
        }
    }
}

/// Intensity counts for each of the 256 possible 8-bit values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram256 {
    bins: [u64; 256],
}

impl Histogram256 {
    pub fn from_bins(bins: [u64; 256]) -> Self {
        Self { bins }
    }

    pub fn bins(&self) -> &[u64; 256] {
        &self.bins
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().sum()
    }
}

/// Probability mass over the 256 intensity values.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityDistribution {
    probs: [f64; 256],
}

impl IntensityDistribution {
    /// Accepts any non-negative finite weights and rescales them to sum to 1.
    pub fn from_weights(weights: &[f64; 256]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::NonFiniteInput);
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptyHistogram);
        }
        let mut probs = [0.0; 256];
        for (p, w) in probs.iter_mut().zip(weights) {
            *p = w / total;
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64; 256] {
        &self.probs
    }
}

/// Decodes a PNG or JPEG file.
///
/// Colour sources yield 3 channels and grayscale sources 1 channel.
/// 16-bit and float sources fail with `UnsupportedDepth`; sources carrying
/// alpha fail with `AlphaChannel`.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(source) => Error::io(path, source),
        other => Error::Decode {
            path: path.into(),
            message: other.to_string(),
        },
    })?;
    from_dynamic(decoded, path)
}

fn from_dynamic(decoded: DynamicImage, path: &Path) -> Result<RasterImage> {
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    match decoded.color() {
        ColorType::L8 => RasterImage::new(width, height, 1, decoded.into_luma8().into_raw()),
        ColorType::Rgb8 => RasterImage::new(width, height, 3, decoded.into_rgb8().into_raw()),
        ColorType::La8 | ColorType::Rgba8 => Err(Error::AlphaChannel { path: path.into() }),
        other => Err(Error::UnsupportedDepth {
            path: path.into(),
            found: format!("{other:?}"),
        }),
    }
}

/// Luma conversion with weights 0.299/0.587/0.114, rounded half up.
pub fn to_gray(img: &RasterImage) -> GrayPlane {
    let pixels = if img.channels == 1 {
        img.pixels.clone()
    } else {
        img.pixels
            .chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect()
    };
    GrayPlane {
        width: img.width,
        height: img.height,
        pixels,
    }
}

#[inline]
fn luma(r: u8, g: u8, b: u8) -> u8 {
    // Integer weights scaled by 1000 keep the rounding exact.
    let weighted = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((weighted + 500) / 1000).min(255) as u8
}

pub fn extract_channel(img: &RasterImage, channel: Channel) -> Result<GrayPlane> {
    if img.channels != 3 {
        return Err(Error::NotColorImage {
            channels: img.channels,
        });
    }
    let pixels = img
        .pixels
        .iter()
        .skip(channel.offset())
        .step_by(3)
        .copied()
        .collect();
    Ok(GrayPlane {
        width: img.width,
        height: img.height,
        pixels,
    })
}

pub fn histogram(plane: &GrayPlane) -> Histogram256 {
    let mut bins = [0u64; 256];
    for &v in &plane.pixels {
        bins[v as usize] += 1;
    }
    Histogram256 { bins }
}

pub fn normalize_histogram(h: &Histogram256) -> Result<IntensityDistribution> {
    let total = h.total();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let mut probs = [0.0; 256];
    for (p, &count) in probs.iter_mut().zip(h.bins.iter()) {
        *p = count as f64 / total as f64;
    }
    Ok(IntensityDistribution { probs })
}

/// Bilinear resampling of a row-major float grid using pixel-centre alignment.
///
/// Source coordinates are `(dst + 0.5) * src/dst - 0.5`, clamped to the grid,
/// so equal sizes reproduce the input exactly.
pub fn resize_bilinear_f32(
    src: &[f32],
    src_w: usize,
    src_h: usize,
    dst_w: usize,
    dst_h: usize,
) -> Vec<f32> {
    debug_assert_eq!(src.len(), src_w * src_h);
    let axis = |dst: usize, src_len: usize, n_dst: usize| -> (usize, usize, f32) {
        let scale = src_len as f64 / n_dst as f64;
        let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, (pos - lo as f64) as f32)
    };
    let cols: Vec<_> = (0..dst_w).map(|x| axis(x, src_w, dst_w)).collect();
    let mut out = Vec::with_capacity(dst_w * dst_h);
    for y in 0..dst_h {
        let (y0, y1, fy) = axis(y, src_h, dst_h);
        let row0 = &src[y0 * src_w..(y0 + 1) * src_w];
        let row1 = &src[y1 * src_w..(y1 + 1) * src_w];
        for &(x0, x1, fx) in &cols {
            let top = row0[x0] + (row0[x1] - row0[x0]) * fx;
            let bottom = row1[x0] + (row1[x1] - row1[x0]) * fx;
            out.push(top + (bottom - top) * fy);
        }
    }
    out
}

/// Bilinear resize of an 8-bit plane, rounding half up.
pub fn resize_plane(plane: &GrayPlane, width: usize, height: usize) -> Result<GrayPlane> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage("resize target must be non-empty".into()));
    }
    if (width, height) == plane.dims() {
        return Ok(plane.clone());
    }
    let src: Vec<f32> = plane.pixels.iter().map(|&v| v as f32).collect();
    let pixels = resize_bilinear_f32(&src, plane.width, plane.height, width, height)
        .into_iter()
        .map(|v| (v + 0.5).floor().clamp(0.0, 255.0) as u8)
        .collect();
    GrayPlane::new(width, height, pixels)
}

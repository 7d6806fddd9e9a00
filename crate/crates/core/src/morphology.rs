//! Grayscale and binary morphology with flat structuring elements.
//!
//! Neighbourhoods are clipped to the image (coordinates are clamped to the
//! nearest edge pixel), which keeps dilation and erosion adjoint: closing is
//! extensive and idempotent, and no artificial frame enters the result.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayPlane;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementShape {
    Square,
    Disk,
}

/// Flat, centred structuring element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StructuringElement {
    pub shape: ElementShape,
    pub radius: usize,
}

impl StructuringElement {
    pub fn square(radius: usize) -> Self {
        Self {
            shape: ElementShape::Square,
            radius,
        }
    }

    pub fn disk(radius: usize) -> Self {
        Self {
            shape: ElementShape::Disk,
            radius,
        }
    }

    /// Offsets `(dx, dy)` covered by the element, row-major.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let r = self.radius as isize;
        let mut out = Vec::with_capacity((2 * self.radius + 1).pow(2));
        for dy in -r..=r {
            for dx in -r..=r {
                let inside = match self.shape {
                    ElementShape::Square => true,
                    ElementShape::Disk => dx * dx + dy * dy <= r * r,
                };
                if inside {
                    out.push((dx, dy));
                }
            }
        }
        out
    }

    fn check_fits(&self, width: usize, height: usize) -> Result<()> {
        if self.radius == 0 {
            return Err(Error::Config("structuring element radius must be at least 1".into()));
        }
        if 2 * self.radius >= width.min(height) {
            return Err(Error::ElementTooLarge {
                radius: self.radius,
                width,
                height,
            });
        }
        Ok(())
    }
}

/// Foreground/background grid, `true` meaning foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "mask buffer of {} bits does not match {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
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

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// True when every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Foreground rendered as 255, background as 0.
    pub fn to_plane(&self) -> GrayPlane {
        let pixels = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        GrayPlane::new(self.width, self.height, pixels).expect("mask dimensions are valid")
    }
}

fn rank_filter(
    src: &[u8],
    width: usize,
    height: usize,
    se: &StructuringElement,
    take_max: bool,
) -> Vec<u8> {
    let offsets = se.offsets();
    let clamp = |v: isize, len: usize| v.clamp(0, len as isize - 1) as usize;
    let mut out = Vec::with_capacity(src.len());
    for y in 0..height {
        for x in 0..width {
            let mut acc = if take_max { u8::MIN } else { u8::MAX };
            for &(dx, dy) in &offsets {
                let sx = clamp(x as isize + dx, width);
                let sy = clamp(y as isize + dy, height);
                let v = src[sy * width + sx];
                acc = if take_max { acc.max(v) } else { acc.min(v) };
            }
            out.push(acc);
        }
    }
    out
}

/// Minimum over the element footprint at every pixel.
pub fn erode_gray(plane: &GrayPlane, se: &StructuringElement) -> Result<GrayPlane> {
    se.check_fits(plane.width(), plane.height())?;
    let px = rank_filter(plane.pixels(), plane.width(), plane.height(), se, false);
    GrayPlane::new(plane.width(), plane.height(), px)
}

/// Maximum over the element footprint at every pixel.
pub fn dilate_gray(plane: &GrayPlane, se: &StructuringElement) -> Result<GrayPlane> {
    se.check_fits(plane.width(), plane.height())?;
    let px = rank_filter(plane.pixels(), plane.width(), plane.height(), se, true);
    GrayPlane::new(plane.width(), plane.height(), px)
}

/// Dilation followed by erosion with the same element.
pub fn close_gray(plane: &GrayPlane, se: &StructuringElement) -> Result<GrayPlane> {
    erode_gray(&dilate_gray(plane, se)?, se)
}

fn mask_rank(mask: &BinaryMask, se: &StructuringElement, take_max: bool) -> BinaryMask {
    let src: Vec<u8> = mask.bits.iter().map(|&b| b as u8).collect();
    let out = rank_filter(&src, mask.width, mask.height, se, take_max);
    BinaryMask {
        width: mask.width,
        height: mask.height,
        bits: out.into_iter().map(|v| v != 0).collect(),
    }
}

pub fn dilate_mask(mask: &BinaryMask, se: &StructuringElement) -> Result<BinaryMask> {
    se.check_fits(mask.width, mask.height)?;
    Ok(mask_rank(mask, se, true))
}

pub fn erode_mask(mask: &BinaryMask, se: &StructuringElement) -> Result<BinaryMask> {
    se.check_fits(mask.width, mask.height)?;
    Ok(mask_rank(mask, se, false))
}

/// Binary closing; the result always contains the input.
pub fn close_mask(mask: &BinaryMask, se: &StructuringElement) -> Result<BinaryMask> {
    erode_mask(&dilate_mask(mask, se)?, se)
}

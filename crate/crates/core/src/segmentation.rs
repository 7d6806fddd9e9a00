//! Lesion segmentation: morphological denoising, Otsu thresholding, mask
//! cleanup and selection of the dominant connected component.

use std::collections::{HashSet, VecDeque};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{extract_channel, histogram, resize_plane, Channel, GrayPlane, RasterImage};
use crate::morphology::{close_gray, close_mask, erode_gray, BinaryMask, StructuringElement};

/// Closing, erosion and down/up-sampling applied to each colour channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DenoiseParams {
    pub close_element: StructuringElement,
    pub erode_element: StructuringElement,
    /// Downscale factor for the bilinear smoothing pass; 1 disables it.
    pub interpolation_factor: usize,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        Self {
            close_element: StructuringElement::square(2),
            erode_element: StructuringElement::square(1),
            interpolation_factor: 2,
        }
    }
}

/// Which side of the threshold is the lesion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    #[default]
    Darker,
    Brighter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegmentationConfig {
    pub denoise: DenoiseParams,
    pub channel: Channel,
    pub polarity: Polarity,
    pub mask_close_element: StructuringElement,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            denoise: DenoiseParams::default(),
            channel: Channel::Green,
            polarity: Polarity::Darker,
            mask_close_element: StructuringElement::square(2),
        }
    }
}

/// Inclusive pixel bounds `(x_min, y_min, x_max, y_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.x_max - self.x_min + 1
    }

    pub fn height(&self) -> usize {
        self.y_max - self.y_min + 1
    }
}

/// One 8-connected foreground component and its tight bounding box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionOfInterest {
    pub mask: BinaryMask,
    pub bbox: BoundingBox,
    pub area: usize,
    /// Distinct pixels on the outer contour found by Moore-neighbour tracing.
    pub perimeter: usize,
}

/// All intermediate products of [`segment_lesion_detailed`].
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub denoised: RasterImage,
    /// The denoised channel Otsu ran on.
    pub plane: GrayPlane,
    pub threshold: u8,
    /// Thresholded mask after the final closing.
    pub mask: BinaryMask,
    pub roi: RegionOfInterest,
}

fn denoise_plane(plane: &GrayPlane, params: &DenoiseParams) -> Result<GrayPlane> {
    let closed = close_gray(plane, &params.close_element)?;
    let eroded = erode_gray(&closed, &params.erode_element)?;
    let f = params.interpolation_factor;
    if f <= 1 {
        return Ok(eroded);
    }
    let (w, h) = eroded.dims();
    let small = resize_plane(&eroded, (w / f).max(1), (h / f).max(1))?;
    resize_plane(&small, w, h)
}

/// Per-channel closing, erosion and bilinear down/up smoothing.
pub fn denoise(img: &RasterImage, params: &DenoiseParams) -> Result<RasterImage> {
    if params.interpolation_factor == 0 {
        return Err(Error::Config("interpolation factor must be at least 1".into()));
    }
    let [r, g, b] = img.split_channels()?;
    RasterImage::from_planes(
        &denoise_plane(&r, params)?,
        &denoise_plane(&g, params)?,
        &denoise_plane(&b, params)?,
    )
}

/// Between-class variance up to the constant factor 1/N^4, as an exact
/// rational `num / den` with `num = (S0*N - S*n0)^2`, `den = n0*n1`.
struct Separation {
    num: u128,
    den: u128,
}

/// Global Otsu threshold. Classes are `{v <= t}` and `{v > t}`; among
/// maximisers the smallest `t` wins.
pub fn otsu_threshold(plane: &GrayPlane) -> Result<u8> {
    let hist = histogram(plane);
    let bins = hist.bins();
    if bins.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::DegeneratePlane);
    }
    let total = hist.total() as u128;
    let total_sum: u128 = bins.iter().enumerate().map(|(v, &c)| v as u128 * c as u128).sum();

    let mut best: Option<(u8, Separation)> = None;
    let (mut n0, mut s0) = (0u128, 0u128);
    for (t, &count) in bins.iter().enumerate() {
        n0 += count as u128;
        s0 += t as u128 * count as u128;
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = (s0 * total).abs_diff(total_sum * n0);
        let Some(num) = diff.checked_mul(diff) else {
            return Ok(otsu_threshold_big(bins));
        };
        let candidate = Separation { num, den: n0 * n1 };
        let better = match &best {
            None => true,
            Some((_, cur)) => match exceeds(&candidate, cur) {
                Some(b) => b,
                None => return Ok(otsu_threshold_big(bins)),
            },
        };
        if better {
            best = Some((t as u8, candidate));
        }
    }
    best.map(|(t, _)| t).ok_or(Error::DegeneratePlane)
}

/// `a > b` on the rationals, or `None` if the cross products overflow.
fn exceeds(a: &Separation, b: &Separation) -> Option<bool> {
    Some(a.num.checked_mul(b.den)? > b.num.checked_mul(a.den)?)
}

/// Arbitrary-precision fallback for very large planes.
fn otsu_threshold_big(bins: &[u64; 256]) -> u8 {
    let total: u128 = bins.iter().map(|&c| c as u128).sum();
    let total_sum: u128 = bins.iter().enumerate().map(|(v, &c)| v as u128 * c as u128).sum();
    let mut best: Option<(u8, BigUint, BigUint)> = None;
    let (mut n0, mut s0) = (0u128, 0u128);
    for (t, &count) in bins.iter().enumerate() {
        n0 += count as u128;
        s0 += t as u128 * count as u128;
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = BigUint::from(s0) * BigUint::from(total);
        let other = BigUint::from(total_sum) * BigUint::from(n0);
        let d = if diff >= other { diff - other } else { other - diff };
        let num = &d * &d;
        let den = BigUint::from(n0) * BigUint::from(n1);
        let better = match &best {
            None => true,
            Some((_, bn, bd)) => &num * bd > bn * &den,
        };
        if better {
            best = Some((t as u8, num, den));
        }
    }
    best.map(|(t, _, _)| t).unwrap_or(0)
}

/// Foreground is `v <= t` for [`Polarity::Darker`] and `v > t` for
/// [`Polarity::Brighter`], matching the two Otsu classes.
pub fn apply_threshold(plane: &GrayPlane, threshold: u8, polarity: Polarity) -> BinaryMask {
    let bits = plane
        .pixels()
        .iter()
        .map(|&v| match polarity {
            Polarity::Darker => v <= threshold,
            Polarity::Brighter => v > threshold,
        })
        .collect();
    BinaryMask::new(plane.width(), plane.height(), bits).expect("plane dimensions are valid")
}

// Clockwise starting at west, with y pointing down.
const MOORE: [(isize, isize); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

struct Component {
    label: u32,
    start: (usize, usize),
    area: usize,
    bbox: BoundingBox,
}

fn label_components(mask: &BinaryMask) -> (Vec<u32>, Vec<Component>) {
    let (w, h) = mask.dims();
    let mut labels = vec![0u32; w * h];
    let mut comps = Vec::new();
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || labels[y * w + x] != 0 {
                continue;
            }
            let label = comps.len() as u32 + 1;
            let mut comp = Component {
                label,
                start: (x, y),
                area: 0,
                bbox: BoundingBox {
                    x_min: x,
                    y_min: y,
                    x_max: x,
                    y_max: y,
                },
            };
            labels[y * w + x] = label;
            queue.push_back((x, y));
            while let Some((cx, cy)) = queue.pop_front() {
                comp.area += 1;
                comp.bbox.x_min = comp.bbox.x_min.min(cx);
                comp.bbox.x_max = comp.bbox.x_max.max(cx);
                comp.bbox.y_min = comp.bbox.y_min.min(cy);
                comp.bbox.y_max = comp.bbox.y_max.max(cy);
                for (dx, dy) in MOORE {
                    let (nx, ny) = (cx as isize + dx, cy as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if mask.get(nx, ny) && labels[ny * w + nx] == 0 {
                        labels[ny * w + nx] = label;
                        queue.push_back((nx, ny));
                    }
                }
            }
            comps.push(comp);
        }
    }
    (labels, comps)
}

/// Moore-neighbour contour trace of one labelled component; returns the
/// number of distinct contour pixels.
fn trace_perimeter(labels: &[u32], width: usize, height: usize, comp: &Component) -> usize {
    let inside = |x: isize, y: isize| {
        x >= 0
            && y >= 0
            && (x as usize) < width
            && (y as usize) < height
            && labels[y as usize * width + x as usize] == comp.label
    };
    let start = (comp.start.0 as isize, comp.start.1 as isize);
    // Step from `p`, having arrived with background neighbour `back`.
    let step = |p: (isize, isize), back: (isize, isize)| -> Option<((isize, isize), (isize, isize))> {
        let rel = (back.0 - p.0, back.1 - p.1);
        let k = MOORE.iter().position(|&d| d == rel).expect("backtrack is adjacent");
        let mut prev = back;
        for i in 1..=8 {
            let (dx, dy) = MOORE[(k + i) % 8];
            let q = (p.0 + dx, p.1 + dy);
            if inside(q.0, q.1) {
                return Some((q, prev));
            }
            prev = q;
        }
        None
    };

    let mut visited = HashSet::new();
    visited.insert(start);
    // The raster-first pixel never has a component pixel to its west.
    let Some(first) = step(start, (start.0 - 1, start.1)) else {
        return 1;
    };
    let (mut p, mut back) = first;
    let limit = 4 * comp.area + 8;
    for _ in 0..limit {
        visited.insert(p);
        let (next, next_back) = step(p, back).expect("component pixel has a neighbour");
        if p == start && next == first.0 {
            break;
        }
        p = next;
        back = next_back;
    }
    visited.len()
}

/// Picks the component with the longest outer contour. Ties go to the larger
/// area, then to the smallest `(y_min, x_min)`.
pub fn largest_component_roi(mask: &BinaryMask) -> Result<RegionOfInterest> {
    let (w, h) = mask.dims();
    let (labels, comps) = label_components(mask);
    let best = comps
        .iter()
        .map(|c| (trace_perimeter(&labels, w, h, c), c))
        .max_by(|(pa, a), (pb, b)| {
            pa.cmp(pb)
                .then(a.area.cmp(&b.area))
                .then((b.bbox.y_min, b.bbox.x_min).cmp(&(a.bbox.y_min, a.bbox.x_min)))
        })
        .ok_or(Error::EmptyMask)?;
    let (perimeter, comp) = best;
    let bits = labels.iter().map(|&l| l == comp.label).collect();
    Ok(RegionOfInterest {
        mask: BinaryMask::new(w, h, bits)?,
        bbox: comp.bbox,
        area: comp.area,
        perimeter,
    })
}

pub fn segment_lesion_detailed(img: &RasterImage, cfg: &SegmentationConfig) -> Result<Segmentation> {
    if img.channels() != 3 {
        return Err(Error::NotColorImage {
            channels: img.channels(),
        });
    }
    let denoised = denoise(img, &cfg.denoise)?;
    let plane = extract_channel(&denoised, cfg.channel)?;
    let threshold = otsu_threshold(&plane)?;
    let raw = apply_threshold(&plane, threshold, cfg.polarity);
    let mask = close_mask(&raw, &cfg.mask_close_element)?;
    let roi = largest_component_roi(&mask)?;
    Ok(Segmentation {
        denoised,
        plane,
        threshold,
        mask,
        roi,
    })
}

/// Denoise, pick the configured channel, Otsu-threshold, close the mask and
/// keep the dominant component.
pub fn segment_lesion(img: &RasterImage, cfg: &SegmentationConfig) -> Result<RegionOfInterest> {
    segment_lesion_detailed(img, cfg).map(|s| s.roi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block_mask(w: usize, h: usize, blocks: &[(usize, usize, usize, usize)]) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| {
            blocks
                .iter()
                .any(|&(x0, y0, x1, y1)| (x0..=x1).contains(&x) && (y0..=y1).contains(&y))
        })
        .unwrap()
    }

    #[test]
    fn otsu_degenerate() {
        let p = GrayPlane::filled(4, 4, 9).unwrap();
        assert!(matches!(otsu_threshold(&p), Err(Error::DegeneratePlane)));
    }

    #[test]
    fn otsu_two_levels_smallest_tie() {
        let p = GrayPlane::from_fn(4, 4, |x, _| if x < 2 { 0 } else { 255 }).unwrap();
        assert_eq!(otsu_threshold(&p).unwrap(), 0);
        let p = GrayPlane::from_fn(4, 4, |x, _| if x < 2 { 10 } else { 200 }).unwrap();
        assert_eq!(otsu_threshold(&p).unwrap(), 10);
    }

    #[test]
    fn big_fallback_agrees() {
        let p = GrayPlane::from_fn(37, 29, |x, y| ((x * 7 + y * 13) % 251) as u8).unwrap();
        let hist = histogram(&p);
        assert_eq!(otsu_threshold(&p).unwrap(), otsu_threshold_big(hist.bins()));
    }

    #[test]
    fn threshold_polarity() {
        let p = GrayPlane::new(2, 1, vec![0, 255]).unwrap();
        assert_eq!(apply_threshold(&p, 128, Polarity::Darker).bits(), &[true, false]);
        assert_eq!(apply_threshold(&p, 128, Polarity::Brighter).bits(), &[false, true]);
    }

    #[test]
    fn perimeter_of_blocks() {
        let roi = largest_component_roi(&block_mask(7, 7, &[(2, 2, 4, 4)])).unwrap();
        assert_eq!(roi.perimeter, 8);
        assert_eq!(roi.area, 9);
        assert_eq!(
            roi.bbox,
            BoundingBox {
                x_min: 2,
                y_min: 2,
                x_max: 4,
                y_max: 4
            }
        );
        let roi = largest_component_roi(&block_mask(5, 5, &[(0, 0, 4, 4)])).unwrap();
        assert_eq!(roi.perimeter, 16);
    }

    #[test]
    fn perimeter_of_single_pixel_and_line() {
        let roi = largest_component_roi(&block_mask(5, 5, &[(2, 2, 2, 2)])).unwrap();
        assert_eq!((roi.perimeter, roi.area), (1, 1));
        let roi = largest_component_roi(&block_mask(7, 3, &[(1, 1, 5, 1)])).unwrap();
        assert_eq!(roi.perimeter, 5);
    }

    #[test]
    fn perimeter_ignores_holes() {
        // 5x5 ring: outer contour has 16 pixels, hole boundary is not traced.
        let mut m = block_mask(9, 9, &[(2, 2, 6, 6)]);
        m.set(4, 4, false);
        let roi = largest_component_roi(&m).unwrap();
        assert_eq!(roi.perimeter, 16);
    }

    #[test]
    fn block_beats_isolated_pixel() {
        let m = block_mask(12, 12, &[(0, 0, 0, 0), (5, 5, 9, 9)]);
        let roi = largest_component_roi(&m).unwrap();
        assert_eq!(roi.area, 25);
        assert_eq!(roi.bbox.x_min, 5);
        assert!(!roi.mask.get(0, 0));
        assert!(roi.mask.is_subset_of(&m));
    }

    #[test]
    fn ties_prefer_top_left() {
        let m = block_mask(12, 12, &[(7, 7, 9, 9), (1, 1, 3, 3)]);
        let roi = largest_component_roi(&m).unwrap();
        assert_eq!((roi.bbox.x_min, roi.bbox.y_min), (1, 1));
    }

    #[test]
    fn diagonal_pixels_are_connected() {
        let m = BinaryMask::from_fn(6, 6, |x, y| x == y).unwrap();
        let roi = largest_component_roi(&m).unwrap();
        assert_eq!(roi.area, 6);
        assert_eq!(roi.perimeter, 6);
    }

    #[test]
    fn empty_mask_rejected() {
        let m = BinaryMask::empty(4, 4).unwrap();
        assert!(matches!(largest_component_roi(&m), Err(Error::EmptyMask)));
    }

    #[test]
    fn denoise_constant_image() {
        let img = RasterImage::filled_rgb(20, 16, [180, 120, 90]).unwrap();
        for f in [1, 2, 3] {
            let params = DenoiseParams {
                interpolation_factor: f,
                ..DenoiseParams::default()
            };
            assert_eq!(denoise(&img, &params).unwrap(), img);
        }
    }

    #[test]
    fn denoise_without_interpolation_is_close_then_erode() {
        let img = RasterImage::from_rgb_fn(16, 12, |x, y| {
            [(x * 13 + y * 7) as u8, (x * y) as u8, (200 - x * 3) as u8]
        })
        .unwrap();
        let se = StructuringElement::square(1);
        let params = DenoiseParams {
            close_element: se,
            erode_element: se,
            interpolation_factor: 1,
        };
        let out = denoise(&img, &params).unwrap();
        let [r, g, b] = img.split_channels().unwrap();
        let expect = |p: &GrayPlane| erode_gray(&close_gray(p, &se).unwrap(), &se).unwrap();
        let want = RasterImage::from_planes(&expect(&r), &expect(&g), &expect(&b)).unwrap();
        assert_eq!(out, want);
    }

    #[test]
    fn denoise_removes_hairs() {
        let img = RasterImage::from_rgb_fn(40, 40, |x, y| {
            if x == 13 || y == 27 || x + y == 50 {
                [20, 15, 10]
            } else {
                [220, 170, 150]
            }
        })
        .unwrap();
        let out = denoise(&img, &DenoiseParams::default()).unwrap();
        let min_in = *img.pixels().iter().min().unwrap();
        let min_out = *out.pixels().iter().min().unwrap();
        assert!(min_out > min_in, "{min_out} <= {min_in}");
        assert_eq!((out.width(), out.height()), (40, 40));
    }

    #[test]
    fn segment_constant_image_is_degenerate() {
        let img = RasterImage::filled_rgb(32, 32, [200, 150, 130]).unwrap();
        assert!(matches!(
            segment_lesion(&img, &SegmentationConfig::default()),
            Err(Error::DegeneratePlane)
        ));
    }

    #[test]
    fn segment_gray_image_rejected() {
        let img = RasterImage::new(8, 8, 1, vec![0; 64]).unwrap();
        assert!(segment_lesion(&img, &SegmentationConfig::default()).is_err());
    }
}

//! Synthetic inputs shared by the criterion benches.

use tailcurate::RasterImage;

/// Dark disk of radius `r` centred at `(cx, cy)` on a skin-toned field.
pub fn lesion_image(width: usize, height: usize, cx: f64, cy: f64, r: f64) -> RasterImage {
    RasterImage::from_rgb_fn(width, height, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        if dx * dx + dy * dy <= r * r {
            [90, 50, 40]
        } else {
            [220, 170, 150]
        }
    })
    .expect("valid dimensions")
}

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tailcurate::{GrayPlane, RasterImage};

pub const SKIN: [u8; 3] = [222, 172, 150];
pub const LESION: [u8; 3] = [96, 58, 44];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_plane(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayPlane {
    let px = (0..w * h).map(|_| rng.random::<u8>()).collect();
    GrayPlane::new(w, h, px).unwrap()
}

/// Dark disk on a skin field, with optional Gaussian-ish pixel noise.
pub fn disk_image(
    w: usize,
    h: usize,
    cx: f64,
    cy: f64,
    r: f64,
    noise: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> RasterImage {
    let mut rng = rng;
    RasterImage::from_rgb_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        let base = if dx * dx + dy * dy <= r * r { LESION } else { SKIN };
        match rng.as_deref_mut() {
            Some(g) if noise > 0.0 => {
                let n: f64 = (0..4).map(|_| g.random::<f64>() - 0.5).sum::<f64>() * noise;
                base.map(|c| (c as f64 + n).round().clamp(0.0, 255.0) as u8)
            }
            _ => base,
        }
    })
    .unwrap()
}

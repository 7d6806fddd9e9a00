//! Similarity metrics between an original image and a generated one.
//!
//! * content: Bhattacharyya distance between intensity distributions,
//!   blind to where pixels sit;
//! * spatial: centroid and spread of the segmented lesion;
//! * the weighted Content-Space combination of both;
//! * Fréchet distance between Gaussian fits of two embedding sets.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::image::{histogram, normalize_histogram, to_gray, GrayPlane, IntensityDistribution, RasterImage};
use crate::segmentation::RegionOfInterest;

/// Floor on the Bhattacharyya coefficient, bounding the distance of
/// disjoint distributions at `-ln(1e-12)`.
pub const BC_EPSILON: f64 = 1e-12;

/// Eigenvalues of an input covariance below `-PSD_TOLERANCE` are rejected.
pub const PSD_TOLERANCE: f64 = 1e-6;

/// Form of the Bhattacharyya coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BcForm {
    /// `sum(sqrt(p_i * q_i))`; identical distributions score 0.
    #[default]
    Standard,
    /// `sum(p_i * q_i)` without the square root. Identical distributions
    /// do not score 0 under it.
    ProductSum,
}

pub fn bhattacharyya(p: &IntensityDistribution, q: &IntensityDistribution) -> f64 {
    bhattacharyya_with(p, q, BcForm::Standard)
}

pub fn bhattacharyya_with(p: &IntensityDistribution, q: &IntensityDistribution, form: BcForm) -> f64 {
    let coefficient: f64 = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| match form {
            BcForm::Standard => (a * b).sqrt(),
            BcForm::ProductSum => a * b,
        })
        .sum();
    // Rounding can push the coefficient of identical inputs just above 1.
    (-coefficient.clamp(BC_EPSILON, 1.0).ln()).max(0.0)
}

pub fn gray_distribution(img: &RasterImage) -> Result<IntensityDistribution> {
    normalize_histogram(&histogram(&to_gray(img)))
}

/// Bhattacharyya distance between grayscale intensity distributions.
pub fn content_distance(original: &RasterImage, generated: &RasterImage) -> Result<f64> {
    content_distance_with(original, generated, BcForm::Standard)
}

pub fn content_distance_with(
    original: &RasterImage,
    generated: &RasterImage,
    form: BcForm,
) -> Result<f64> {
    Ok(bhattacharyya_with(
        &gray_distribution(original)?,
        &gray_distribution(generated)?,
        form,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialStats {
    pub x_centroid: f64,
    pub y_centroid: f64,
    /// Mean of the two centroid coordinates.
    pub centroid_scalar: f64,
    pub sigma: f64,
}

/// Centroid of the ROI foreground and population standard deviation of
/// `plane` over the ROI bounding box.
pub fn spatial_stats(roi: &RegionOfInterest, plane: &GrayPlane) -> Result<SpatialStats> {
    if roi.mask.dims() != plane.dims() {
        return Err(Error::DimensionMismatch(format!(
            "ROI is {:?} but plane is {:?}",
            roi.mask.dims(),
            plane.dims()
        )));
    }
    let (w, h) = plane.dims();
    let (mut sx, mut sy, mut n) = (0u64, 0u64, 0u64);
    for y in 0..h {
        for x in 0..w {
            if roi.mask.get(x, y) {
                sx += x as u64;
                sy += y as u64;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyRoi);
    }
    let x_centroid = sx as f64 / n as f64;
    let y_centroid = sy as f64 / n as f64;

    let b = roi.bbox;
    let count = (b.width() * b.height()) as f64;
    let mut sum = 0u64;
    for y in b.y_min..=b.y_max {
        for x in b.x_min..=b.x_max {
            sum += plane.get(x, y) as u64;
        }
    }
    let mean = sum as f64 / count;
    let mut sq = 0.0;
    for y in b.y_min..=b.y_max {
        for x in b.x_min..=b.x_max {
            let d = plane.get(x, y) as f64 - mean;
            sq += d * d;
        }
    }
    Ok(SpatialStats {
        x_centroid,
        y_centroid,
        centroid_scalar: (x_centroid + y_centroid) / 2.0,
        sigma: (sq / count).sqrt(),
    })
}

/// `|centroid_a - centroid_b| + |sigma_a - sigma_b|`.
pub fn spatial_score(orig: &SpatialStats, generated: &SpatialStats) -> f64 {
    (orig.centroid_scalar - generated.centroid_scalar).abs() + (orig.sigma - generated.sigma).abs()
}

/// Rescales to [0, 1]. A constant input maps to all zeros.
pub fn min_max_normalize(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span <= 0.0 {
        return Ok(vec![0.0; scores.len()]);
    }
    Ok(scores.iter().map(|s| ((s - lo) / span).clamp(0.0, 1.0)).collect())
}

/// Branch weights: `w1` for content, `w2` for spatial, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w1: f64,
    pub w2: f64,
}

impl Weights {
    pub fn new(w1: f64, w2: f64) -> Result<Self> {
        let w = Self { w1, w2 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("w1", self.w1), ("w2", self.w2)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::WeightOutOfRange { name, value });
            }
        }
        Ok(())
    }
}

impl Default for Weights {
    /// Spatial branch only.
    fn default() -> Self {
        Self { w1: 0.0, w2: 1.0 }
    }
}

pub fn content_space_score(c_norm: f64, s_norm: f64, w: &Weights) -> Result<f64> {
    w.validate()?;
    Ok(w.w1 * c_norm + w.w2 * s_norm)
}

/// Mean and covariance of an embedding set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Column means and unbiased (n - 1) covariance, symmetrised.
pub fn gaussian_stats(embeddings: &EmbeddingMatrix) -> Result<GaussianStats> {
    gaussian_stats_rows(embeddings.rows())
}

pub fn gaussian_stats_rows(rows: &[Vec<f64>]) -> Result<GaussianStats> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::DimensionMismatch("embedding rows differ in length".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let data = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let mean = DVector::from_fn(d, |j, _| data.column(j).sum() / n as f64);
    let mut centered = data;
    for j in 0..d {
        let m = mean[j];
        centered.column_mut(j).add_scalar_mut(-m);
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianStats { mean, cov })
}

fn symmetric(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetric(m));
    if let Some(&worst) = eig.eigenvalues.iter().find(|&&l| l < -PSD_TOLERANCE) {
        return Err(Error::NotPsd { eigenvalue: worst });
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// `|mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2))`.
///
/// The trace of `(S_a S_b)^(1/2)` is taken as the sum of square roots of the
/// eigenvalues of `S_a^(1/2) S_b S_a^(1/2)`, which is similar to `S_a S_b`
/// and symmetric PSD.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.dim() != b.dim() || a.cov.shape() != b.cov.shape() || a.cov.nrows() != a.dim() {
        return Err(Error::DimensionMismatch(format!(
            "Gaussian dimensions {} and {} differ",
            a.dim(),
            b.dim()
        )));
    }
    let root_a = psd_sqrt(&a.cov)?;
    // Validates b as PSD as well.
    psd_sqrt(&b.cov)?;
    let inner = symmetric(&(&root_a * &b.cov * &root_a));
    let eig = SymmetricEigen::new(inner);
    let trace_sqrt: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let value = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * trace_sqrt;
    Ok(value.max(0.0))
}

/// Fréchet distance with a flag for sets too small to give full-rank
/// covariances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidEstimate {
    pub value: f64,
    /// At least one set had no more rows than dimensions.
    pub rank_deficient: bool,
}

pub fn fid_between_sets(real: &EmbeddingMatrix, generated: &EmbeddingMatrix) -> Result<FidEstimate> {
    fid_between_rows(real.rows(), generated.rows())
}

pub fn fid_between_rows(real: &[Vec<f64>], generated: &[Vec<f64>]) -> Result<FidEstimate> {
    let a = gaussian_stats_rows(real)?;
    let b = gaussian_stats_rows(generated)?;
    let d = a.dim();
    let rank_deficient = real.len() <= d || generated.len() <= d;
    if rank_deficient {
        log::warn!(
            "FID on {} and {} samples of dimension {d}: covariance is rank deficient",
            real.len(),
            generated.len()
        );
    }
    Ok(FidEstimate {
        value: frechet_distance(&a, &b)?,
        rank_deficient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::BinaryMask;
    use crate::segmentation::{largest_component_roi, BoundingBox};
    use approx::assert_abs_diff_eq;

    fn dist(pairs: &[(usize, f64)]) -> IntensityDistribution {
        let mut w = [0.0; 256];
        for &(i, v) in pairs {
            w[i] = v;
        }
        IntensityDistribution::from_weights(&w).unwrap()
    }

    fn gauss_1d(mu: f64, var: f64) -> GaussianStats {
        GaussianStats {
            mean: DVector::from_element(1, mu),
            cov: DMatrix::from_element(1, 1, var),
        }
    }

    #[test]
    fn bhattacharyya_cases() {
        let p = dist(&[(0, 1.0)]);
        let q = dist(&[(0, 0.5), (1, 0.5)]);
        assert!(bhattacharyya(&q, &q) < 1e-12);
        assert_abs_diff_eq!(bhattacharyya(&p, &q), -(0.5f64.sqrt()).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(bhattacharyya(&p, &q), 0.34657, epsilon = 1e-5);
        let r = dist(&[(5, 1.0)]);
        assert_abs_diff_eq!(bhattacharyya(&p, &r), 27.631021115928547, epsilon = 1e-9);
    }

    #[test]
    fn product_sum_form_does_not_vanish_on_identity() {
        let q = dist(&[(0, 0.5), (1, 0.5)]);
        assert_abs_diff_eq!(bhattacharyya_with(&q, &q, BcForm::ProductSum), 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn content_black_white_and_mirror() {
        let black = RasterImage::filled_rgb(4, 4, [0, 0, 0]).unwrap();
        let white = RasterImage::filled_rgb(4, 4, [255, 255, 255]).unwrap();
        assert_abs_diff_eq!(content_distance(&black, &white).unwrap(), -(1e-12f64).ln(), epsilon = 1e-9);
        let img = RasterImage::from_rgb_fn(7, 5, |x, y| [(x * 30) as u8, (y * 40) as u8, 9]).unwrap();
        let mirror = RasterImage::from_rgb_fn(7, 5, |x, y| img.pixel(6 - x, y).try_into().unwrap()).unwrap();
        assert_eq!(content_distance(&img, &img).unwrap(), 0.0);
        assert_eq!(content_distance(&img, &mirror).unwrap(), 0.0);
    }

    #[test]
    fn spatial_stats_cases() {
        let plane = GrayPlane::filled(3, 3, 50).unwrap();
        let roi = largest_component_roi(&BinaryMask::from_fn(3, 3, |_, _| true).unwrap()).unwrap();
        let s = spatial_stats(&roi, &plane).unwrap();
        assert_eq!((s.x_centroid, s.y_centroid, s.centroid_scalar, s.sigma), (1.0, 1.0, 1.0, 0.0));

        let plane = GrayPlane::from_fn(8, 5, |x, y| (x * 20 + y) as u8).unwrap();
        let roi = largest_component_roi(&BinaryMask::from_fn(8, 5, |x, y| (x, y) == (4, 2)).unwrap()).unwrap();
        let s = spatial_stats(&roi, &plane).unwrap();
        assert_eq!((s.x_centroid, s.y_centroid, s.centroid_scalar, s.sigma), (4.0, 2.0, 3.0, 0.0));

        let plane = GrayPlane::new(2, 2, vec![0, 0, 255, 255]).unwrap();
        let roi = largest_component_roi(&BinaryMask::from_fn(2, 2, |_, _| true).unwrap()).unwrap();
        let s = spatial_stats(&roi, &plane).unwrap();
        assert_eq!(s.sigma, 127.5);
        assert_eq!(
            roi.bbox,
            BoundingBox {
                x_min: 0,
                y_min: 0,
                x_max: 1,
                y_max: 1
            }
        );
    }

    #[test]
    fn spatial_stats_errors() {
        let roi = largest_component_roi(&BinaryMask::from_fn(3, 3, |_, _| true).unwrap()).unwrap();
        let plane = GrayPlane::filled(4, 3, 0).unwrap();
        assert!(matches!(spatial_stats(&roi, &plane), Err(Error::DimensionMismatch(_))));
        let mut empty = roi.clone();
        empty.mask = BinaryMask::empty(3, 3).unwrap();
        let plane = GrayPlane::filled(3, 3, 0).unwrap();
        assert!(matches!(spatial_stats(&empty, &plane), Err(Error::EmptyRoi)));
    }

    #[test]
    fn spatial_score_cases() {
        let s = |c: f64, sigma: f64| SpatialStats {
            x_centroid: c,
            y_centroid: c,
            centroid_scalar: c,
            sigma,
        };
        assert_eq!(spatial_score(&s(10.0, 5.0), &s(10.0, 5.0)), 0.0);
        assert_eq!(spatial_score(&s(10.0, 5.0), &s(13.0, 5.0)), 3.0);
        assert_eq!(spatial_score(&s(10.0, 5.0), &s(13.0, 9.0)), 7.0);
    }

    #[test]
    fn min_max_cases() {
        assert_eq!(min_max_normalize(&[2.0, 4.0, 6.0]).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(min_max_normalize(&[5.0, 5.0, 5.0]).unwrap(), vec![0.0; 3]);
        let v = min_max_normalize(&[27.6, 0.3, 13.9]).unwrap();
        assert_eq!((v[0], v[1]), (1.0, 0.0));
        assert_abs_diff_eq!(v[2], 13.6 / 27.3, epsilon = 1e-12);
        assert_abs_diff_eq!(v[2], 0.49817, epsilon = 1e-5);
        assert!(matches!(min_max_normalize(&[1.0, f64::NAN]), Err(Error::NonFiniteInput)));
    }

    #[test]
    fn content_space_cases() {
        let w = Weights::new(1.0, 0.0).unwrap();
        assert_eq!(content_space_score(0.3, 0.9, &w).unwrap(), 0.3);
        let w = Weights::new(0.0, 1.0).unwrap();
        assert_eq!(content_space_score(0.3, 0.9, &w).unwrap(), 0.9);
        let w = Weights::new(0.5, 0.5).unwrap();
        assert_abs_diff_eq!(content_space_score(0.2, 0.6, &w).unwrap(), 0.4, epsilon = 1e-15);
        assert!(Weights::new(1.5, 0.0).is_err());
        let bad = Weights { w1: -0.1, w2: 0.5 };
        assert!(matches!(
            content_space_score(0.1, 0.1, &bad),
            Err(Error::WeightOutOfRange { name: "w1", .. })
        ));
    }

    #[test]
    fn gaussian_stats_cases() {
        let g = gaussian_stats_rows(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(g.mean.as_slice(), &[1.0, 1.0]);
        assert_eq!(g.cov, DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]));
        let g = gaussian_stats_rows(&[vec![3.0], vec![3.0], vec![3.0]]).unwrap();
        assert_eq!(g.cov[(0, 0)], 0.0);
        assert!(matches!(gaussian_stats_rows(&[vec![1.0]]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn frechet_univariate_cases() {
        let fd = |a, b| frechet_distance(&a, &b).unwrap();
        assert_abs_diff_eq!(fd(gauss_1d(0.0, 1.0), gauss_1d(1.0, 1.0)), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fd(gauss_1d(0.0, 4.0), gauss_1d(0.0, 1.0)), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fd(gauss_1d(2.0, 3.0), gauss_1d(2.0, 3.0)), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn frechet_rejects_bad_inputs() {
        let a = gauss_1d(0.0, 1.0);
        let b = GaussianStats {
            mean: DVector::zeros(2),
            cov: DMatrix::identity(2, 2),
        };
        assert!(matches!(frechet_distance(&a, &b), Err(Error::DimensionMismatch(_))));
        assert!(matches!(frechet_distance(&a, &gauss_1d(0.0, -1.0)), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn fid_on_small_sets() {
        let est = fid_between_rows(&[vec![0.0], vec![2.0]], &[vec![1.0], vec![3.0]]).unwrap();
        assert_abs_diff_eq!(est.value, 1.0, epsilon = 1e-10);
        assert!(!est.rank_deficient);
        let same = [vec![0.0, 1.0], vec![2.0, 5.0], vec![1.0, -1.0], vec![4.0, 0.5]];
        assert!(fid_between_rows(&same, &same).unwrap().value < 1e-8);
        let est = fid_between_rows(&same[..2], &same[..2]).unwrap();
        assert!(est.rank_deficient);
    }
}

//! Curation of GAN-generated images for long-tailed image datasets.
//!
//! The crate picks diverse seed images from a minority class, scores each
//! generated candidate against its seed with a weighted content (histogram)
//! and spatial (segmented lesion geometry) metric, and writes deterministic
//! selection manifests. A Fréchet distance over pluggable embeddings is
//! available as a baseline ranking.

pub mod diversity;
pub mod embeddings;
pub mod error;
pub mod image;
pub mod metrics;
pub mod morphology;
pub mod pipeline;
pub mod segmentation;

pub use crate::embeddings::EmbeddingMatrix;
pub use crate::error::{Error, ErrorKind, Result};
pub use crate::image::{Channel, GrayPlane, Histogram256, IntensityDistribution, RasterImage};
pub use crate::metrics::{GaussianStats, SpatialStats, Weights};
pub use crate::morphology::{BinaryMask, StructuringElement};
pub use crate::segmentation::{RegionOfInterest, SegmentationConfig};

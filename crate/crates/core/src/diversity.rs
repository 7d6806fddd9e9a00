//! Diverse subset selection by disparity sum: choose `k` items maximising
//! the sum of pairwise distances inside the subset.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{resize_bilinear_f32, to_gray, RasterImage};

/// Largest collection the exhaustive selector accepts.
pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Symmetric, zero-diagonal matrix of non-negative distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates a row-major `n x n` table.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("distance matrix is not square".into()));
        }
        let entries: Vec<f64> = rows.into_iter().flatten().collect();
        for i in 0..n {
            for j in 0..n {
                let v = entries[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NonFiniteInput);
                }
                if (i == j && v != 0.0) || v != entries[j * n + i] {
                    return Err(Error::Invariant(format!(
                        "distance matrix must be symmetric with zero diagonal (entry {i},{j})"
                    )));
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Relabels items so that new item `i` is old item `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        Self { n, entries }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSelection {
    pub indices: Vec<usize>,
    /// Disparity sum over unordered pairs of `indices`.
    pub objective: f64,
}

/// Grayscale, bilinear resize to `side x side`, row-major, scaled to [0, 1].
pub fn image_feature(img: &RasterImage, side: usize) -> Result<FeatureVector> {
    if side == 0 {
        return Err(Error::Config("feature side must be at least 1".into()));
    }
    let gray = to_gray(img);
    let src: Vec<f32> = gray.pixels().iter().map(|&v| v as f32).collect();
    let resized = resize_bilinear_f32(&src, gray.width(), gray.height(), side, side);
    FeatureVector::new(resized.into_iter().map(|v| v as f64 / 255.0).collect())
}

/// Euclidean distance between every pair of vectors.
pub fn pairwise_distances(features: &[FeatureVector]) -> Result<DistanceMatrix> {
    let n = features.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let d = features[0].dim();
    if let Some(bad) = features.iter().find(|f| f.dim() != d) {
        return Err(Error::DimensionMismatch(format!(
            "feature lengths {} and {} differ",
            d,
            bad.dim()
        )));
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        return 0.0;
                    }
                    // Order the pair so (i, j) and (j, i) sum identically.
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    features[a]
                        .values()
                        .iter()
                        .zip(features[b].values())
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect();
    DistanceMatrix::from_rows(rows)
}

fn check_subset(subset: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in subset {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::DuplicateIndex(i));
        }
    }
    Ok(())
}

/// Sum of `d[i][j]` over unordered pairs in `subset`.
pub fn disparity_sum(subset: &[usize], d: &DistanceMatrix) -> Result<f64> {
    check_subset(subset, d.len())?;
    Ok(pair_sum(subset, d))
}

fn pair_sum(subset: &[usize], d: &DistanceMatrix) -> f64 {
    let mut total = 0.0;
    for (a, &i) in subset.iter().enumerate() {
        for &j in &subset[a + 1..] {
            total += d.get(i, j);
        }
    }
    total
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::KTooLarge { k, n });
    }
    Ok(())
}

/// Exhaustive search over all `C(n, k)` subsets. Ties resolve to the
/// lexicographically smallest index list.
pub fn select_diverse_exact(d: &DistanceMatrix, k: usize) -> Result<SubsetSelection> {
    let n = d.len();
    if n > EXACT_LIMIT {
        return Err(Error::InstanceTooLarge { n, max: EXACT_LIMIT });
    }
    check_k(k, n)?;

    // Subsets are visited in lexicographic order and only a strictly
    // larger sum replaces the incumbent.
    let mut current: Vec<usize> = (0..k).collect();
    let mut best = SubsetSelection {
        objective: pair_sum(&current, d),
        indices: current.clone(),
    };
    loop {
        let mut pos = k;
        while pos > 0 && current[pos - 1] == n - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        current[pos - 1] += 1;
        for i in pos..k {
            current[i] = current[i - 1] + 1;
        }
        let objective = pair_sum(&current, d);
        if objective > best.objective {
            best = SubsetSelection {
                objective,
                indices: current.clone(),
            };
        }
    }
    Ok(best)
}

/// Farthest-pair start, then repeatedly add the item with the largest summed
/// distance to the chosen set (smallest index on ties).
pub fn select_diverse_greedy(d: &DistanceMatrix, k: usize) -> Result<SubsetSelection> {
    let n = d.len();
    check_k(k, n)?;
    if k == 1 {
        return Ok(SubsetSelection {
            indices: vec![0],
            objective: 0.0,
        });
    }
    let mut pair = (0, 1);
    for i in 0..n {
        for j in i + 1..n {
            if d.get(i, j) > d.get(pair.0, pair.1) {
                pair = (i, j);
            }
        }
    }
    let mut chosen = vec![pair.0, pair.1];
    let mut in_set = vec![false; n];
    in_set[pair.0] = true;
    in_set[pair.1] = true;
    let mut gain: Vec<f64> = (0..n).map(|i| d.get(i, pair.0) + d.get(i, pair.1)).collect();
    while chosen.len() < k {
        let mut next = None;
        for i in (0..n).filter(|&i| !in_set[i]) {
            if next.is_none_or(|b: usize| gain[i] > gain[b]) {
                next = Some(i);
            }
        }
        let next = next.expect("k <= n leaves a candidate");
        in_set[next] = true;
        chosen.push(next);
        for (i, g) in gain.iter_mut().enumerate() {
            *g += d.get(i, next);
        }
    }
    let objective = pair_sum(&chosen, d);
    Ok(SubsetSelection {
        indices: chosen,
        objective,
    })
}

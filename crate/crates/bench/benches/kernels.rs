use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tailcurate::diversity::{pairwise_distances, select_diverse_exact, select_diverse_greedy, FeatureVector};
use tailcurate::metrics::{frechet_distance, GaussianStats};
use tailcurate::morphology::close_gray;
use tailcurate::pipeline::{score_candidates, Candidate, PipelineConfig};
use tailcurate::segmentation::{otsu_threshold, segment_lesion};
use tailcurate::{GrayPlane, StructuringElement};
use tailcurate_bench::lesion_image;

fn random_plane(rng: &mut ChaCha8Rng, side: usize) -> GrayPlane {
    GrayPlane::new(side, side, (0..side * side).map(|_| rng.random()).collect()).unwrap()
}

fn segmentation(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let plane = random_plane(&mut rng, 256);
    c.bench_function("otsu_256", |b| b.iter(|| otsu_threshold(black_box(&plane)).unwrap()));
    let se = StructuringElement::square(2);
    c.bench_function("close_gray_256_square2", |b| b.iter(|| close_gray(black_box(&plane), &se).unwrap()));

    let mut group = c.benchmark_group("segment_lesion");
    for side in [64, 256, 600] {
        let img = lesion_image(side, side * 3 / 4, side as f64 / 2.0, side as f64 * 0.4, side as f64 / 6.0);
        group.bench_with_input(BenchmarkId::from_parameter(side), &img, |b, img| {
            b.iter(|| segment_lesion(img, &Default::default()).unwrap())
        });
    }
    group.finish();
}

fn frechet(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("frechet");
    for d in [6, 64, 256] {
        let mut gaussian = || {
            let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            GaussianStats {
                mean: DVector::from_fn(d, |_, _| rng.random()),
                cov: &m * m.transpose(),
            }
        };
        let (a, b) = (gaussian(), gaussian());
        group.bench_function(BenchmarkId::from_parameter(d), |bench| {
            bench.iter(|| frechet_distance(black_box(&a), black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn diversity(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let feats: Vec<_> = (0..200)
        .map(|_| FeatureVector::new((0..64).map(|_| rng.random()).collect()).unwrap())
        .collect();
    let d = pairwise_distances(&feats).unwrap();
    c.bench_function("greedy_n200_k10", |b| b.iter(|| select_diverse_greedy(black_box(&d), 10).unwrap()));
    let small = pairwise_distances(&feats[..20]).unwrap();
    c.bench_function("exact_n20_k5", |b| b.iter(|| select_diverse_exact(black_box(&small), 5).unwrap()));
}

fn scoring(c: &mut Criterion) {
    let seed = lesion_image(64, 64, 32.0, 30.0, 12.0);
    let candidates: Vec<_> = (0..100)
        .map(|i| {
            let shift = (i % 9) as f64 - 4.0;
            Candidate::new(format!("g{i:03}"), lesion_image(64, 64, 32.0 + shift, 30.0 - shift, 10.0 + (i % 5) as f64))
        })
        .collect();
    let cfg = PipelineConfig::default();
    c.bench_function("score_cohort_100x64", |b| {
        b.iter(|| score_candidates("seed", black_box(&seed), &candidates, &cfg).unwrap())
    });
}

criterion_group!(benches, segmentation, frechet, diversity, scoring);
criterion_main!(benches);

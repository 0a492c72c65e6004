use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vessel_metrics::morphology::{connected_components, squared_edt};
use vessel_metrics::phantom::{degrade, gen_tree, DegradeOp, TreeSpec};
use vessel_metrics::{
    evaluate_case, skeletonize, BinaryMask, Connectivity, Dims, DistanceMetric, EvalConfig, Spacing,
};

const SIZES: [usize; 3] = [32, 64, 96];

fn tree(n: usize, seed: u64) -> BinaryMask {
    let spec = TreeSpec {
        seed,
        ..TreeSpec::default()
    };
    gen_tree(&spec, Dims::new(n, n, n).unwrap(), Spacing::isotropic())
        .unwrap()
        .0
}

fn pair(n: usize) -> (BinaryMask, BinaryMask) {
    let reference = tree(n, 11);
    let pred = degrade(
        &reference,
        &[
            "shift:1:0:0".parse::<DegradeOp>().unwrap(),
            "thin:1".parse().unwrap(),
        ],
    )
    .unwrap();
    (pred, reference)
}

fn edt(c: &mut Criterion) {
    let mut g = c.benchmark_group("squared_edt");
    for n in SIZES {
        let mask = tree(n, 3);
        let aniso = BinaryMask::new(
            mask.dims().as_array(),
            Spacing::new(0.8, 0.8, 1.6).unwrap(),
            mask.voxels().to_vec(),
        )
        .unwrap();
        g.bench_with_input(BenchmarkId::new("voxel", n), &mask, |b, m| {
            b.iter(|| squared_edt(black_box(m), DistanceMetric::VoxelIsotropic))
        });
        g.bench_with_input(BenchmarkId::new("physical", n), &aniso, |b, m| {
            b.iter(|| squared_edt(black_box(m), DistanceMetric::Physical))
        });
    }
    g.finish();
}

fn skeleton(c: &mut Criterion) {
    let mut g = c.benchmark_group("skeletonize");
    for n in SIZES {
        let mask = tree(n, 5);
        g.bench_with_input(BenchmarkId::from_parameter(n), &mask, |b, m| {
            b.iter(|| skeletonize(black_box(m)))
        });
    }
    g.finish();
}

fn components(c: &mut Criterion) {
    let mut g = c.benchmark_group("connected_components");
    for n in SIZES {
        let (pred, _) = pair(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &pred, |b, m| {
            b.iter(|| connected_components(black_box(m), Connectivity::Full26))
        });
    }
    g.finish();
}

fn evaluate(c: &mut Criterion) {
    let cfg = EvalConfig::default();
    let mut g = c.benchmark_group("evaluate_case");
    g.sample_size(10);
    for n in SIZES {
        let (pred, reference) = pair(n);
        g.bench_with_input(
            BenchmarkId::from_parameter(n),
            &(pred, reference),
            |b, (p, r)| {
                b.iter(|| evaluate_case("bench", black_box(p), black_box(r), &cfg).unwrap())
            },
        );
    }
    g.finish();
}

criterion_group!(benches, edt, skeleton, components, evaluate);
criterion_main!(benches);

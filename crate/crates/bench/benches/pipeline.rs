use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dilind_bench::{coupled_rotation, expanding_block, rotations};
use dilind_core::functions::{Phi, TestFunction};
use dilind_core::measure::{norm_check, NormParams, SectionMeasure};
use dilind_core::spectral::DEFAULT_CLUSTER_TOL;
use dilind_core::{
    build_cross_section, complexify, isotropy_of, lambda_probe, matrix_exp, ProbeParams, SquareMatrix,
};
use std::hint::black_box;

fn exponential(c: &mut Criterion) {
    let mut group = c.benchmark_group("matrix_exp");
    for k in [1, 2, 4, 8] {
        let a = rotations(k);
        group.bench_with_input(BenchmarkId::new("rotations", 2 * k), &a, |b, a| {
            b.iter(|| matrix_exp(a, black_box(3.7)).unwrap())
        });
    }
    group.finish();
}

fn structure(c: &mut Criterion) {
    let mut group = c.benchmark_group("complexify");
    group.bench_function("coupled_rotation", |b| {
        let a = coupled_rotation();
        b.iter(|| complexify(black_box(&a), DEFAULT_CLUSTER_TOL).unwrap())
    });
    for n in [2, 4, 6] {
        let a = expanding_block(n);
        group.bench_with_input(BenchmarkId::new("expanding_block", n), &a, |b, a| {
            b.iter(|| complexify(a, DEFAULT_CLUSTER_TOL).unwrap())
        });
    }
    group.finish();
}

fn section_time(c: &mut Criterion) {
    let a = coupled_rotation();
    let (_, form) = complexify(&a, DEFAULT_CLUSTER_TOL).unwrap();
    let (iso, _) = isotropy_of(&form).unwrap();
    let cs = build_cross_section(&form, &iso).unwrap();
    let v = [0.3, -1.2, 0.8, 2.0];
    c.bench_function("section/coupled_rotation", |b| b.iter(|| cs.section(black_box(&v)).unwrap()));
}

fn norms(c: &mut Criterion) {
    let a = SquareMatrix::diagonal(&[1.0, -1.0]);
    let (_, form) = complexify(&a, DEFAULT_CLUSTER_TOL).unwrap();
    let (iso, _) = isotropy_of(&form).unwrap();
    let cs = build_cross_section(&form, &iso).unwrap();
    let measure = SectionMeasure::new(&cs).unwrap();
    let phi = Phi::new(TestFunction::Gaussian { center: None, scale: 1.0 }, 2).unwrap();
    let mut group = c.benchmark_group("measure");
    group.sample_size(10);
    group.bench_function("norm_check_mc_10k", |b| {
        b.iter(|| norm_check(&phi, &measure, 2.0, &NormParams::monte_carlo(10_000, 1), false).unwrap())
    });
    group.bench_function("norm_check_quadrature", |b| {
        b.iter(|| norm_check(&phi, &measure, 2.0, &NormParams::quadrature(1), false).unwrap())
    });
    group.bench_function("lambda_probe_100", |b| {
        b.iter(|| lambda_probe(&phi, &form, &iso, cs.omega(), 2.0, &ProbeParams::new(100, 1)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, exponential, structure, section_time, norms);
criterion_main!(benches);

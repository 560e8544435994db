//! Parallel vs sequential batch evaluation.
//!
//! Two workloads: the Jacobi-endomorphism flow identity at many chart points
//! (cheap per point) and the holonomy bracket closure on a deformed spray
//! (expensive per point). Run with `cargo bench -p finsler`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use finsler::batch::{map_points, map_points_seq};
use finsler::holonomy::{holonomy_span, liouville_test};
use finsler::projective::{deform, ProjectiveFactor};
use finsler::spray::{jacobi, SprayData};
use finsler::FinslerModel;
use std::hint::black_box;

fn bench_jacobi_batch(c: &mut Criterion) {
    let model = FinslerModel::hyperbolic(2).unwrap();
    let sp = SprayData::geodesic(&model);
    let mut group = c.benchmark_group("jacobi_flow_identity");
    for count in [64usize, 256] {
        let pts = model.sample(count, 42);
        group.bench_with_input(BenchmarkId::new("sequential", count), &pts, |b, pts| {
            b.iter(|| {
                let residuals = map_points_seq(pts, |p| {
                    let j = jacobi(&sp, p).unwrap();
                    let mut worst = 0.0f64;
                    for i in 0..2 {
                        let ry: f64 = (0..2).map(|k| j.r_ij[(i, k)] * p.y()[k]).sum();
                        worst = worst.max(ry.abs());
                    }
                    worst
                });
                black_box(residuals)
            })
        });
        group.bench_with_input(BenchmarkId::new("parallel", count), &pts, |b, pts| {
            b.iter(|| {
                let residuals = map_points(pts, |p| {
                    let j = jacobi(&sp, p).unwrap();
                    let mut worst = 0.0f64;
                    for i in 0..2 {
                        let ry: f64 = (0..2).map(|k| j.r_ij[(i, k)] * p.y()[k]).sum();
                        worst = worst.max(ry.abs());
                    }
                    worst
                });
                black_box(residuals)
            })
        });
    }
    group.finish();
}

fn bench_holonomy_batch(c: &mut Criterion) {
    let model = FinslerModel::euclidean(2).unwrap();
    let base = SprayData::geodesic(&model);
    let ctx = deform(&base, &ProjectiveFactor::lambda_f(1.0, &model));
    let pts = model.sample(8, 7);
    let mut group = c.benchmark_group("holonomy_closure");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let reports = map_points_seq(&pts, |p| {
                let span = holonomy_span(&ctx.deformed, p, 4, 1e-8).unwrap();
                liouville_test(&span, p).residual
            });
            black_box(reports)
        })
    });
    group.bench_function("parallel", |b| {
        b.iter(|| {
            let reports = map_points(&pts, |p| {
                let span = holonomy_span(&ctx.deformed, p, 4, 1e-8).unwrap();
                liouville_test(&span, p).residual
            });
            black_box(reports)
        })
    });
    group.finish();
}

criterion_group!(benches, bench_jacobi_batch, bench_holonomy_batch);
criterion_main!(benches);

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use fkq4::gffpredict::{b0_with_tolerance, gff_characteristic};
use fkq4::loops::extract_loops;
use fkq4::observables::{ArmProfile, Connectivity};
use fkq4::sampler::Chain;
use fkq4::{BoundarySpec, Domain, ModelParams, Scale, TestFunction};
use fkq4_bench::equilibrated;

fn sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("sw_sweep");
    for n in [32u32, 64, 128] {
        let d = Domain::new(n, Scale::UNIT).unwrap();
        let mut chain = Chain::new(&d, BoundarySpec::Wired, ModelParams::CRITICAL, 1, 0).unwrap();
        chain.run(50);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| chain.sweep()));
    }
    g.finish();
}

fn loops_and_labels(c: &mut Criterion) {
    let mut g = c.benchmark_group("measure");
    for n in [32u32, 64, 128] {
        let (d, cfg) = equilibrated(n, BoundarySpec::Wired, 2, 100).unwrap();
        g.bench_with_input(BenchmarkId::new("extract_loops", n), &cfg, |b, cfg| {
            b.iter(|| black_box(extract_loops(&d, cfg).len()))
        });
        g.bench_with_input(BenchmarkId::new("arm_profile", n), &cfg, |b, cfg| {
            b.iter(|| {
                let conn = Connectivity::compute(&d, cfg);
                black_box(ArmProfile::from_connectivity(&d, &conn))
            })
        });
    }
    g.finish();
}

fn quadrature(c: &mut Criterion) {
    c.bench_function("b0_tol_1e-10", |b| b.iter(|| b0_with_tolerance(black_box(1e-10)).unwrap()));
    let f = TestFunction::new(
        vec![(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)],
        vec![1, -1, -1, 1],
        0.125,
    )
    .unwrap();
    c.bench_function("gff_characteristic_four_ball", |b| {
        b.iter(|| gff_characteristic(black_box(&f)).unwrap().characteristic)
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = sweep, loops_and_labels, quadrature
}
criterion_main!(benches);

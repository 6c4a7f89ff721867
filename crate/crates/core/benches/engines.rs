use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lipcert::benchgen::{build_mnist_cnn, build_random_net, build_x2_net, build_xy_net, CnnModel, X2Variant, XyVariant};
use lipcert::bounds_conv::network_report;
use lipcert::bounds_dense::{brute_force_k, k1, k4};
use lipcert::lowering::Approach;
use lipcert::report::BoundConfig;
use lipcert::{Execution, NormKind};

const EXECS: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn subset_sums(c: &mut Criterion) {
    let x2 = build_x2_net(12, X2Variant::Symmetric).unwrap();
    let xy = build_xy_net(4, XyVariant::HatB);
    let mut g = c.benchmark_group("subset sums");
    g.sample_size(10);
    for (label, exec) in EXECS {
        let cfg = BoundConfig::dense().with_exec(exec);
        g.bench_with_input(BenchmarkId::new("x2-12 K1", label), &cfg, |b, cfg| {
            b.iter(|| k1(&x2, NormKind::Linf, cfg).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("x2-12 K4", label), &cfg, |b, cfg| {
            b.iter(|| k4(&x2, NormKind::Linf, cfg).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("xy-4 K4", label), &cfg, |b, cfg| {
            b.iter(|| k4(&xy, NormKind::Linf, cfg).unwrap())
        });
    }
    g.finish();
}

fn brute_force(c: &mut Criterion) {
    let net = build_random_net(&[8, 10, 6, 3], 0).unwrap();
    let mut g = c.benchmark_group("brute force");
    g.sample_size(10);
    for (label, exec) in EXECS {
        let cfg = BoundConfig::dense().with_exec(exec);
        g.bench_with_input(BenchmarkId::new("random 8-10-6-3", label), &cfg, |b, cfg| {
            b.iter(|| brute_force_k(&net, NormKind::Linf, cfg).unwrap())
        });
    }
    g.finish();
}

fn cnn_report(c: &mut Criterion) {
    let net = build_mnist_cnn(CnnModel::B, 0);
    let mut g = c.benchmark_group("cnn report");
    g.sample_size(10);
    for (label, exec) in EXECS {
        let cfg = BoundConfig::conv().with_exec(exec);
        g.bench_with_input(BenchmarkId::new("model B implicit", label), &cfg, |b, cfg| {
            b.iter(|| network_report(&net, Approach::Implicit, NormKind::Linf, false, cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, subset_sums, brute_force, cnn_report);
criterion_main!(benches);

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use offdiag_bench::{jacobi, ncpoly};
use offdiag_core::criteria::{sum_iteration_equivalence, series_test, PositiveSeq};
use offdiag_core::defect::solve_defect;
use offdiag_core::diagnostics::offdiag_norm_seq;
use offdiag_core::{classify, parse_ncpoly, ClassifyConfig, Eigentag, ProjectionLadder};

fn parsing(c: &mut Criterion) {
    c.bench_function("parse+compile (p^2 + q^4)^2", |b| {
        b.iter(|| offdiag_core::compile(&parse_ncpoly(black_box("(p^2 + q^4)^2"), 1).unwrap()).unwrap())
    });
}

fn block_norms(c: &mut Criterion) {
    let unit = ProjectionLadder::unit();
    let mut g = c.benchmark_group("offdiag_norm_seq");
    for (name, op) in [("pqp k=1", ncpoly("p*q*p", 1)), ("p1^2+q2^2 k=2", ncpoly("p1^2 + q2^2", 2))] {
        let levels = if op.k() == 1 { 500 } else { 30 };
        g.bench_with_input(BenchmarkId::from_parameter(name), &op, |b, op| b.iter(|| offdiag_norm_seq(op, &unit, levels).unwrap()));
    }
    g.finish();
}

fn defect(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_defect +i");
    g.sample_size(20);
    for (name, op) in [("jacobi n^2", jacobi("0", "n^2")), ("pqp", ncpoly("p*q*p", 1)), ("p^2-q^4", ncpoly("p^2 - q^4", 1))] {
        for n in [1000usize, 4000] {
            g.bench_with_input(BenchmarkId::new(name, n), &n, |b, &n| b.iter(|| solve_defect(&op, Eigentag::PlusI, n).unwrap()));
        }
    }
    g.finish();
}

fn series(c: &mut Criterion) {
    c.bench_function("series_test 1/n^2 N=1e5", |b| b.iter(|| series_test(|n| 1.0 / (n as f64).powi(2), black_box(100_000))));
    c.bench_function("sum_iteration_equivalence j^1.5", |b| b.iter(|| sum_iteration_equivalence(&PositiveSeq::power(1.5), black_box(100_000))));
}

fn classification(c: &mut Criterion) {
    let mut g = c.benchmark_group("classify");
    g.sample_size(10);
    let cfg = ClassifyConfig::default();
    let unit = ProjectionLadder::unit();
    for (name, op) in [("q", ncpoly("q", 1)), ("jacobi n^2", jacobi("0", "n^2"))] {
        g.bench_function(name, |b| b.iter(|| classify(&op, &unit, &[], &cfg).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, parsing, block_norms, defect, series, classification);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use specrange::classify::{classify, ClassifierParams};
use specrange::lattice::LatticeBox;
use specrange::numrange::compute_hull_with;
use specrange::operator::{assemble, AssemblyLimits, OperatorMatrix};
use specrange::par::Execution;
use specrange::potential::PotentialSpec;

fn operators() -> Vec<(&'static str, OperatorMatrix)> {
    let chain = LatticeBox::centered_1d(200).unwrap();
    let square = LatticeBox::centered_cube(2, 10).unwrap();
    let decay = PotentialSpec::decay_power(Complex64::new(0.3, 1.0), 1.5).unwrap();
    let random = PotentialSpec::seeded_random(1, square.clone(), (-1.0, 1.0), (0.0, 1.0)).unwrap();
    vec![
        ("chain_200", assemble(&chain, &decay, AssemblyLimits::default()).unwrap()),
        ("square_10x10", assemble(&square, &random, AssemblyLimits::default()).unwrap()),
    ]
}

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn hull(c: &mut Criterion) {
    let mut g = c.benchmark_group("hull_720");
    g.sample_size(10);
    for (name, a) in operators() {
        for (mode, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(mode, name), &a, |b, a| {
                b.iter(|| compute_hull_with(a, 720, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn classify_all(c: &mut Criterion) {
    let mut g = c.benchmark_group("classify");
    g.sample_size(10);
    for (name, a) in operators() {
        for (mode, exec) in MODES {
            let params = ClassifierParams {
                exec,
                ..ClassifierParams::default()
            };
            let h = compute_hull_with(&a, 720, exec).unwrap();
            g.bench_with_input(BenchmarkId::new(mode, name), &a, |b, a| {
                b.iter(|| classify(a, &h, &params).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, hull, classify_all);
criterion_main!(benches);

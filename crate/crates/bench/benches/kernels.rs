use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use slln_bench::noise_field;
use slln_core::lattice::ShellTable;
use slln_core::stable::{AxisOperator, ConvMethod};
use slln_core::{LfssConfig, Norm, PrefixSumTable, ScalingFunction, StableParams, Stream, ThreadBudget, ToeplitzWeights};

fn prefix_sums(c: &mut Criterion) {
    let mut g = c.benchmark_group("prefix");
    for side in [64usize, 256] {
        let field = noise_field(&[side, side], 1, 1.5, 1);
        g.throughput(Throughput::Elements((side * side) as u64));
        g.bench_with_input(BenchmarkId::new("build_2d", side), &field, |b, f| b.iter(|| PrefixSumTable::new(f)));
        let table = PrefixSumTable::new(&field);
        let hi = side as u64;
        g.bench_with_input(BenchmarkId::new("rect_query", side), &table, |b, t| {
            b.iter(|| t.rect_sum(black_box(&[3, 5]), black_box(&[hi - 8, hi - 6])).unwrap())
        });
    }
    g.finish();
}

fn shells(c: &mut Criterion) {
    let field = noise_field(&[65, 65], 0, 1.5, 2);
    c.bench_function("shell_table_l2_r64", |b| b.iter(|| ShellTable::new(&field, Norm::L2, 64).unwrap()));
}

fn stable_sampling(c: &mut Criterion) {
    let mut g = c.benchmark_group("sas");
    let mut buf = vec![0.0; 10_000];
    g.throughput(Throughput::Elements(buf.len() as u64));
    for alpha in [0.8, 1.0, 1.5, 2.0] {
        let p = StableParams::standard(alpha).unwrap();
        let mut rng = Stream::new(3, "bench/sas").rng();
        g.bench_function(BenchmarkId::from_parameter(alpha), |b| b.iter(|| p.fill(&mut rng, &mut buf)));
    }
    g.finish();
}

fn lfss(c: &mut Criterion) {
    let cfg = LfssConfig::new(vec![0.8], 1.5).unwrap();
    let noise = noise_field(&[1 << 16], 1, 1.5, 4);
    let mut g = c.benchmark_group("lfss_axis");
    g.sample_size(10);
    for (name, method) in [("direct", ConvMethod::Direct), ("fft", ConvMethod::Fft)] {
        let op = AxisOperator::with_method(&cfg, 0, 512, method).unwrap();
        let mut out = vec![0.0; op.outputs()];
        let input = &noise.values()[..op.cells()];
        g.bench_function(name, |b| b.iter(|| op.apply(input, &mut out)));
    }
    g.finish();

    let cfg2 = LfssConfig::new(vec![0.8, 0.7], 1.5).unwrap();
    let sim = slln_core::stable::LfssSimulator::new(&cfg2, &[64, 64]).unwrap();
    let threads = ThreadBudget::new(1);
    let stream = Stream::new(5, "bench/lfss");
    let mut g = c.benchmark_group("lfss_field");
    g.sample_size(10);
    g.bench_function("64x64", |b| b.iter(|| sim.simulate(&stream, &threads).unwrap()));
    g.finish();
}

fn toeplitz(c: &mut Criterion) {
    let w = ToeplitzWeights::new(vec![ScalingFunction::power(1.0); 2], 2).unwrap();
    let s = noise_field(&[65, 65], 0, 1.5, 6);
    c.bench_function("toeplitz_2d_65", |b| b.iter(|| w.transform(&s).unwrap()));
}

criterion_group!(benches, prefix_sums, shells, stable_sampling, lfss, toeplitz);
criterion_main!(benches);

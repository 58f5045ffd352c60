use criterion::{black_box, criterion_group, criterion_main, Criterion};
use macregions_bench::{helper_channel, quick_search, ternary_case};
use macregions_core::bounds::eval_outer_sc;
use macregions_core::fme;
use macregions_core::gaussian::{max_theta, GaussianParams};
use macregions_core::sim::{helper_law, run_block_markov, SimConfig};
use macregions_core::{compute_region, sum_capacity, BoundKind, RatePoint, SearchConfig};

fn corners(c: &mut Criterion) {
    let (ch, law) = ternary_case(1);
    c.bench_function("outer_sc_corner_ternary", |b| {
        b.iter(|| eval_outer_sc(black_box(&ch), black_box(&law)).unwrap())
    });
}

fn search(c: &mut Criterion) {
    let ch = helper_channel(0.1);
    let cfg = quick_search();
    let mut g = c.benchmark_group("search");
    g.sample_size(10);
    g.bench_function("inner_sc_region_helper", |b| {
        b.iter(|| compute_region(&ch, BoundKind::InnerSc, &cfg).unwrap())
    });
    let (tern, _) = ternary_case(2);
    g.bench_function("sum_capacity_ternary", |b| {
        b.iter(|| sum_capacity(&tern, &SearchConfig::default()).unwrap())
    });
    g.finish();
}

fn projection(c: &mut Criterion) {
    c.bench_function("fme_appendix_j", |b| b.iter(|| fme::run_builtin(black_box("appendixJ")).unwrap()));
}

fn gaussian(c: &mut Criterion) {
    let g = GaussianParams::new(0.5, 0.5, 1.0, 0.5).unwrap();
    c.bench_function("example4_golden_section", |b| b.iter(|| max_theta(black_box(&g), 0.0, 1.0).unwrap()));
}

fn simulation(c: &mut Criterion) {
    let ch = helper_channel(0.1);
    let cfg = SimConfig {
        trials: 20,
        ..SimConfig::new(8, helper_law(0.03).unwrap())
    };
    let mut g = c.benchmark_group("simulation");
    g.sample_size(10);
    g.bench_function("block_markov_n8_20_trials", |b| {
        b.iter(|| run_block_markov(&ch, RatePoint::new(0.0, 0.3), &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, corners, search, projection, gaussian, simulation);
criterion_main!(benches);

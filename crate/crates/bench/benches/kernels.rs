use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use semirandom::graph_adversary::{apply_adversary, assign_markings, count_precursors};
use semirandom::sbm::sample_precursor;
use semirandom::sdp::{build_objective, solve_sdp, LambdaRule, SolverOptions};
use semirandom::thresholds::{eps_star, majority_fn, MajorityModel};
use semirandom::tree_model::{sample_dist4, sample_leaf_census, CensusAdversary};
use semirandom::tree_reconstruct::recursive_majority;
use semirandom::{Birth, Mode, ModelParams};

fn graphs(c: &mut Criterion) {
    let p = ModelParams::new(2000, 3.0, 1.0, Mode::Assortative).unwrap();
    c.bench_function("sample_precursor n=2000", |b| b.iter(|| sample_precursor(black_box(&p), 7)));
    let g = assign_markings(&sample_precursor(&p, 7)).unwrap();
    c.bench_function("apply_adversary n=2000", |b| b.iter(|| apply_adversary(black_box(&g), &p, 1).unwrap()));
    let post = apply_adversary(&g, &p, 1).unwrap().graph;
    c.bench_function("count_precursors n=2000", |b| b.iter(|| count_precursors(black_box(&post), Mode::Assortative)));
}

fn trees(c: &mut Criterion) {
    c.bench_function("leaf census poisson(3) depth 10", |b| {
        b.iter(|| sample_leaf_census(Birth::Poisson(3.0), 0.1, 10, CensusAdversary::Cutting, black_box(3)).unwrap())
    });
    let t = sample_dist4(3.0, 0.2, 8, 5).unwrap();
    c.bench_function("dist4 depth 8", |b| b.iter(|| sample_dist4(3.0, 0.2, 8, black_box(5)).unwrap()));
    c.bench_function("recursive majority", |b| b.iter(|| recursive_majority(black_box(&t), 1)));
}

fn numerics(c: &mut Criterion) {
    c.bench_function("majority_fn k=101", |b| b.iter(|| majority_fn(101, black_box(0.55))));
    c.bench_function("eps_star k=11", |b| b.iter(|| eps_star(black_box(11.0), MajorityModel::Regular).unwrap()));
}

fn sdp(c: &mut Criterion) {
    let mut group = c.benchmark_group("sdp");
    group.sample_size(10);
    for (n, a, b) in [(60, 20.0, 2.0), (200, 20.0, 2.0)] {
        let p = ModelParams::new(n, a, b, Mode::Assortative).unwrap();
        let inst = build_objective(&sample_precursor(&p, 1), LambdaRule::Model { a, b }, Mode::Assortative).unwrap();
        group.bench_function(format!("solve n={n}"), |bch| {
            bch.iter(|| solve_sdp(black_box(&inst), &SolverOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, graphs, trees, numerics, sdp);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use metarisk::fano::{exact_task_mi, greedy_packing, DiscreteMeta, Scheme};
use metarisk::model::{sample_environment, sample_observations};
use metarisk::posterior::PosteriorPlan;
use metarisk::risk::{exact_risk, mc_risk};
use metarisk::{DesignKind, Environment, EnvironmentSpec, HyperPrior, SolvePath};

fn environment(d: usize, m: usize, n: usize, k: usize) -> Environment {
    let prior = HyperPrior::new((0..d).map(|i| 0.1 * i as f64).collect(), 0.1).unwrap();
    let spec = EnvironmentSpec {
        m,
        n,
        k,
        noise_sq_source: 0.05,
        noise_sq_novel: 1.0,
        design: DesignKind::Gaussian,
        clip_to_unit_ball: false,
    };
    sample_environment(&prior, &spec, 11).unwrap()
}

fn risk(c: &mut Criterion) {
    let mut g = c.benchmark_group("exact_risk");
    for &(d, m, n, k) in &[(7, 10, 20, 10), (7, 100, 20, 10), (20, 50, 40, 40)] {
        let env = environment(d, m, n, k);
        g.bench_with_input(BenchmarkId::from_parameter(format!("d{d}_M{m}_n{n}_k{k}")), &env, |b, env| {
            b.iter(|| exact_risk(black_box(env)).unwrap())
        });
    }
    g.finish();

    let env = environment(7, 10, 20, 10);
    c.bench_function("mc_risk/1000_reps", |b| b.iter(|| mc_risk(black_box(&env), 1000, 5).unwrap()));
}

fn posterior(c: &mut Criterion) {
    let env = environment(7, 50, 20, 10);
    let obs = sample_observations(&env, 2);
    let mut g = c.benchmark_group("posterior_plan");
    for (name, path) in [("canonical", SolvePath::Canonical), ("woodbury", SolvePath::Woodbury)] {
        g.bench_function(name, |b| b.iter(|| PosteriorPlan::new(black_box(&env), path).unwrap()));
    }
    g.finish();
    let plan = PosteriorPlan::new(&env, SolvePath::Canonical).unwrap();
    c.bench_function("posterior_plan/map_estimate", |b| b.iter(|| plan.map_estimate(black_box(&obs))));
}

fn information(c: &mut Criterion) {
    let dists = vec![vec![0.5, 0.3, 0.2], vec![0.2, 0.5, 0.3], vec![0.3, 0.2, 0.5]];
    let mut g = c.benchmark_group("exact_task_mi");
    for &(m, n, k) in &[(1, 2, 2), (2, 3, 4)] {
        let dm = DiscreteMeta::new(dists.clone(), m, n, k, Scheme::Product).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(format!("M{m}_n{n}_k{k}")), &dm, |b, dm| {
            b.iter(|| exact_task_mi(black_box(dm)).unwrap())
        });
    }
    g.finish();
}

fn packing(c: &mut Criterion) {
    let mut g = c.benchmark_group("greedy_packing");
    g.sample_size(10);
    for d in [2usize, 4] {
        g.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, &d| {
            b.iter(|| greedy_packing(d, 0.25, 10_000, 1).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, risk, posterior, information, packing);
criterion_main!(benches);

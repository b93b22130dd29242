//! Sequential against parallel execution on the per-stratum and per-target sweeps.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use latentid::bounds::{
    build_program_with, lp_bounds_both, stratified_bounds_with, Convention, Proxies, ResponseModel, Stratum, Target,
};
use latentid::exec::Execution;
use latentid::identify::{identify_joint_with, IdentifyOptions};
use latentid::latent::{generate_latent_model, proxy_design, random_spec, SyntheticConfig};
use latentid::lp::enumerate_vertices_with;
use latentid::rational::ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn identification(c: &mut Criterion) {
    let mut group = c.benchmark_group("identify_joint");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (k, strata) in [(3, 8), (5, 16)] {
        let spec = random_spec(&SyntheticConfig::new(k, strata), &mut rng).unwrap();
        let (_, obs) = generate_latent_model(&spec).unwrap();
        let obs = obs.to_f64();
        let design = proxy_design(&spec);
        for (name, exec) in MODES {
            let opts = IdentifyOptions { exec, ..Default::default() };
            group.bench_with_input(BenchmarkId::new(name, format!("k{k}_z{strata}")), &opts, |b, opts| {
                b.iter(|| identify_joint_with(black_box(&obs), &design, opts).unwrap())
            });
        }
    }
    group.finish();
}

fn bounds(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = ResponseModel::random(true, 40, &mut rng).observables();
    let mut group = c.benchmark_group("lp_bounds_both");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "monotone"), |b| {
            b.iter(|| lp_bounds_both(black_box(&p), true, Proxies::Both, exec).unwrap())
        });
    }
    group.finish();

    let n = 8;
    let strata: Vec<Stratum> = (0..n)
        .map(|i| Stratum {
            z: vec![format!("z{i}")],
            weight: ratio(1, n),
            table: ResponseModel::random(false, 40, &mut rng).observables(),
        })
        .collect();
    assert!(strata.iter().all(|s| s.table.convention == Convention::Conditional));
    let mut group = c.benchmark_group("stratified_unrestricted");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, format!("z{n}")), |b| {
            b.iter(|| stratified_bounds_with(black_box(&strata), false, exec).unwrap())
        });
    }
    group.finish();
}

fn enumeration(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = ResponseModel::random(true, 40, &mut rng).observables();
    let prog = build_program_with(&p, true, Target::X1, Proxies::T).unwrap();
    let mut group = c.benchmark_group("enumerate_vertices");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "single_proxy_monotone"), |b| {
            b.iter(|| enumerate_vertices_with(black_box(&prog.lp.eq), prog.lp.n, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, identification, bounds, enumeration);
criterion_main!(benches);

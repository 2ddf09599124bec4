use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use lilklucb_bench::parametric_env;
use lilklucb_core::{lil_klucb, ucb_race, BoundScheme, Prob, SchemeKind};

fn identification(c: &mut Criterion) {
    let mut group = c.benchmark_group("lil_klucb");
    group.sample_size(20);
    let means: Vec<Prob> = [0.8, 0.6, 0.4, 0.2].iter().map(|&m| Prob::new(m).unwrap()).collect();
    let env = lilklucb_core::Environment::bernoulli(&means, 0).unwrap();
    for kind in [SchemeKind::KlTilted, SchemeKind::KlPrime, SchemeKind::Sg1] {
        let scheme = BoundScheme::new(kind, 8, 0.05).unwrap();
        group.bench_with_input(BenchmarkId::new("four_arms", kind), &scheme, |b, s| {
            let mut seed = 0;
            b.iter(|| {
                seed += 1;
                lil_klucb(&env, s, None, seed).unwrap().total_samples
            })
        });
    }
    group.finish();
}

fn race(c: &mut Criterion) {
    let mut group = c.benchmark_group("ucb_race");
    group.sample_size(10);
    let env = parametric_env(200, 1.0);
    for kind in [SchemeKind::KlTilted, SchemeKind::Sg1] {
        let scheme = BoundScheme::new(kind, 8, 0.01).unwrap();
        group.bench_with_input(BenchmarkId::new("n200_budget20k", kind), &scheme, |b, s| {
            b.iter(|| ucb_race(&env, s, 20_000, 400, 5, 7).unwrap().total_samples)
        });
    }
    group.finish();
}

criterion_group!(benches, identification, race);
criterion_main!(benches);

use std::collections::BTreeSet;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use upsilon_bench::{fixtures, random_parameter_table, random_urelation};
use upsilon_core::{
    conf, encode_fds, fold_fds, parse_descriptor, posterior, synthesize_4c, total_causal_mapping, u_factorize,
    OdeModel,
};

fn hypothesis_pipeline(c: &mut Criterion) {
    let xml = std::fs::read(fixtures().join("hypotheses/lotka_volterra.xml")).unwrap();
    let index = BTreeSet::from(["t".to_string()]);
    c.bench_function("descriptor to schema", |b| {
        b.iter(|| {
            let s = parse_descriptor(black_box(&xml)).unwrap();
            let m = total_causal_mapping(&s).unwrap();
            let folded = fold_fds(&encode_fds(&s, &m).unwrap());
            synthesize_4c(&folded, s.hypothesis_id, &index).unwrap()
        })
    });
}

fn factorization(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tables: Vec<_> = (0..64).map(|_| random_parameter_table(&mut rng, 8, 24)).collect();
    c.bench_function("u-factorize 64 tables", |b| {
        b.iter(|| tables.iter().map(|(a, r)| u_factorize(a, r).unwrap().len()).sum::<usize>())
    });
}

fn confidence(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cases: Vec<_> = (0..64).map(|_| random_urelation(&mut rng, 6, 3, 12)).collect();
    c.bench_function("conf 64 u-relations", |b| {
        b.iter(|| cases.iter().map(|(w, t)| conf(t, w).unwrap().len()).sum::<usize>())
    });
}

fn simulation(c: &mut Criterion) {
    let text = std::fs::read_to_string(fixtures().join("models/lynx/lotka_volterra_6.json")).unwrap();
    let m = OdeModel::from_json(&text).unwrap();
    c.bench_function("rk4 predator-prey 20 years", |b| b.iter(|| black_box(&m).simulate().unwrap()));
}

fn conditioning(c: &mut Criterion) {
    let obs: Vec<f64> = (0..21).map(|i| 10.0 + i as f64).collect();
    let trials: Vec<(f64, Vec<f64>)> =
        (0..10).map(|k| (0.1, obs.iter().map(|y| y + k as f64 * 0.5).collect())).collect();
    c.bench_function("posterior 10 trials x 21 samples", |b| b.iter(|| posterior(black_box(&trials), &obs, 5.0).unwrap()));
}

criterion_group!(benches, hypothesis_pipeline, factorization, confidence, simulation, conditioning);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spherepp::models::spectrum_from_model;
use spherepp::simulate::{sample_projection, select_eigenfunctions, sim_dpp, sim_gaussian_field, GaussianFieldSpec};
use spherepp::ModelSpec;

fn most_repulsive(c: &mut Criterion) {
    let mut group = c.benchmark_group("sim_dpp/most_repulsive");
    group.sample_size(10);
    for m in [4usize, 9, 14, 19] {
        let spectrum = spectrum_from_model(&ModelSpec::MostRepulsive { m }, m).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter((m + 1) * (m + 1)), &spectrum, |b, s| {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            b.iter(|| sim_dpp(black_box(s), &mut rng).unwrap())
        });
    }
    group.finish();
}

fn multiquadric(c: &mut Criterion) {
    let spec = ModelSpec::Multiquadric { tau: 10.0, delta: 0.68, eta: 225.0 };
    let spectrum = spectrum_from_model(&spec, 200).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let selection = select_eigenfunctions(&spectrum, &mut rng).unwrap();
    let mut group = c.benchmark_group("sim_dpp/multiquadric");
    group.sample_size(10);
    group.bench_function("select", |b| b.iter(|| select_eigenfunctions(black_box(&spectrum), &mut rng).unwrap()));
    group.bench_function("project", |b| b.iter(|| sample_projection(black_box(&selection), &mut rng).unwrap()));
    group.finish();
}

fn gaussian_field(c: &mut Criterion) {
    let spec = GaussianFieldSpec::multiquadric(8.0, 1.0, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    c.bench_function("sim_gaussian_field", |b| b.iter(|| sim_gaussian_field(black_box(&spec), &mut rng)));
}

criterion_group!(benches, most_repulsive, multiquadric, gaussian_field);
criterion_main!(benches);

//! Throughput of the data-parallel stages on a single-thread pool versus the
//! default pool. Build with `--no-default-features` to measure the
//! sequential fallback instead; both pools then run the same loop.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gliaskel::phantom::{generate, PhantomSpec};
use gliaskel::temporal::{frame_objective, morph_skeleton, MorphConfig, SeriesOptions};
use gliaskel::vesselness::vesselness_response;
use rayon::ThreadPool;

fn pools() -> Vec<(String, ThreadPool)> {
    let default = rayon::ThreadPoolBuilder::new().build().unwrap();
    let n = default.current_num_threads();
    vec![
        (
            "1 thread".to_string(),
            rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap(),
        ),
        (format!("default pool ({n})"), default),
    ]
}

fn spec() -> PhantomSpec {
    PhantomSpec {
        seed: 11,
        noise_sigma: 0.05,
        ..PhantomSpec::default()
    }
}

fn bench_vesselness(c: &mut Criterion) {
    let image = generate(&spec()).unwrap().image;
    let mut g = c.benchmark_group("vesselness_64cubed_4_scales");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(&name), &pool, |b, pool| {
            b.iter(|| pool.install(|| vesselness_response(&image, &[1.0, 2.0, 3.0, 4.0]).unwrap()))
        });
    }
    g.finish();
}

fn bench_phantom(c: &mut Criterion) {
    let spec = spec();
    let mut g = c.benchmark_group("phantom_64cubed");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::from_parameter(&name), &pool, |b, pool| {
            b.iter(|| pool.install(|| generate(&spec).unwrap()))
        });
    }
    g.finish();
}

fn bench_morph(c: &mut Criterion) {
    let p = generate(&spec()).unwrap();
    let iv = frame_objective(&p.image, &SeriesOptions::default()).unwrap();
    let cfg = MorphConfig::default();
    let mut g = c.benchmark_group("morph");
    g.sample_size(10);
    g.bench_function("one_frame_64cubed", |b| {
        b.iter(|| morph_skeleton(&p.skeleton, &iv, &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, bench_vesselness, bench_phantom, bench_morph);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scfind_tuner::cube::{generate_cube, SkyConfig};
use scfind_tuner::finder::{FinderConfig, PreparedCube};
use scfind_tuner::forest::{ForestConfig, RandomForest};

fn pools() -> Vec<(&'static str, Option<rayon::ThreadPool>)> {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool");
    vec![("sequential", Some(single)), ("parallel", None)]
}

fn run<R>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R
where
    R: Send,
{
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

fn prepare(c: &mut Criterion) {
    let sky = SkyConfig { dims: [64, 64, 128], n_sources: 15, ..SkyConfig::default() };
    let patch = generate_cube(&sky).expect("cube");
    let cfg = FinderConfig::default();
    let mut group = c.benchmark_group("prepare_cube");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(name, |b| b.iter(|| run(&pool, || PreparedCube::new(&patch.cube, &cfg).expect("prepare"))));
    }
    group.finish();
}

fn forest(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Array2::from_shape_simple_fn((2000, 4), || rng.random_range(0.0..1.0));
    let y: Vec<f64> = x.rows().into_iter().map(|r| r[0] * 2.0 + r[1] * r[2]).collect();
    let mut group = c.benchmark_group("forest_fit");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(name, |b| {
            b.iter(|| {
                run(&pool, || {
                    let mut f = RandomForest::new(ForestConfig::default()).expect("config");
                    f.fit(&x, &y).expect("fit");
                    f
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, prepare, forest);
criterion_main!(benches);

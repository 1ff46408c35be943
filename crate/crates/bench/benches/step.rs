use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lazy_sgld::ntk;
use lazy_sgld::sgld::{em_step, sgd_step, SgldConfig};
use lazy_sgld_bench::fixture;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for (m, n) in [(50, 50), (200, 200)] {
        let f = fixture(m, n);
        let cfg = SgldConfig { alpha: 8.0, ..f.config.sgld.clone() };
        let label = format!("m{m}_n{n}");
        group.bench_function(BenchmarkId::new("euler_maruyama", &label), |b| {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut w = f.student.origin.clone();
            b.iter(|| {
                w = em_step(&w, &*f.student.model, &f.data, &cfg, &mut rng, 0).expect("finite step");
            })
        });
        group.bench_function(BenchmarkId::new("sgd", &label), |b| {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut w = f.student.origin.clone();
            b.iter(|| {
                w = sgd_step(&w, &*f.student.model, &f.data, &cfg, &mut rng, 0).expect("finite step");
            })
        });
    }
    group.finish();
}

fn kernel(c: &mut Criterion) {
    let mut group = c.benchmark_group("ntk");
    group.sample_size(20);
    for (m, n) in [(50, 50), (200, 200)] {
        let f = fixture(m, n);
        let label = format!("m{m}_n{n}");
        group.bench_function(BenchmarkId::new("jacobian", &label), |b| {
            b.iter(|| f.student.model.jacobian(&f.student.origin, &f.data).expect("jacobian"))
        });
        group.bench_function(BenchmarkId::new("gram_min_eigenvalue", &label), |b| {
            b.iter(|| {
                ntk::model_gram(&*f.student.model, &f.student.origin, &f.data)
                    .expect("gram")
                    .min_eigenvalue()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, steps, kernel);
criterion_main!(benches);

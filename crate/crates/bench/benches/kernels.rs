use std::hint::black_box;

use anosov_core::exterior::{random_form, random_spd};
use anosov_core::forms::{random_field, random_point};
use anosov_core::{
    canonical_alpha, hodge_star, is_asymmetric, l2_inner, solve, volume_form, QuadratureSpec, SolverOptions,
    SuspensionFlow, TangentVector,
};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn algebra(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = random_spd(&mut rng, 6);
    let a = random_form(&mut rng, 6, 3);
    let b = random_form(&mut rng, 6, 2);
    c.bench_function("wedge_3_2_n6", |bch| bch.iter(|| black_box(&a).wedge(black_box(&b)).unwrap()));
    c.bench_function("hodge_star_3_n6", |bch| bch.iter(|| hodge_star(black_box(&a), &m).unwrap()));
}

fn flow(c: &mut Criterion) {
    let f = SuspensionFlow::default_model();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = random_point(&f, &mut rng);
    let v = TangentVector::new(p.clone(), &[0.3, -0.2, 0.5], 0.1).unwrap();
    c.bench_function("flow_t37", |bch| bch.iter(|| f.flow(black_box(&p), 37.3)));
    c.bench_function("tangent_flow_t37", |bch| bch.iter(|| f.tangent_flow(black_box(&v), 37.3)));
}

fn l2(c: &mut Criterion) {
    let f = SuspensionFlow::default_model();
    let metric = f.anosov_metric();
    let spec = QuadratureSpec::lattice(4099, 0, 8);
    let (alpha, omega) = (canonical_alpha(&f), volume_form(&f));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = random_field(&f, &mut rng, 2, 4);
    let mut g = c.benchmark_group("l2_inner_4099x8");
    g.sample_size(10);
    g.bench_function("alpha", |bch| bch.iter(|| l2_inner(&f, &alpha, &alpha, &metric, &spec).unwrap()));
    g.bench_function("volume", |bch| bch.iter(|| l2_inner(&f, &omega, &omega, &metric, &spec).unwrap()));
    g.bench_function("random_2_form", |bch| bch.iter(|| l2_inner(&f, &w, &w, &metric, &spec).unwrap()));
    g.finish();
}

fn livsic(c: &mut Criterion) {
    let f = SuspensionFlow::default_model();
    let rates = is_asymmetric(&f, 8, 0.01, 3).unwrap().solver_rates;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let xi = random_field(&f, &mut rng, 2, 4);
    let p = random_point(&f, &mut rng);
    let vs: Vec<TangentVector> = (0..2)
        .map(|_| f.from_eigen(p.clone(), &[0; 4].map(|_: i32| rng.random_range(-1.0..1.0))))
        .collect();
    let mut g = c.benchmark_group("livsic_solve");
    g.sample_size(10);
    for tol in [1e-6, 1e-8] {
        let opts = SolverOptions::with_tol(tol);
        g.bench_function(format!("tol_{tol:e}"), |bch| bch.iter(|| solve(&f, &xi, &p, &vs, Some(&rates), &opts).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, algebra, flow, l2, livsic);
criterion_main!(benches);

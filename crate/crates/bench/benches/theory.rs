use criterion::{criterion_group, criterion_main, Criterion};
use drc_core::perturb::{ConfusionMatrix, Discretization};
use drc_core::rng::{RunRng, Stream};
use drc_core::theory::{default_true_rewards, min_cross_entropy_curve, reconstruction_error_curve};

fn theory(c: &mut Criterion) {
    let d = Discretization::new(0.0, 1.0, 10).unwrap();
    let m = ConfusionMatrix::uniform(10, 0.4).unwrap();
    let cands: Vec<usize> = (1..=50).collect();
    c.bench_function("ce_curve_n10_50pts", |b| {
        b.iter(|| min_cross_entropy_curve(&d, &m, 0.35, &cands).unwrap())
    });
    let rs = default_true_rewards(&d, 100, &mut RunRng::new(0).stream(Stream::Data));
    c.bench_function("recon_curve_n10_1000r_50pts", |b| {
        b.iter(|| reconstruction_error_curve(&d, &m, &rs, &cands).unwrap())
    });
}

criterion_group!(benches, theory);
criterion_main!(benches);

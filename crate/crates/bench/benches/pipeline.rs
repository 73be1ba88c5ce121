use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use tlroa_core::lyap::{build_seed, solve_lyapunov_2x2, DEFAULT_SEED_SEMI_AXIS};
use tlroa_core::ode::{integrate_forward, IntegratorConfig};
use tlroa_core::roa::estimate_tlroa;
use tlroa_core::sampler::{LossKind, SamplerConfig};
use tlroa_core::{rhs, Mat2, SatMode, Scenario, State};

fn bench_rhs(c: &mut Criterion) {
    let sc = Scenario::study_case();
    let t = sc.t_ramp_end() + 1.0;
    c.bench_function("rhs_eval", |b| {
        b.iter(|| rhs(black_box(t), black_box(State::new(0.7, 3.0)), &sc, SatMode::None).unwrap())
    });
    c.bench_function("rhs_eval_smooth_sat", |b| {
        b.iter(|| rhs(black_box(t), black_box(State::new(0.7, 3.0)), &sc, SatMode::Smooth).unwrap())
    });
}

fn bench_integration(c: &mut Criterion) {
    let sc = Scenario::study_case().post_fault();
    let cfg = IntegratorConfig::default();
    c.bench_function("integrate_1s_post_fault", |b| {
        b.iter(|| {
            integrate_forward(
                black_box(State::new(0.8, 5.0)),
                0.0,
                1.0,
                &sc,
                &cfg,
                None,
                None,
            )
            .unwrap()
        })
    });
}

fn bench_lyapunov(c: &mut Criterion) {
    let a = Mat2::new(0.0, 1.0, -820.0, -12.8);
    c.bench_function("lyapunov_solve_2x2", |b| {
        b.iter(|| solve_lyapunov_2x2(black_box(&a), &Mat2::identity()).unwrap())
    });
}

fn bench_tlroa(c: &mut Criterion) {
    let sc = Scenario::study_case();
    let cfg = IntegratorConfig::default();
    let seed = build_seed(&sc, DEFAULT_SEED_SEMI_AXIS, 8, &cfg).unwrap();
    let sampler = SamplerConfig {
        loss_kind: LossKind::Curvature,
        loss_goal: 0.08,
        n_min: 16,
        n_max: 64,
        batch_width: 4,
    };
    let mut group = c.benchmark_group("tlroa");
    group.sample_size(10);
    group.bench_function("estimate_small", |b| {
        b.iter(|| estimate_tlroa(&sc, &seed, black_box(0.3), &sampler, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_rhs, bench_integration, bench_lyapunov, bench_tlroa);
criterion_main!(benches);

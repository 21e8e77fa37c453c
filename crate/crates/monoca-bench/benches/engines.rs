use criterion::{black_box, criterion_group, criterion_main, Criterion};
use monoca_core::forcing::minimal_forcing_sets;
use monoca_core::noise::{density_zero, run_noisy_trial, Boundary, NoiseModel, SimConfig};
use monoca_core::polygon::{build_level_data, construct_system, verify_system};
use monoca_core::rule::{Configuration, LocalRule};
use monoca_core::step::{rate_table, RateParams};

fn bench_rate_table(c: &mut Criterion) {
    let galperin3 = LocalRule::builtin("galperin3", None).unwrap();
    let wrapped4 = LocalRule::builtin("wrapped4", None).unwrap();
    let params = RateParams::default();
    c.bench_function("rate_table/galperin3", |b| {
        b.iter(|| rate_table(black_box(&galperin3), black_box(&params)).unwrap())
    });
    c.bench_function("rate_table/wrapped4", |b| {
        b.iter(|| rate_table(black_box(&wrapped4), black_box(&params)).unwrap())
    });
}

fn bench_noisy_sim(c: &mut Criterion) {
    let rule = LocalRule::builtin("min2", None).unwrap();
    let model = NoiseModel::independent_max(1, 0.05);
    let config = SimConfig {
        width: 256,
        boundary: Boundary::Periodic,
        horizon: 200,
        seed: 42,
        trials: 8,
    };
    c.bench_function("density_zero/min2_256x200x8", |b| {
        b.iter(|| density_zero(black_box(&rule), black_box(&model), black_box(&config)).unwrap())
    });
}

fn bench_forcing(c: &mut Criterion) {
    let rule = LocalRule::builtin("galperin3", None).unwrap();
    c.bench_function("forcing/galperin3_0_2_k6", |b| {
        b.iter(|| minimal_forcing_sets(black_box(&rule), 0, 2, black_box(6), 1 << 22).unwrap())
    });
}

fn bench_polygon(c: &mut Criterion) {
    let rule = LocalRule::builtin("min2", None).unwrap();
    let data = build_level_data(&rule, &[0, 1], 1 << 16).unwrap();
    let config = SimConfig {
        width: 160,
        boundary: Boundary::FixedQuiescent(0),
        horizon: 40,
        seed: 73,
        trials: 1,
    };
    let model = NoiseModel::independent_max(1, 0.1);
    let initial = Configuration::constant(0, -80, 79);
    let traj = run_noisy_trial(&rule, &model, &config, &initial, 0).unwrap();
    let t = traj.horizon as i64;
    let center = traj.width as i64 / 2;
    let root = (t..traj.width as i64 - t)
        .filter(|&i| traj.rows[traj.horizon][i as usize] != 0)
        .min_by_key(|&i| ((i - center).abs(), i))
        .map(|i| (i, t))
        .expect("trajectory leaves a nonzero cone-safe root");
    c.bench_function("polygon/construct_verify_min2_160x40", |b| {
        b.iter(|| {
            let system =
                construct_system(black_box(&rule), black_box(&data), black_box(&traj), root)
                    .unwrap();
            verify_system(&system, &traj, &data)
        })
    });
}

criterion_group!(
    benches,
    bench_rate_table,
    bench_noisy_sim,
    bench_forcing,
    bench_polygon
);
criterion_main!(benches);

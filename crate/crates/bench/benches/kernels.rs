//! Hot paths: one smoothed-step evaluation, one per-ε solve through both
//! layers of the circle field, and one growth fit.

use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use genflow_core::flow::{solve_ivp, IvpConfig};
use genflow_core::{
    build_bump, classify_growth, marsden_field, smoothed_heaviside, BumpCase, EpsilonNet, Point, ScalingLaw,
    SmoothedStep,
};

fn net() -> EpsilonNet {
    EpsilonNet::geometric(1e-2, 1e-8, 7, ScalingLaw::InverseLog).unwrap()
}

fn bench_smoothed_heaviside(c: &mut Criterion) {
    let mut g = c.benchmark_group("smoothed_heaviside");
    for case in [BumpCase::SymmetricA, BumpCase::RightB] {
        let step = SmoothedStep::new(build_bump(case, false).unwrap(), 0.05).unwrap();
        let xs: Vec<f64> = (0..1024).map(|k| -0.1 + 0.2 * k as f64 / 1023.0).collect();
        g.bench_with_input(BenchmarkId::from_parameter(case.tag()), &xs, |b, xs| {
            b.iter(|| xs.iter().map(|x| smoothed_heaviside(&step, black_box(*x))).sum::<f64>())
        });
    }
    g.finish();
}

fn bench_solve_ivp(c: &mut Criterion) {
    let f = marsden_field(BumpCase::SymmetricA, &net()).unwrap();
    let mut g = c.benchmark_group("solve_ivp");
    g.sample_size(20);
    for tol in [1e-6, 1e-9] {
        let cfg = IvpConfig::uniform(0.0, -PI, PI, PI / 20.0, tol).unwrap();
        let p0 = Point::angle(-1.2);
        g.bench_with_input(BenchmarkId::new("marsden", format!("tol={tol:e}")), &cfg, |b, cfg| {
            b.iter(|| solve_ivp(&f, 1e-8, black_box(&p0), cfg).unwrap())
        });
    }
    g.finish();
}

fn bench_classify_growth(c: &mut Criterion) {
    let eps = net().values().to_vec();
    let series: Vec<(&str, Vec<(f64, f64)>)> = vec![
        ("log", eps.iter().map(|e| (*e, 1.0 + 0.5 * e.ln().abs())).collect()),
        ("power", eps.iter().map(|e| (*e, 2.0 * e.powf(-3.0))).collect()),
        ("bounded", eps.iter().map(|e| (*e, 1.0 + e)).collect()),
    ];
    let mut g = c.benchmark_group("classify_growth");
    for (name, s) in &series {
        g.bench_with_input(BenchmarkId::from_parameter(name), s, |b, s| b.iter(|| classify_growth(black_box(s)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bench_smoothed_heaviside, bench_solve_ivp, bench_classify_growth);
criterion_main!(benches);

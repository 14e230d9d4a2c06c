use std::hint::black_box;

use canard_core::canard::maximal_canards;
use canard_core::hybrid::integrate;
use canard_core::mmo::{demo_system, find_periodic_mmo, MmoOptions};
use canard_core::model::{build_global_return, build_minimal_3d};
use canard_core::planar::{arima, find_cycle};
use canard_core::zoneflow::ZoneFlow;
use canard_core::{Params, State};
use criterion::{criterion_group, criterion_main, Criterion};

fn base_node() -> Params {
    Params::new(1.0, -1.0, 0.2, 0.01)
}

fn zone_flow(c: &mut Criterion) {
    let spec = build_minimal_3d(base_node()).unwrap();
    let s = State::new(0.1, 0.01, -0.1);
    c.bench_function("zone_flow/central_expm", |b| {
        b.iter(|| ZoneFlow::from_spec(&spec, spec.central_zone()).flow(black_box(&s), black_box(12.5)))
    });
}

fn hybrid(c: &mut Criterion) {
    let spec = build_minimal_3d(base_node()).unwrap();
    let s = State::new(-0.6, 0.6 - base_node().delta, -0.05);
    c.bench_function("integrate/minimal_1000", |b| b.iter(|| integrate(&spec, black_box(&s), 1000.0).unwrap()));
}

fn canards(c: &mut Criterion) {
    let p = Params::new(1.0, -1.0, 0.22, 1e-3);
    c.bench_function("canards/folded_node_eps1e-3", |b| b.iter(|| maximal_canards(black_box(&p)).unwrap()));
}

fn periodic_mmo(c: &mut Criterion) {
    let (p, ret, seed) = demo_system();
    let spec = build_global_return(p, ret).unwrap();
    let mut g = c.benchmark_group("mmo");
    g.sample_size(10);
    g.bench_function("demo_orbit", |b| b.iter(|| find_periodic_mmo(&spec, &seed, &MmoOptions::default()).unwrap()));
    g.finish();
}

fn planar(c: &mut Criterion) {
    let system = arima(-0.02, 0.1);
    let mut g = c.benchmark_group("planar");
    g.sample_size(10);
    g.bench_function("arima_cycle", |b| b.iter(|| find_cycle(black_box(&system)).unwrap()));
    g.finish();
}

criterion_group!(benches, zone_flow, hybrid, canards, periodic_mmo, planar);
criterion_main!(benches);

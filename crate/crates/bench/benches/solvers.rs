use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use gridtd_bench::{fixture, short_fault};
use gridtd_core::cosim::{iterate_td_powerflow, run_transient_scenario, TdOptions, TransientOptions};
use gridtd_core::powerflow::{solve_feeder_pf, solve_transmission_pf};

fn newton(c: &mut Criterion) {
    let (net, _) = fixture();
    c.bench_function("newton_t23like", |b| {
        b.iter(|| solve_transmission_pf(black_box(&net), 1e-8, 20).unwrap())
    });
}

fn sweep(c: &mut Criterion) {
    let (net, _) = fixture();
    let feeder = &net.feeders[0];
    c.bench_function("sweep_feeder", |b| {
        b.iter(|| solve_feeder_pf(black_box(feeder), 1.0, 0.0, 1e-8, 50).unwrap())
    });
}

fn td(c: &mut Criterion) {
    let (net, inj) = fixture();
    let opts = TdOptions::default();
    c.bench_function("td_powerflow", |b| {
        b.iter(|| iterate_td_powerflow(black_box(&net), &inj, &opts).unwrap())
    });
}

fn transient(c: &mut Criterion) {
    let (net, inj) = fixture();
    let spec = short_fault(&net);
    let opts = TransientOptions::default();
    let mut group = c.benchmark_group("transient");
    group.sample_size(10);
    group.bench_function("bus_fault_0.5s", |b| {
        b.iter(|| run_transient_scenario(black_box(&net), &spec, &inj, &opts).unwrap())
    });
    group.finish();
}

criterion_group!(benches, newton, sweep, td, transient);
criterion_main!(benches);

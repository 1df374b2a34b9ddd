use std::f64::consts::FRAC_PI_3;

use criterion::{criterion_group, criterion_main, Criterion};
use vacphase::evolution::{evolve, EvolveOptions};
use vacphase::{build_fock_system, phase_kernel, Helicity};
use vacphase_bench::coil;

fn bench_kernel(c: &mut Criterion) {
    let traj = coil(FRAC_PI_3, 4096);
    c.bench_function("phase_kernel/4096", |b| b.iter(|| phase_kernel(&traj).unwrap()));
}

fn bench_fock(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_fock_system");
    for n_max in [2, 6] {
        group.bench_function(format!("n_max={n_max}"), |b| {
            b.iter(|| build_fock_system(n_max).unwrap())
        });
    }
    group.finish();
}

fn bench_evolve(c: &mut Criterion) {
    let traj = coil(FRAC_PI_3, 256);
    let opts = EvolveOptions {
        step_tolerance: 1e-6,
        record_trace: false,
    };
    c.bench_function("evolve/tol=1e-6", |b| {
        b.iter(|| evolve(&traj, Helicity::Right, opts).unwrap())
    });
}

criterion_group!(benches, bench_kernel, bench_fock, bench_evolve);
criterion_main!(benches);

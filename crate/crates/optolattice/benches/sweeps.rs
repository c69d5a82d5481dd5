use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use optolattice::gaussian::stationary_for;
use optolattice::spectra::{phase_diagram, sweep_line, PhaseTolerances};
use optolattice::topology::chern_fixed_grid;
use optolattice::{ChainParams, Exec};

const MODES: [(&str, Exec); 2] = [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)];

fn bench_line(c: &mut Criterion) {
    let base = ChainParams::default();
    let mut group = c.benchmark_group("sweep_line");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, 64), &exec, |b, &exec| {
            b.iter(|| sweep_line(&base, (0.0, 1.2), 64, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_phase_diagram(c: &mut Criterion) {
    let base = ChainParams::default().with_cells(6);
    let tol = PhaseTolerances { k_points: 128, ..Default::default() };
    let mut group = c.benchmark_group("phase_diagram");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, "12x12"), &exec, |b, &exec| {
            b.iter(|| phase_diagram(&base, (0.2, 2.0), (0.0, 1.2), (12, 12), &tol, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_chern(c: &mut Criterion) {
    let p = ChainParams::default();
    let mut group = c.benchmark_group("chern_fixed_grid");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, "32x32"), &exec, |b, &exec| {
            b.iter(|| chern_fixed_grid(&p, 32, 32, 10.0, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_steady_scan(c: &mut Criterion) {
    let gs: Vec<f64> = (0..16).map(|i| 0.05 + 0.012 * i as f64).collect();
    let mut group = c.benchmark_group("stationary_scan");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new(name, gs.len()), &exec, |b, &exec| {
            b.iter(|| exec.map(gs.clone(), |g| stationary_for(&ChainParams::default().with_g_plus(g), &[]).unwrap()))
        });
    }
    group.finish();
}

fn config() -> Criterion {
    Criterion::default().sample_size(10).warm_up_time(Duration::from_secs(1)).measurement_time(Duration::from_secs(5))
}

criterion_group!(
    name = benches;
    config = config();
    targets = bench_line, bench_phase_diagram, bench_chern, bench_steady_scan
);
criterion_main!(benches);

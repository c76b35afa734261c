//! Sequential against data-parallel execution of the hot loops.
//! Build with `--no-default-features` to see the fallback on both arms.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qdt_core::baseline::pfunction::{self, PhaseSpaceGrid};
use qdt_core::detector::{self, DetectorSpec};
use qdt_core::experiment::{self, Sweep, SweepAxis};
use qdt_core::probe::{self, ProbeGrid};
use qdt_core::Execution;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn probes(c: &mut Criterion) {
    let spec = DetectorSpec::with_lo_photons(0.5, 0.6, 5.0, 60).unwrap();
    let povm = detector::detector_povm(&spec, 1e-10).unwrap();
    let grid = ProbeGrid::from_photon_range(30.0, 0.5, 40).unwrap();
    let table = probe::born_table(&povm, &grid, Execution::Parallel).unwrap();

    let mut g = c.benchmark_group("born_table");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| probe::born_table(&povm, &grid, exec).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("sample_counts");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| probe::sample_counts(&table, 100_000, 42, exec).unwrap())
        });
    }
    g.finish();
}

fn kernels(c: &mut Criterion) {
    let grid = PhaseSpaceGrid::new(10.0, 0.05).unwrap();
    let mut g = c.benchmark_group("p_kernel");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pfunction::build_kernel(&grid, 4, 3, 5.0, exec))
        });
    }
    g.finish();
}

fn sweeps(c: &mut Criterion) {
    let mut cfg = experiment::preset("desk").unwrap();
    cfg.detector.dim = 30;
    cfg.grid.max_photons = 12.0;
    cfg.grid.phases = 20;
    cfg.sweep = Some(Sweep {
        axis: SweepAxis::Gamma,
        values: vec![0.1, 1.0, 10.0, 100.0],
    });
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| experiment::sweep(&cfg, 0, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, probes, kernels, sweeps);
criterion_main!(benches);

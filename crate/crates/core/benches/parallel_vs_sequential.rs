use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use vertisim::demand::{demand_statistics, DemandProfile};
use vertisim::kernel::SimTime;
use vertisim::par::ExecutionMode;
use vertisim::scenario::{sweep, ScenarioConfig, SweepSpec};

const MODES: [(&str, ExecutionMode); 2] =
    [("parallel", ExecutionMode::Parallel), ("sequential", ExecutionMode::Sequential)];

fn sweep_modes(c: &mut Criterion) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/baseline.toml");
    let mut base = ScenarioConfig::load(&path).unwrap();
    base.output.record_events = false;
    let spec = SweepSpec { fleets: vec![8, 14, 20], distances_mi: vec![12.0, 24.0, 36.0], seeds: vec![1, 2] };
    let mut group = c.benchmark_group("sweep_18_cells");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sweep(black_box(&base), &spec, mode, None))
        });
    }
    group.finish();
}

fn demand_modes(c: &mut Criterion) {
    let profile = DemandProfile::reconstructed();
    let seeds: Vec<u64> = (1..=64).collect();
    let mut group = c.benchmark_group("demand_statistics_64_seeds");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| demand_statistics(black_box(&profile), &seeds, 4, SimTime::from_minutes(5.0), mode))
        });
    }
    group.finish();
}

criterion_group!(benches, sweep_modes, demand_modes);
criterion_main!(benches);

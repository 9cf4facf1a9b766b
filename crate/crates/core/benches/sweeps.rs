//! Parallel versus sequential execution of the three sweep shapes: a metric
//! grid, an Ising chain-size sweep, and an adiabatic-error sweep over times.

use std::hint::black_box;

use adiageo::dynamics::{self, PropagationOptions};
use adiageo::geodesic::{self, QuadratureGeodesicOptions};
use adiageo::metric;
use adiageo::models::{IsingCase, IsingChain, ModeSet, Projective, ProjectiveLine};
use adiageo::sweep::{self, Execution};
use adiageo::{LinearSchedule, SpectralOptions};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn metric_grid(c: &mut Criterion) {
    let model = Projective::grover(64).unwrap();
    let opts = SpectralOptions::default();
    let points: Vec<[f64; 2]> = (0..400).map(|k| [0.05 + (k % 20) as f64 / 20.0, 0.05 + (k / 20) as f64 / 20.0]).collect();
    let mut group = c.benchmark_group("metric_grid_400_points_N64");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sweep::map_slice(exec, &points, |x| metric::metric_tensor(&model, black_box(x), &opts).unwrap()))
        });
    }
    group.finish();
}

fn ising_sizes(c: &mut Criterion) {
    let ms: Vec<usize> = vec![1, 4, 10, 30, 100, 200, 400, 800];
    let mut group = c.benchmark_group("ising_geodesic_sweep_m");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                sweep::map_slice(exec, &ms, |&m| {
                    let chain = IsingChain::new(m, ModeSet::EvenParity).unwrap();
                    let opts = QuadratureGeodesicOptions { breakpoints: vec![0.5], ..Default::default() };
                    geodesic::quadrature_geodesic_1d(move |x| chain.line_metric(IsingCase::I, x), 0.0, 1.0, &opts)
                        .unwrap()
                        .length
                })
            })
        });
    }
    group.finish();
}

fn time_sweep(c: &mut Criterion) {
    let model = ProjectiveLine(Projective::grover(8).unwrap());
    let sched = LinearSchedule::new(vec![0.0], vec![1.0]).unwrap();
    let times = [10.0, 20.0, 30.0, 40.0];
    let mut group = c.benchmark_group("adiabatic_error_sweep_T");
    group.sample_size(10);
    for (name, exec) in MODES {
        let opts = PropagationOptions { execution: exec, record: 4, ..Default::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| dynamics::adiabatic_error_sweep(&model, &sched, black_box(&times), &opts, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, metric_grid, ising_sizes, time_sweep);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gmmse::io::faithful;
use gmmse::mixture::{select_model, CovarianceFamily, EmConfig};
use gmmse::resample::{run_resampling, ReplicateMethod, ResampleConfig};
use gmmse::simulation::{builtin_spec, run_coverage_methods, CoverageConfig};
use gmmse::Execution;

const SCHEDULES: [(&str, Execution); 2] = [
    ("parallel", Execution::Parallel),
    ("sequential", Execution::Sequential),
];

fn faithful_replicates(c: &mut Criterion) {
    let data = faithful();
    let fit = select_model(&data, 1..=5, &CovarianceFamily::ALL, &EmConfig::default()).unwrap();
    let mut group = c.benchmark_group("faithful_replicates");
    group.sample_size(10);
    for method in ReplicateMethod::ALL {
        for (name, execution) in SCHEDULES {
            let config = ResampleConfig {
                execution,
                ..ResampleConfig::default()
            };
            group.bench_with_input(
                BenchmarkId::new(method.code(), name),
                &config,
                |b, config| {
                    b.iter(|| {
                        run_resampling(&data, &fit, method, 200, black_box(1), config).unwrap()
                    })
                },
            );
        }
    }
    group.finish();
}

fn coverage_datasets(c: &mut Criterion) {
    let spec = builtin_spec("M7").unwrap();
    let mut group = c.benchmark_group("coverage_m7");
    group.sample_size(10);
    for (name, execution) in SCHEDULES {
        let config = CoverageConfig {
            datasets: 8,
            replicates: 50,
            seed: 1,
            resample: ResampleConfig {
                execution,
                ..ResampleConfig::default()
            },
            ..CoverageConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &config, |b, config| {
            b.iter(|| {
                run_coverage_methods(&spec, &ReplicateMethod::ALL, black_box(config)).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, faithful_replicates, coverage_datasets);
criterion_main!(benches);

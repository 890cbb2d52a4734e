//! Parallel vs sequential throughput for the grid fit and the coverage
//! study. The "seq" variants run the identical code on a one-thread rayon
//! pool; built with --no-default-features only the sequential path exists.

use criterion::{criterion_group, criterion_main, Criterion};

use cdens::montecarlo::{CellSpec, StudyConfig};
use cdens::{DgpSpec, EstimationConfig, EvaluationSpec};

fn fixture() -> (cdens::DataSet, EvaluationSpec, EstimationConfig) {
    let dgp = DgpSpec::standard_normal(7);
    let data = cdens::montecarlo::draw_dgp(&dgp, 4000, 1).unwrap();
    let grid: Vec<f64> = (0..19).map(|k| -1.6 + 0.178 * k as f64).collect();
    let spec = EvaluationSpec::with_scalar_bandwidth(grid, vec![0.0], 0.5).unwrap();
    let cfg = EstimationConfig {
        band_sims: 1000,
        ..EstimationConfig::default()
    };
    (data, spec, cfg)
}

fn study_fixture() -> (DgpSpec, StudyConfig) {
    let dgp = DgpSpec::truncated_table(11);
    let study = StudyConfig {
        reps: 10,
        n: 400,
        cells: vec![CellSpec {
            mu: 1,
            x_point: 0.0,
        }],
        grid_size: 10,
        band_sims: 500,
        ..StudyConfig::default()
    };
    (dgp, study)
}

fn bench_grid_fit(c: &mut Criterion) {
    let (data, spec, cfg) = fixture();
    let mut group = c.benchmark_group("grid_fit_n4000_m19");

    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        group.bench_function("sequential", |b| {
            b.iter(|| pool.install(|| cdens::fit(&data, &spec, &cfg, 42).unwrap()))
        });
        group.bench_function("parallel", |b| {
            b.iter(|| cdens::fit(&data, &spec, &cfg, 42).unwrap())
        });
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| {
        b.iter(|| cdens::fit(&data, &spec, &cfg, 42).unwrap())
    });

    group.finish();
}

fn bench_coverage_study(c: &mut Criterion) {
    let (dgp, study) = study_fixture();
    let mut group = c.benchmark_group("coverage_study_10reps_n400");
    group.sample_size(10);

    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        group.bench_function("sequential", |b| {
            b.iter(|| pool.install(|| cdens::montecarlo::run_coverage_study(&dgp, &study).unwrap()))
        });
        group.bench_function("parallel", |b| {
            b.iter(|| cdens::montecarlo::run_coverage_study(&dgp, &study).unwrap())
        });
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| {
        b.iter(|| cdens::montecarlo::run_coverage_study(&dgp, &study).unwrap())
    });

    group.finish();
}

criterion_group!(benches, bench_grid_fit, bench_coverage_study);
criterion_main!(benches);

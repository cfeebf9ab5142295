//! Sequential vs rayon execution of the data-parallel loops. Build with
//! `--no-default-features` to see the sequential fallback for both modes.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use noisebench::augment::{augment_gmm, AugmentKind, AugmentSpec, TargetPerClass};
use noisebench::data::{standardize, synth_dataset, window_all, Window};
use noisebench::experiment::{run_grid, GridConfig};
use noisebench::nn::{Model, Preset};
use noisebench::noise::{corrupt_training_set, NoiseSpec};
use noisebench::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn windows() -> Vec<Window> {
    let ds = synth_dataset(4, 20, 1024, 1).expect("synthetic dataset");
    window_all(&ds.records, 256, 128).expect("windows")
}

fn bench_predict(c: &mut Criterion) {
    let inputs: Vec<Vec<f64>> = windows().iter().map(|w| standardize(w).values).collect();
    let mut group = c.benchmark_group("predict");
    for preset in [Preset::Cnn, Preset::SepCnn] {
        let model = Model::new(&preset.layers(), 1, 256, 4, 0).expect("model");
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(preset.as_str(), name), &exec, |b, &exec| {
                b.iter(|| model.predict(black_box(&inputs), exec).expect("predict"))
            });
        }
    }
    group.finish();
}

fn bench_corrupt(c: &mut Criterion) {
    let ws = windows();
    let spec = NoiseSpec::awgn(40.0, 0);
    let mut group = c.benchmark_group("corrupt_awgn");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| corrupt_training_set(black_box(&ws), &spec, 7, exec).expect("corrupt"))
        });
    }
    group.finish();
}

fn bench_gmm(c: &mut Criterion) {
    let ws = windows();
    let spec = AugmentSpec {
        target_per_class: TargetPerClass::Count(200),
        ..AugmentSpec::new(AugmentKind::Gmm, 3)
    };
    let mut group = c.benchmark_group("augment_gmm");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| augment_gmm(black_box(&ws), &spec, exec).expect("augment"))
        });
    }
    group.finish();
}

fn bench_grid(c: &mut Criterion) {
    let mut config = GridConfig {
        classifiers: vec![Preset::SepCnn],
        augmentations: vec![AugmentKind::None],
        ..GridConfig::default()
    };
    config.noise.linear = vec![0.0, 0.4];
    config.noise.awgn = vec![0.0, 40.0];
    config.train.epochs = 2;
    let mut group = c.benchmark_group("grid_sepcnn_3_runs");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_grid(&config, exec).expect("grid"))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_predict, bench_corrupt, bench_gmm, bench_grid);
criterion_main!(benches);

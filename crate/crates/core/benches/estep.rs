//! E-step over a training set, sequential versus rayon fan-out.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wscadl::datagen::{gen_gabor_dataset, GaborConfig};
use wscadl::em::{e_step, init_params};
use wscadl::{Backend, ExecMode, WeakExample};

fn estep(c: &mut Criterion) {
    let data: Vec<WeakExample> = gen_gabor_dataset(&GaborConfig {
        num_signals: 40,
        ..GaborConfig::default()
    })
    .unwrap()
    .into_iter()
    .map(|g| WeakExample::new(g.id, g.signal, g.labels, 20).unwrap())
    .collect();
    let params = init_params(9, 41, 1, 0).unwrap();
    let mut group = c.benchmark_group("e_step");
    group.sample_size(10);
    for (name, exec) in [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)] {
        group.bench_with_input(BenchmarkId::new(name, data.len()), &exec, |b, &exec| {
            b.iter(|| e_step(black_box(&params), &data, Backend::Chain, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, estep);
criterion_main!(benches);

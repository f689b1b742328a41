use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mialab_core::attack::{
    calibrate_threshold, label_consistency, ConfidenceRecord, LabelOnlyConfig, ThresholdMode,
};
use mialab_core::defense::adamixup_batch;
use mialab_core::numerics::{one_hot, softmax_cross_entropy, Matrix, MlpModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(0.0..1.0))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn matmul(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let a = random_matrix(&mut rng, 128, 784);
    let b = random_matrix(&mut rng, 784, 256);
    c.bench_function("matmul 128x784x256", |bench| {
        bench.iter(|| black_box(&a).matmul(black_box(&b)).unwrap())
    });
}

fn training_step(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = MlpModel::new(&[784, 256, 128, 10], 0.0, &mut rng).unwrap();
    let x = random_matrix(&mut rng, 128, 784);
    let labels: Vec<usize> = (0..128).map(|i| i % 10).collect();
    let targets = one_hot(&labels, 10).unwrap();
    c.bench_function("forward+backward batch 128, mlp 784-256-128-10", |bench| {
        bench.iter(|| {
            let (logits, trace) = model.forward(&x, true, &mut rng).unwrap();
            let (_, dlogits) = softmax_cross_entropy(&logits, &targets).unwrap();
            black_box(model.backward(&trace, &dlogits).unwrap())
        })
    });
}

fn mixing(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_matrix(&mut rng, 128, 784);
    let labels: Vec<usize> = (0..128).map(|i| i % 10).collect();
    c.bench_function("adamixup_batch 128x784", |bench| {
        bench.iter(|| adamixup_batch(&x, &labels, black_box(0.4), &mut rng).unwrap())
    });
}

fn calibration(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut records = |n: usize| -> Vec<ConfidenceRecord> {
        (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..10).map(|_| rng.random_range(0.01..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let label = rng.random_range(0..10);
                ConfidenceRecord::new(raw.iter().map(|v| v / total).collect(), label).unwrap()
            })
            .collect()
    };
    let (members, nonmembers) = (records(1000), records(1000));
    c.bench_function("calibrate_threshold 1000+1000", |bench| {
        bench.iter(|| calibrate_threshold(&members, &nonmembers, ThresholdMode::Global).unwrap())
    });
}

fn consistency(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let model = MlpModel::new(&[784, 256, 128, 10], 0.0, &mut rng).unwrap();
    let x: Vec<f64> = (0..784).map(|_| rng.random_range(0.0..1.0)).collect();
    let config = LabelOnlyConfig::default();
    c.bench_function("label_consistency N=50, d=784", |bench| {
        bench.iter(|| label_consistency(&model, &x, 3, &config, &mut rng).unwrap())
    });
}

criterion_group!(
    benches,
    matmul,
    training_step,
    mixing,
    calibration,
    consistency
);
criterion_main!(benches);

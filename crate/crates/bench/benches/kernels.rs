use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qrelu_core::matrix::Op;
use qrelu_core::nn::{init_model, mlp_spec, Architecture};
use qrelu_core::optim::train;
use qrelu_core::{LossKind, Matrix, Mode, Scenario, TrainConfig, PAPER_TAUS};

fn random(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

fn gemm(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let a = random(64, 200, &mut r);
    let b = random(200, 200, &mut r);
    c.bench_function("gemm 64x200x200", |bench| {
        bench.iter(|| Matrix::matmul(black_box(&a), Op::N, black_box(&b), Op::N).unwrap())
    });
    c.bench_function("gemm 200x64x200 transposed", |bench| {
        bench.iter(|| Matrix::matmul(black_box(&a), Op::T, black_box(&a), Op::N).unwrap())
    });
}

fn forward_backward(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let spec = mlp_spec(2, 5, &Architecture::default());
    let mut model = init_model(&spec, 3).unwrap();
    model.set_mode(Mode::Train);
    let x = random(64, 2, &mut r);
    let y = random(64, 1, &mut r);
    let loss = LossKind::Composite(PAPER_TAUS.to_vec().try_into().unwrap());
    c.bench_function("forward+backward batch 64, composite", |bench| {
        bench.iter(|| {
            let (out, cache) = model.forward(black_box(&x), Some(&mut r)).unwrap();
            let (_, dy) = loss.evaluate(&y, &out).unwrap();
            model.backward(&cache, &dy).unwrap()
        })
    });
    model.set_mode(Mode::Eval);
    let xt = random(10_000, 2, &mut r);
    c.bench_function("predict 10^4 rows", |bench| bench.iter(|| model.predict(black_box(&xt)).unwrap()));
}

fn losses(c: &mut Criterion) {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let out = random(1024, 5, &mut r);
    let y = random(1024, 1, &mut r);
    let composite = LossKind::Composite(PAPER_TAUS.to_vec().try_into().unwrap());
    c.bench_function("composite loss 1024x5", |bench| {
        bench.iter(|| composite.evaluate(black_box(&y), black_box(&out)).unwrap())
    });
    let out2 = random(1024, 2, &mut r);
    let y2 = random(1024, 2, &mut r);
    let geometric = LossKind::Geometric(qrelu_core::DirectionU::median(2));
    c.bench_function("geometric loss 1024x2", |bench| {
        bench.iter(|| geometric.evaluate(black_box(&y2), black_box(&out2)).unwrap())
    });
}

fn epoch(c: &mut Criterion) {
    let s = Scenario::new(2).unwrap();
    let data = s.generate(1000, 5).unwrap();
    let spec = mlp_spec(2, 5, &Architecture::default());
    let init = init_model(&spec, 6).unwrap();
    let loss = LossKind::Composite(PAPER_TAUS.to_vec().try_into().unwrap());
    let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
    let mut group = c.benchmark_group("training");
    group.sample_size(20);
    group.bench_function("one epoch n=1000", |bench| {
        bench.iter(|| {
            let mut m = init.clone();
            train(&mut m, &data.x, &data.y, &loss, &cfg).unwrap()
        })
    });
    group.finish();
}

criterion_group!(kernels, gemm, forward_backward, losses, epoch);
criterion_main!(kernels);

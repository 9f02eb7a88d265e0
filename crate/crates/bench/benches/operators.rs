use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dpd_core::linops::{
    make_average_kernel, make_motion_kernel, ConvolutionOperator, DifferenceOperator, LinearOperator,
};

fn difference(c: &mut Criterion) {
    let mut group = c.benchmark_group("difference_apply_adjoint");
    for size in [64, 256] {
        let d = DifferenceOperator::new(size, size).unwrap();
        let x: Vec<f64> = (0..size * size).map(|i| (i % 17) as f64).collect();
        group.bench_with_input(BenchmarkId::from_parameter(size), &size, |b, _| {
            b.iter(|| d.adjoint(&d.apply(&x).unwrap()).unwrap())
        });
    }
    group.finish();
}

fn convolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("convolution_apply");
    let size = 128;
    let x: Vec<f64> = (0..size * size).map(|i| (i % 13) as f64).collect();
    for (name, kernel) in [
        ("motion7", make_motion_kernel(7, 135.0).unwrap()),
        ("average5", make_average_kernel(5).unwrap()),
        ("motion30", make_motion_kernel(30, 135.0).unwrap()),
    ] {
        let k = ConvolutionOperator::new(kernel, size, size).unwrap();
        group.bench_function(name, |b| b.iter(|| k.apply(&x).unwrap()));
    }
    group.finish();
}

fn gaussian_prox(c: &mut Criterion) {
    let problem = dpd_bench::gaussian_problem(128);
    let z = vec![0.5; problem.primal_dim()];
    c.bench_function("gaussian_fidelity_prox_128", |b| {
        b.iter(|| problem.f.prox(&z, 1e-3).unwrap())
    });
}

criterion_group!(benches, difference, convolution, gaussian_prox);
criterion_main!(benches);

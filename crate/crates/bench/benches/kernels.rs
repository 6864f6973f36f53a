use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use xnet_core::autodiff::{self, cauchy_basis_elementary};
use xnet_core::linalg::ridge_solve;
use xnet_core::models::{XNet, XNetInit, D_MIN};
use xnet_core::{Array, Graph, SeedRng, Tensor};

fn setup(n: usize, units: usize) -> (XNet, Tensor, Tensor) {
    let mut rng = SeedRng::new(7);
    let net = XNet::new(2, units, &XNetInit::default(), &mut rng).unwrap();
    let x = rng.uniform_tensor(&[n, 2], -1.0, 1.0);
    let y = rng.uniform_tensor(&[n, 1], -1.0, 1.0);
    (net, x, y)
}

fn forward(c: &mut Criterion) {
    let mut g = c.benchmark_group("xnet_forward");
    for units in [64, 1000] {
        let (net, x, _) = setup(1000, units);
        g.bench_with_input(BenchmarkId::from_parameter(units), &units, |b, _| {
            b.iter(|| net.predict(black_box(&x)).unwrap())
        });
    }
    g.finish();
}

fn gradient(c: &mut Criterion) {
    let mut g = c.benchmark_group("xnet_mse_gradient");
    for units in [64, 1000] {
        let (net, x, y) = setup(1000, units);
        g.bench_with_input(BenchmarkId::new("fused", units), &units, |b, _| {
            b.iter(|| {
                let graph = Graph::new();
                let p = graph.params(net.params());
                let xv = graph.constant(x.clone());
                let yv = graph.constant(y.clone());
                let loss = XNet::forward(&p, &xv)
                    .unwrap()
                    .sub(&yv)
                    .unwrap()
                    .square()
                    .mean();
                graph.backward(loss).unwrap()
            })
        });
        g.bench_with_input(BenchmarkId::new("elementary", units), &units, |b, _| {
            b.iter(|| {
                let graph = Graph::new();
                let p = graph.params(net.params());
                let xv = graph.constant(x.clone());
                let yv = graph.constant(y.clone());
                let d = p[4].softplus().add_scalar(D_MIN);
                let out = cauchy_basis_elementary(&xv, &p[0], &p[1], &p[2], &p[3], &d).unwrap();
                let loss = out.add(&p[5]).unwrap().sub(&yv).unwrap().square().mean();
                graph.backward(loss).unwrap()
            })
        });
    }
    g.finish();
}

fn laplacian(c: &mut Criterion) {
    let mut g = c.benchmark_group("xnet_laplacian");
    let (net, x, _) = setup(2500, 200);
    g.bench_function("fused", |b| {
        b.iter(|| XNet::laplacian(net.params(), black_box(&x)).unwrap())
    });
    g.bench_function("nested_dual", |b| {
        b.iter(|| {
            autodiff::laplacian(black_box(&x), |xd| {
                let p: Vec<_> = net.params().iter().map(|t| xd.lift(t.clone())).collect();
                XNet::forward(&p, xd)
            })
            .unwrap()
        })
    });
    g.finish();
}

fn solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("ridge_solve");
    g.sample_size(10);
    for units in [100, 500] {
        let (net, x, y) = setup(2000, units);
        let phi = net.design_matrix(&x).unwrap();
        g.bench_with_input(
            BenchmarkId::from_parameter(2 * units + 1),
            &units,
            |b, _| b.iter(|| ridge_solve(black_box(&phi), y.data(), 1e-10).unwrap()),
        );
    }
    g.finish();
}

criterion_group!(benches, forward, gradient, laplacian, solve);
criterion_main!(benches);

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use confym_core::canon::canonicalize;
use confym_core::forms::{action_density, tractor_form};
use confym_core::numeric::eval::Evaluator;
use confym_core::numeric::geometry::Geometry;
use confym_core::numeric::quadrature::action_integral;
use confym_core::numeric::spec::{random_polynomial_metric, random_periodic_gauge, random_periodic_metric};
use confym_core::obstruction::{expand6, summands};
use confym_core::parse::ex;
use confym_core::reduce::{prepare, reduce, ReduceConfig};

fn symbolic(c: &mut Criterion) {
    let fig1 = summands()[0].clone();
    let expanded = expand6(&fig1);
    c.bench_function("expand fig1 summand", |b| b.iter(|| expand6(black_box(&fig1))));
    c.bench_function("canonicalize fig1 expansion", |b| b.iter(|| canonicalize(black_box(&expanded))));
    let density = prepare(&action_density(&tractor_form()).unwrap(), Some(6));
    c.bench_function("reduce action density", |b| b.iter(|| reduce(black_box(&density), &ReduceConfig::at_dim(6))));
}

fn numeric(c: &mut Criterion) {
    let spec = random_polynomial_metric(6, 3, 5).compile().unwrap();
    let bach = ex("B[a,b]");
    c.bench_function("float jets degree 7 + Bach", |b| {
        b.iter(|| {
            let mut g = Geometry::<f64>::new(&spec, &[0.1; 6], 7, 1).unwrap();
            Evaluator::new(&mut g).eval(black_box(&bach)).unwrap()
        })
    });
    let mut torus = random_periodic_metric(6, 1, 0.1);
    torus.gauge = Some(random_periodic_gauge(6, 2, 2, 0.3));
    let mut group = c.benchmark_group("torus");
    group.sample_size(10);
    group.bench_function("action 4/8 grid", |b| b.iter(|| action_integral(black_box(&torus), 4, 4).unwrap()));
    group.finish();
}

criterion_group!(benches, symbolic, numeric);
criterion_main!(benches);

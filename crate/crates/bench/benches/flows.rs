use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use hypflow_core::cartan::{cartan_disks, polynomial_roots};
use hypflow_core::equidist::{horocycle_birkhoff, main_experiment, LiouvilleReference};
use hypflow_core::hyperbolic::{geodesic_flow, to_chart};
use hypflow_core::perturbed::{perturbed_flow, IntegratorConfig};
use hypflow_core::potential::{default_potential, StencilConfig};
use hypflow_core::quotient::bolza_group;
use hypflow_core::{ExperimentConfig, ExperimentParams, Observable, ObservableKind};
use num_complex::Complex64;

fn exact_flows(c: &mut Criterion) {
    let group = bolza_group();
    let g = group.sample_liouville(1, 1).unwrap()[0];
    c.bench_function("geodesic_flow", |b| b.iter(|| geodesic_flow(black_box(&g), black_box(3.0)).unwrap()));
    let far = geodesic_flow(&g, 12.0).unwrap();
    c.bench_function("reduce_t12", |b| b.iter(|| group.reduce(black_box(&far)).unwrap()));
}

fn potential_and_integrator(c: &mut Criterion) {
    let pot = default_potential(Arc::new(bolza_group()));
    let p = to_chart(&pot.group().sample_liouville(1, 2).unwrap()[0]);
    let st = StencilConfig::default();
    c.bench_function("flow_derivatives_j3", |b| b.iter(|| pot.flow_derivatives(black_box(&p), 3, true, &st)));
    let cfg = IntegratorConfig::default();
    let mut group = c.benchmark_group("perturbed");
    group.sample_size(20);
    group.bench_function("perturbed_flow_t8", |b| {
        b.iter(|| perturbed_flow(&pot, black_box(&p), 1e-2, 8.0, &cfg).unwrap())
    });
    group.finish();
}

fn cartan(c: &mut Criterion) {
    let coeffs = [0.3, -1.2, 0.5, 2.0, -0.7, 1.0];
    c.bench_function("polynomial_roots_deg5", |b| b.iter(|| polynomial_roots(black_box(&coeffs)).unwrap()));
    let roots: Vec<Complex64> = (0..5).map(|k| Complex64::from_polar(0.5, k as f64)).collect();
    c.bench_function("cartan_disks_deg5", |b| b.iter(|| cartan_disks(black_box(&roots), 0.2).unwrap()));
}

fn experiments(c: &mut Criterion) {
    let pot = Arc::new(default_potential(Arc::new(bolza_group())));
    let a = Observable::new(ObservableKind::VPullback, pot.clone());
    let g = pot.group().sample_liouville(1, 3).unwrap()[0];
    let mut group = c.benchmark_group("experiments");
    group.sample_size(10);
    group.bench_function("horocycle_birkhoff_t100", |b| b.iter(|| horocycle_birkhoff(&a, black_box(&g), 100.0)));
    let params = ExperimentParams { eps0: 1e-2, nu1: 0.0, nu2: 0.1, c: 1.2, j: 0, eta0: 0.05 };
    let cfg = ExperimentConfig { n_quad: 8, ..Default::default() };
    let reference = LiouvilleReference { mean: 0.33, mc_error: 1e-3, n: 1000, seed: 0 };
    let p = to_chart(&g);
    group.bench_function("main_experiment_q8", |b| {
        b.iter(|| main_experiment(&a, black_box(&p), 1e-2, &params, &cfg, &reference))
    });
    group.finish();
}

criterion_group!(benches, exact_flows, potential_and_integrator, cartan, experiments);
criterion_main!(benches);

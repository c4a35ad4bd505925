//! Parallel against sequential execution of the hot kernels. The sequential
//! side runs the same code inside a one-thread pool; building with
//! `--no-default-features` swaps in the rayon-free fallback, in which case
//! both sides measure it.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kinpinn::config::{Mode, RunConfig};
use kinpinn::kinetic::{AngularProfile, AssembledCollision, CollisionKernel};
use kinpinn::losses::{EvalMode, Objective};
use kinpinn::quadrature::{Rule, SphereRule, VelocityQuadrature};

fn pools() -> [(&'static str, rayon::ThreadPool); 2] {
    let build = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    [("sequential", build(1)), ("parallel", build(0))]
}

fn assembly(c: &mut Criterion) {
    let kernel = CollisionKernel::new(0.0, AngularProfile::AbsCos, 1.0).unwrap();
    let rule = Arc::new(VelocityQuadrature::cube(2, 8.0, 16).unwrap());
    let sphere = SphereRule::new(2, 8).unwrap();
    let mut group = c.benchmark_group("assemble_collision_16x16");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| AssembledCollision::new(&kernel, rule.clone(), &sphere).unwrap()))
        });
    }
    group.finish();
}

fn gamma(c: &mut Criterion) {
    let kernel = CollisionKernel::new(0.0, AngularProfile::AbsCos, 1.0).unwrap();
    let rule = Arc::new(VelocityQuadrature::cube(2, 8.0, 24).unwrap());
    let op = AssembledCollision::new(&kernel, rule.clone(), &SphereRule::new(2, 16).unwrap()).unwrap();
    let u: Vec<f64> = (0..rule.len()).map(|i| (-rule.node(i).iter().map(|v| v * v).sum::<f64>() / 4.0).exp()).collect();
    let mut group = c.benchmark_group("gamma_24x24");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| pool.install(|| op.gamma(&u, &u))));
    }
    group.finish();
}

fn pinn_breakdown(c: &mut Criterion) {
    let mut cfg = RunConfig::default();
    cfg.network.hidden = vec![20; 3];
    cfg.rules.velocity_points = 12;
    cfg.rules.x_points = 16;
    cfg.rules.t_points = 6;
    let setup = cfg.pinn().unwrap();
    let nets = cfg.init_networks(Mode::Pinn, 0).unwrap();
    let mut group = c.benchmark_group("pinn_quadrature_breakdown");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| setup.problem.breakdown(&nets, EvalMode::Quadrature).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, gamma, pinn_breakdown);
criterion_main!(benches);

use std::f64::consts::PI;
use std::sync::Arc;

use kinpinn::kinetic::maxwellian;
use kinpinn::quadrature::{Rule, VelocityQuadrature};
use kinpinn::reference::{
    diffusion_solve, dvm_ap_study, dvm_solve, ApStudyConfig, CollisionStep, DvmConfig, DvmTrajectory, Splitting,
    Transport,
};

fn rule(side: f64, n: usize) -> Arc<VelocityQuadrature> {
    Arc::new(VelocityQuadrature::cube(1, side, n).unwrap())
}

fn discrete_mass(r: &VelocityQuadrature) -> f64 {
    (0..r.len()).map(|i| r.weights()[i] * maxwellian(r.node(i))).sum()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn homogeneous_relaxation_matches_closed_form() {
    // Spatially uniform data: transport is idle and f relaxes to rho M / m
    // at rate m / eps^2, m being the discrete Maxwellian mass.
    for side in [8.0, 16.0] {
        let r = rule(side, 32);
        let m = discrete_mass(&r);
        let eps = 0.7;
        let mut cfg = DvmConfig::new(eps, 8, 0.01, 0.3);
        cfg.save_every = 10;
        let f0 = |_: f64, xi: &[f64]| (-(xi[0] - 1.0).powi(2) / 2.0).exp() / (2.0 * PI).sqrt();
        let traj = dvm_solve(&cfg, r.clone(), &f0).unwrap();
        let w = r.weights();
        let init: Vec<f64> = (0..r.len()).map(|i| f0(0.0, r.node(i))).collect();
        let rho: f64 = init.iter().zip(w).map(|(f, w)| f * w).sum();
        for (k, &t) in traj.times().iter().enumerate() {
            let decay = (-m * t / (eps * eps)).exp();
            let expect: Vec<f64> = (0..r.len())
                .map(|i| {
                    let eq = rho * maxwellian(r.node(i)) / m;
                    eq + decay * (init[i] - eq)
                })
                .collect();
            for cell in traj.snapshot(k).chunks(r.len()) {
                let err = max_diff(cell, &expect);
                assert!(err < 1e-10, "side {side}, t {t}: {err}");
            }
        }
        // With the truncation at 16 the discrete mass is 1 to 1e-10, and
        // the literal relaxation L f = M int f - f holds.
        if side == 16.0 {
            assert!((m - 1.0).abs() < 1e-10, "mass {m}");
        }
    }
}

fn wave(amp: f64) -> impl Fn(f64, &[f64]) -> f64 + Sync {
    move |x: f64, xi: &[f64]| (1.0 + amp * x.cos() + 0.2 * (2.0 * x).sin() * xi[0]) * maxwellian(xi)
}

#[test]
fn mass_drift_is_negligible() {
    let r = rule(8.0, 32);
    for transport in [Transport::Spectral, Transport::Upwind] {
        let mut cfg = DvmConfig::new(0.3, 64, 0.005, 0.5);
        cfg.transport = transport;
        cfg.save_every = 20;
        let traj = dvm_solve(&cfg, r.clone(), &wave(0.5)).unwrap();
        let m0 = traj.mass(0);
        for k in 0..traj.times().len() {
            assert!((traj.mass(k) - m0).abs() < 1e-8 * m0, "{transport:?} at {k}");
        }
    }
}

fn final_rho(cfg: &DvmConfig, r: &Arc<VelocityQuadrature>) -> Vec<f64> {
    let traj = dvm_solve(cfg, r.clone(), &wave(0.5)).unwrap();
    traj.rho(traj.times().len() - 1)
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

#[test]
fn strang_splitting_converges_in_time() {
    let r = rule(8.0, 16);
    let run = |dt: f64| {
        let mut cfg = DvmConfig::new(0.5, 32, dt, 0.4);
        cfg.save_every = usize::MAX;
        final_rho(&cfg, &r)
    };
    let (a, b, c) = (run(0.04), run(0.02), run(0.01));
    let order = (l2(&a, &b) / l2(&b, &c)).log2();
    assert!(order >= 1.5, "observed order {order}");
}

#[test]
fn lie_splitting_converges_in_time() {
    let r = rule(8.0, 16);
    let run = |dt: f64| {
        let mut cfg = DvmConfig::new(0.5, 32, dt, 0.4);
        cfg.splitting = Splitting::Lie;
        cfg.save_every = usize::MAX;
        final_rho(&cfg, &r)
    };
    let (a, b, c) = (run(0.04), run(0.02), run(0.01));
    let order = (l2(&a, &b) / l2(&b, &c)).log2();
    assert!(order >= 0.8, "observed order {order}");
}

#[test]
fn upwind_converges_under_refinement() {
    let r = rule(4.0, 8);
    let run = |cells: usize| {
        let h = 2.0 * PI / cells as f64;
        let mut cfg = DvmConfig::new(1.0, cells, 0.4 * h / 2.0, 0.3);
        cfg.transport = Transport::Upwind;
        cfg.save_every = usize::MAX;
        let rho = final_rho(&cfg, &r);
        // Cell averages of 4 children, to compare on the coarsest grid.
        let stride = cells / 32;
        rho.chunks(stride).map(|c| c.iter().sum::<f64>() / stride as f64).collect::<Vec<_>>()
    };
    let (a, b, c) = (run(32), run(64), run(128));
    let order = (l2(&a, &b) / l2(&b, &c)).log2();
    assert!(order >= 0.8, "observed order {order}");
}

#[test]
fn upwind_with_positive_collision_step_keeps_f_positive() {
    let r = rule(8.0, 24);
    let bump = |x: f64, xi: &[f64]| if x.abs() < 0.5 { 2.0 * maxwellian(&[xi[0] - 1.5]) } else { 1e-3 * maxwellian(xi) };
    for collision in [CollisionStep::Exact, CollisionStep::Implicit] {
        let mut cfg = DvmConfig::new(0.2, 64, 0.002, 0.3);
        cfg.transport = Transport::Upwind;
        cfg.splitting = Splitting::Lie;
        cfg.collision = collision;
        let traj = dvm_solve(&cfg, r.clone(), &bump).unwrap();
        for k in 0..traj.times().len() {
            let min = traj.snapshot(k).iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(min >= 0.0, "{collision:?}: min {min} at snapshot {k}");
        }
    }
}

#[test]
fn micro_part_carries_no_mass_beyond_truncation() {
    let r = rule(8.0, 32);
    let m = discrete_mass(&r);
    let eps = 0.25;
    let mut cfg = DvmConfig::new(eps, 32, 0.005, 0.2);
    cfg.save_every = 8;
    let traj = dvm_solve(&cfg, r.clone(), &wave(0.5)).unwrap();
    let nv = r.len();
    for k in 0..traj.times().len() {
        let rho = traj.rho(k);
        let g = traj.g(k);
        for (j, cell) in g.chunks(nv).enumerate() {
            let s: f64 = cell.iter().zip(r.weights()).map(|(g, w)| g * w).sum();
            let expect = rho[j] * (1.0 - m) / eps;
            assert!((s - expect).abs() < 1e-12, "cell {j}: {s} vs {expect}");
        }
    }
}

#[test]
fn trajectory_file_roundtrip_preserves_everything() {
    let r = rule(8.0, 8);
    let mut cfg = DvmConfig::new(0.5, 16, 0.01, 0.05);
    cfg.save_every = 2;
    let traj = dvm_solve(&cfg, r, &wave(0.3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ref.kdvm");
    traj.save(&path).unwrap();
    let back = DvmTrajectory::load(&path).unwrap();
    assert_eq!(back.times(), traj.times());
    for k in 0..traj.times().len() {
        assert_eq!(back.snapshot(k), traj.snapshot(k));
    }
    assert_eq!(back.config(), traj.config());
}

#[test]
fn diffusion_mode_matches_exponential() {
    let times: Vec<f64> = (0..5).map(|k| 0.1 * k as f64).collect();
    let sol = diffusion_solve(&nalgebra::DMatrix::from_element(1, 1, -0.8), 32, &times, &|x| 1.0 + 0.5 * (3.0 * x).cos()).unwrap();
    for (k, &t) in times.iter().enumerate() {
        for (j, &x) in sol.x().iter().enumerate() {
            let expect = 1.0 + 0.5 * (-0.8 * 9.0 * t).exp() * (3.0 * x).cos();
            assert!((sol.rho(k)[j] - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn reference_is_asymptotic_preserving() {
    let table = dvm_ap_study(&ApStudyConfig::default(), &[0.5, 0.25, 0.125]).unwrap();
    assert!(table.strictly_decreasing(), "{:?}", table.rows);
    let fit = table.fit.unwrap();
    assert!(fit.slope >= 0.8, "fitted order {}", fit.slope);
    assert!((table.diffusion + 1.0).abs() < 2e-3, "D = {}", table.diffusion);
    for row in &table.rows {
        assert!(row.error_at_zero < 1e-12);
    }
}

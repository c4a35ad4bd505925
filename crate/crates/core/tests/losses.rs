use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use kinpinn::config::{Mode, RunConfig};
use kinpinn::kinetic::collision::{gamma_op, k_op, nu};
use kinpinn::kinetic::{maxwellian, AlphaKernel};
use kinpinn::losses::apnn::{ApnnInitial, ApnnProblem};
use kinpinn::losses::pinn::{boundary_residual, Homogeneous, PinnProblem, PinnScenario};
use kinpinn::losses::{BatchSizes, EvalMode, LossBreakdown, Objective};
use kinpinn::network::{Architecture, JetOrder, TanhNetwork};
use kinpinn::quadrature::Rule;
use kinpinn::reference::{dvm_solve, DvmConfig, ManufacturedCase, OracleRules};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small() -> RunConfig {
    let mut c = RunConfig::default();
    c.network.hidden = vec![10, 10];
    c.rules.velocity_points = 8;
    c.rules.sphere_dirs = 8;
    c.rules.oracle_points = 16;
    c.rules.oracle_dirs = 8;
    c.rules.x_points = 16;
    c.rules.t_points = 6;
    c.rules.ap_velocity_points = 16;
    c.weights.gamma = 0.5;
    c
}

fn arch(c: &RunConfig, periodic: bool) -> Architecture {
    Architecture {
        periodic,
        ..c.architecture(Mode::Pinn)
    }
}

fn homogeneous(c: &RunConfig, periodic: bool) -> PinnProblem {
    let scenario: Arc<dyn PinnScenario> = Arc::new(Homogeneous::new("cos_gauss", |x: &[f64], xi: &[f64]| {
        x[0].cos() * (-0.5 * xi.iter().map(|v| v * v).sum::<f64>()).exp()
    }));
    PinnProblem::new(
        arch(c, periodic),
        c.loss_weights().unwrap(),
        c.collision_operator().unwrap(),
        c.space_time().unwrap(),
        scenario,
    )
    .unwrap()
}

fn pinn_parts(b: &LossBreakdown) -> [f64; 4] {
    match b {
        LossBreakdown::Pinn(p) => [p.eg_i, p.eg_t, p.eg_b, p.eg_p],
        _ => panic!("expected a PINN breakdown"),
    }
}

fn apnn_parts(b: &LossBreakdown) -> [f64; 5] {
    match b {
        LossBreakdown::Apnn(p) => [p.r1, p.r2, p.r3, p.r4, p.r5],
        _ => panic!("expected an APNN breakdown"),
    }
}

/// Network whose only nonzero parameter is the output bias.
fn constant_net(a: Architecture, c: f64) -> TanhNetwork {
    let mut net = TanhNetwork::zeros(a).unwrap();
    let mut p = net.params();
    *p.last_mut().unwrap() = c;
    net.set_params(&p).unwrap();
    net
}

#[test]
fn zero_network_sees_only_initial_data() {
    let c = small();
    let p = homogeneous(&c, true);
    let net = TanhNetwork::zeros(arch(&c, true)).unwrap();
    let b = p.generalization_error(&net, EvalMode::Quadrature).unwrap();
    let [ei, et, eb, ep] = pinn_parts(&b);
    assert_eq!((ei, eb, ep), (0.0, 0.0, 0.0));
    assert_eq!(b.eg_total(), et);
    // Periodic trapezoid is exact for cos^2; the velocity sum uses the same
    // midpoint nodes as the problem.
    let rule = p.operator().rule();
    let vel: f64 = (0..rule.len())
        .map(|i| {
            let xi = rule.node(i);
            rule.weights()[i] * (-(xi[0] * xi[0] + xi[1] * xi[1])).exp()
        })
        .sum();
    let expect = (PI * vel).sqrt();
    assert!((et - expect).abs() < 1e-12 * expect, "{et} vs {expect}");
}

#[test]
fn zero_case_vanishes_for_zero_network() {
    let mut c = small();
    c.scenario.case = "zero".into();
    let setup = c.pinn().unwrap();
    let net = TanhNetwork::zeros(arch(&c, true)).unwrap();
    let b = setup.problem.generalization_error(&net, EvalMode::Quadrature).unwrap();
    assert_eq!(b.eg_total(), 0.0);
}

#[test]
fn constant_network_total_error_and_penalty() {
    let c = small();
    let p = homogeneous(&c, true);
    let value = 0.3;
    let net = constant_net(arch(&c, true), value);
    let w: f64 = p.operator().rule().weights().iter().sum();
    let volume = c.weights.t_end * TAU * w;
    let et = p.total_error(&net, &|_, _, _| 0.0).unwrap();
    assert!((et - value * volume.sqrt()).abs() < 1e-12);
    let [_, _, eb, ep] = pinn_parts(&p.generalization_error(&net, EvalMode::Quadrature).unwrap());
    assert_eq!(eb, 0.0);
    let factor = (1.0 + c.weights.r).powf(c.weights.gamma);
    let expect = value * (factor * volume).sqrt();
    assert!((ep - expect).abs() < 1e-12 * expect, "{ep} vs {expect}");
}

#[test]
fn boundary_term_matches_pointwise_probe() {
    let c = small();
    let p = homogeneous(&c, false);
    let net = TanhNetwork::new(arch(&c, false), 7).unwrap();
    let [_, _, eb, _] = pinn_parts(&p.generalization_error(&net, EvalMode::Quadrature).unwrap());
    let rule = p.operator().rule();
    let time = p.grid().time();
    let mut sum = 0.0;
    for (&t, &wt) in time.nodes.iter().zip(&time.weights) {
        for i in 0..rule.len() {
            let rb = boundary_residual(&net, t, &[0.0], rule.node(i)).unwrap();
            sum += wt * rule.weights()[i] * rb * rb;
        }
    }
    // One sample per face, and d_x = 1 has two faces with the same residual.
    let expect = (2.0 * sum).sqrt();
    assert!(eb > 0.0);
    assert!((eb - expect).abs() < 1e-12 * expect, "{eb} vs {expect}");
}

#[test]
fn penalty_term_matches_input_hessians() {
    let c = small();
    let p = homogeneous(&c, false);
    let net = TanhNetwork::new(arch(&c, false), 3).unwrap();
    let [_, _, _, ep] = pinn_parts(&p.generalization_error(&net, EvalMode::Quadrature).unwrap());
    let rule = p.operator().rule();
    let grid = p.grid();
    let time = grid.time();
    let mut sum = 0.0;
    for (&t, &wt) in time.nodes.iter().zip(&time.weights) {
        for ix in 0..grid.x_len() {
            let x = grid.x_node(ix)[0];
            for i in 0..rule.len() {
                let xi = rule.node(i);
                let (u, g, h) = net.input_jet(&[t, x, xi[0], xi[1]], JetOrder::Second).unwrap();
                let mut s = u * u;
                for a in 1..4 {
                    s += g[a] * g[a];
                    for b in a..4 {
                        s += h[a][b] * h[a][b];
                    }
                }
                sum += wt * grid.x_weights()[ix] * rule.weights()[i] * s;
            }
        }
    }
    let expect = ((1.0 + c.weights.r).powf(c.weights.gamma) * sum).sqrt();
    assert!((ep - expect).abs() < 1e-10 * expect, "{ep} vs {expect}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn periodic_embedding_zeroes_boundary_term(seed in 0u64..1000, width in 2usize..12, mc in 0u64..1000) {
        let mut c = small();
        c.network.hidden = vec![width, width];
        let p = homogeneous(&c, true);
        let net = TanhNetwork::new(arch(&c, true), seed).unwrap();
        let [_, _, eb, _] = pinn_parts(&p.generalization_error(&net, EvalMode::Quadrature).unwrap());
        prop_assert_eq!(eb, 0.0);
        let [_, _, eb, _] = pinn_parts(&p.generalization_error(&net, EvalMode::MonteCarlo { seed: mc, n: 64 }).unwrap());
        prop_assert_eq!(eb, 0.0);
    }
}

/// Mean of `samples` is within `k` standard errors of `target`.
fn within_se(samples: &[f64], target: f64, k: f64) -> (bool, f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    ((mean - target).abs() <= k * se + 1e-14 * target.abs(), mean, se)
}

#[test]
fn pinn_monte_carlo_agrees_with_quadrature() {
    let c = small();
    let p = homogeneous(&c, true);
    let q = homogeneous(&c, false);
    let periodic = TanhNetwork::new(arch(&c, true), 11).unwrap();
    let plain = TanhNetwork::new(arch(&c, false), 12).unwrap();
    let exact_p = pinn_parts(&p.generalization_error(&periodic, EvalMode::Quadrature).unwrap());
    let exact_b = pinn_parts(&q.generalization_error(&plain, EvalMode::Quadrature).unwrap())[2];
    let mut comps = vec![Vec::new(); 4];
    for seed in 0..50 {
        let mode = EvalMode::MonteCarlo { seed, n: 256 };
        let a = pinn_parts(&p.generalization_error(&periodic, mode).unwrap());
        let b = pinn_parts(&q.generalization_error(&plain, mode).unwrap());
        comps[0].push(a[0] * a[0]);
        comps[1].push(a[1] * a[1]);
        comps[2].push(b[2] * b[2]);
        comps[3].push(a[3] * a[3]);
    }
    let targets = [exact_p[0], exact_p[1], exact_b, exact_p[3]].map(|v| v * v);
    for (k, name) in ["interior", "initial", "boundary", "penalty"].iter().enumerate() {
        let (ok, mean, se) = within_se(&comps[k], targets[k], 3.0);
        assert!(ok, "{name}: mean {mean} se {se} quadrature {}", targets[k]);
    }
}

fn apnn_config() -> RunConfig {
    let mut c = small();
    c.scenario.mode = Mode::Apnn;
    c
}

fn apnn_problem(c: &RunConfig, eps: f64, scaled: bool) -> ApnnProblem {
    let mut c = c.clone();
    c.network.scaled_micro = scaled;
    c.apnn(eps).unwrap()
}

#[test]
fn apnn_monte_carlo_agrees_with_quadrature() {
    let c = apnn_config();
    let p = apnn_problem(&c, 0.5, true);
    let nets = c.init_networks(Mode::Apnn, 5).unwrap();
    let exact = apnn_parts(&p.breakdown(&nets, EvalMode::Quadrature).unwrap()).map(|v| v * v);
    let mut comps = vec![Vec::new(); 5];
    for seed in 0..50 {
        let r = apnn_parts(&p.breakdown(&nets, EvalMode::MonteCarlo { seed, n: 128 }).unwrap());
        for k in 0..5 {
            comps[k].push(r[k] * r[k]);
        }
    }
    for k in 0..5 {
        let (ok, mean, se) = within_se(&comps[k], exact[k], 3.0);
        assert!(ok, "R{}: mean {mean} se {se} quadrature {}", k + 1, exact[k]);
    }
}

fn fd_check(objective: &dyn Objective, nets: &[TanhNetwork], seed: u64) {
    let batches = BatchSizes::uniform(128);
    let (_, grads) = objective
        .batch_loss(nets, &batches, &mut ChaCha8Rng::seed_from_u64(seed))
        .unwrap();
    let loss_at = |shift: &[Vec<f64>], h: f64| {
        let moved: Vec<TanhNetwork> = nets
            .iter()
            .zip(shift)
            .map(|(n, d)| {
                let mut m = n.clone();
                let p: Vec<f64> = n.params().iter().zip(d).map(|(a, b)| a + h * b).collect();
                m.set_params(&p).unwrap();
                m
            })
            .collect();
        objective
            .batch_loss(&moved, &batches, &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap()
            .0
    };
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..5 {
        let dir: Vec<Vec<f64>> = nets
            .iter()
            .map(|n| (0..n.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let analytic: f64 = grads
            .iter()
            .zip(&dir)
            .map(|(g, d)| g.iter().zip(d).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        let h = 1e-5;
        let fd = (loss_at(&dir, h) - loss_at(&dir, -h)) / (2.0 * h);
        let rel = (fd - analytic).abs() / analytic.abs().max(1e-12);
        assert!(rel < 1e-4, "directional derivative {analytic} vs finite difference {fd} (rel {rel})");
    }
}

#[test]
fn pinn_batch_gradient_matches_finite_differences() {
    let c = small();
    let setup = c.pinn().unwrap();
    let plain = PinnProblem::new(
        arch(&c, false),
        c.loss_weights().unwrap(),
        setup.problem.operator().clone(),
        c.space_time().unwrap(),
        setup.case.clone(),
    )
    .unwrap();
    fd_check(&plain, &[TanhNetwork::new(arch(&c, false), 21).unwrap()], 4);
    fd_check(&setup.problem, &[TanhNetwork::new(arch(&c, true), 22).unwrap()], 5);
}

#[test]
fn apnn_batch_gradient_matches_finite_differences() {
    let c = apnn_config();
    for scaled in [true, false] {
        let p = apnn_problem(&c, 0.3, scaled);
        let nets = c.init_networks(Mode::Apnn, 8).unwrap();
        fd_check(&p, &nets, 6);
    }
}

#[test]
fn manufactured_source_closes_the_equation_off_grid() {
    let c = small();
    for name in ["decay", "steady"] {
        let mut c = c.clone();
        c.scenario.case = name.into();
        let setup = c.pinn().unwrap();
        let case = &setup.case;
        let o = case.oracle();
        let side = c.weights.r;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..4 {
            let t = rng.random_range(0.0..c.weights.t_end);
            let x = [rng.random_range(-PI..PI)];
            let xi = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let h = 1e-5;
            let ut = (case.u_star(t + h, &x, &xi) - case.u_star(t - h, &x, &xi)) / (2.0 * h);
            let ux = (case.u_star(t, &[x[0] + h], &xi) - case.u_star(t, &[x[0] - h], &xi)) / (2.0 * h);
            let slice = |v: &[f64]| case.u_star(t, &x, v);
            let k = k_op(&slice, side, &o.kernel, &o.cube, &o.sphere, &xi).unwrap();
            let g = gamma_op(&slice, &slice, side, &o.kernel, &o.cube, &o.sphere, &xi).unwrap();
            let n = nu(&xi, &o.kernel, &o.cube, &o.sphere).unwrap();
            let r = ut + xi[0] * ux + n * case.u_star(t, &x, &xi) - k - g - case.source(t, &x, &xi);
            assert!(r.abs() < 1e-8, "{name}: residual {r} at t={t} x={x:?} xi={xi:?}");
        }
    }
}

#[test]
fn time_derivative_term_can_be_dropped() {
    let c = small();
    let op = c.collision_operator().unwrap();
    let oracle = || OracleRules::new(c.kernel().unwrap(), 2, c.weights.r, 16, 8).unwrap();
    let pts = [(0.1, [0.3], [0.5, -1.0]), (0.4, [-2.0], [2.5, 0.7])];
    let steady = ManufacturedCase::new("steady", &op, oracle()).unwrap();
    let stripped = ManufacturedCase::new("steady", &op, oracle()).unwrap().without_time_derivative();
    for (t, x, xi) in pts {
        assert_eq!(steady.source(t, &x, &xi), stripped.source(t, &x, &xi));
    }
    // decay: tau' = -tau, so the dropped term is -u*.
    let decay = ManufacturedCase::new("decay", &op, oracle()).unwrap();
    let stripped = ManufacturedCase::new("decay", &op, oracle()).unwrap().without_time_derivative();
    for (t, x, xi) in pts {
        let diff = decay.source(t, &x, &xi) - stripped.source(t, &x, &xi);
        assert!((diff + decay.u_star(t, &x, &xi)).abs() < 1e-14);
    }
}

#[test]
fn apnn_constant_fields_have_closed_form_residuals() {
    let c = apnn_config();
    let p = apnn_problem(&c, 0.2, true);
    let archs = p.architectures();
    let amp = c.scenario.rho_amplitude;
    let t_end = c.weights.t_end;

    // rho = 0, g = 0: only the initial density misfit survives.
    let zeros = [
        TanhNetwork::zeros(archs[0].clone()).unwrap(),
        TanhNetwork::zeros(archs[1].clone()).unwrap(),
    ];
    let r = apnn_parts(&p.breakdown(&zeros, EvalMode::Quadrature).unwrap());
    let r3 = (TAU * (1.0 + 0.5 * amp * amp)).sqrt();
    assert_eq!([r[0], r[1], r[3], r[4]], [0.0; 4]);
    assert!((r[2] - r3).abs() < 1e-12 * r3);

    // rho = 1, N = 1 so g = M: R5 is the squared discrete mass.
    let ones = [constant_net(archs[0].clone(), 1.0), constant_net(archs[1].clone(), 1.0)];
    let rule = p.rule();
    let mass: f64 = (0..rule.len()).map(|i| rule.weights()[i] * maxwellian(rule.node(i))).sum();
    let r = apnn_parts(&p.breakdown(&ones, EvalMode::Quadrature).unwrap());
    let r5 = mass * mass * (t_end * TAU).sqrt();
    assert!((r[4] - r5).abs() < 1e-12 * r5, "{} vs {r5}", r[4]);
    assert_eq!(r[0], 0.0);
    let at = p.residuals_at(&ones, 0.1, &[0.4]).unwrap();
    assert!((at.r3 - (1.0 - (1.0 + amp * 0.4f64.cos()))).abs() < 1e-15);
    for (i, &r4) in at.r4.iter().enumerate() {
        assert!((r4 - maxwellian(rule.node(i))).abs() < 1e-15);
    }
}

#[test]
fn apnn_micro_residual_is_quadratic_in_epsilon() {
    let c = apnn_config();
    let nets = c.init_networks(Mode::Apnn, 2).unwrap();
    let (t, x) = (0.2, [0.7]);
    let r2 = |eps: f64| apnn_problem(&c, eps, true).residuals_at(&nets, t, &x).unwrap().r2;
    let (a, b, d) = (r2(1.0), r2(2.0), r2(3.0));
    let e = r2(0.5);
    // Lagrange interpolation through eps = 1, 2, 3 evaluated at 1/2.
    let (l1, l2, l3) = (1.875, -1.25, 0.375);
    for i in 0..a.len() {
        let pred = l1 * a[i] + l2 * b[i] + l3 * d[i];
        assert!((pred - e[i]).abs() < 1e-10 * (1.0 + e[i].abs()), "node {i}: {pred} vs {}", e[i]);
    }
    // R1 does not depend on eps.
    let r1 = |eps: f64| apnn_problem(&c, eps, true).residuals_at(&nets, t, &x).unwrap().r1;
    assert_eq!(r1(1.0), r1(0.1));
}

#[test]
fn apnn_loss_of_reference_shrinks_under_refinement() {
    let c = apnn_config();
    let eps = 0.5;
    let p = apnn_problem(&c, eps, true);
    let amp = c.scenario.rho_amplitude;
    let f0 = move |x: f64, xi: &[f64]| (1.0 + amp * x.cos()) * maxwellian(xi);
    let mut prev = f64::INFINITY;
    for (cells, dt) in [(16, 0.02), (32, 0.01), (64, 0.005)] {
        let cfg = DvmConfig::new(eps, cells, dt, c.weights.t_end);
        let traj = dvm_solve(&cfg, p.rule().clone(), &f0).unwrap();
        let eg = p.field_breakdown(&traj.field(), EvalMode::Quadrature).unwrap().eg_total();
        assert!(eg < prev, "E_G {eg} did not decrease from {prev} at {cells} cells");
        prev = eg;
    }
}

#[test]
fn apnn_rejects_nonpositive_epsilon() {
    let c = apnn_config();
    let a = c.architecture(Mode::Apnn);
    let initial = ApnnInitial::well_prepared("one", Arc::new(|_: &[f64]| 1.0));
    let err = ApnnProblem::new(
        &a,
        0.0,
        &AlphaKernel::constant(1.0).unwrap(),
        c.ap_study().rule().unwrap(),
        c.space_time().unwrap(),
        initial,
        true,
    );
    assert!(err.is_err());
}

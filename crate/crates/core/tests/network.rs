use kinpinn::network::{Architecture, JetBatch, JetOrder, TanhNetwork};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn arch(hidden: Vec<usize>, periodic: bool) -> Architecture {
    Architecture {
        dx: 1,
        dxi: 2,
        hidden,
        periodic,
    }
}

fn random_point(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..4).map(|_| rng.random_range(-1.5..1.5)).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

#[test]
fn affine_network_has_zero_hessian() {
    // No hidden nonlinearity can be avoided, so zero the first layer: the
    // output is then an affine function of constant features.
    let mut net = TanhNetwork::new(arch(vec![5], false), 2).unwrap();
    let mut p = net.params();
    for v in p.iter_mut().take(5 * 4) {
        *v = 0.0;
    }
    net.set_params(&p).unwrap();
    let (_, g, h) = net.input_jet(&[0.1, 0.2, 0.3, 0.4], JetOrder::Second).unwrap();
    assert!(g.iter().all(|&v| v == 0.0));
    assert!(h.iter().flatten().all(|&v| v == 0.0));
}

#[test]
fn jets_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for periodic in [false, true] {
        let net = TanhNetwork::new(arch(vec![40, 40, 40, 40], periodic), 17).unwrap();
        for _ in 0..5 {
            let p = random_point(&mut rng);
            let (v, g, h) = net.input_jet(&p, JetOrder::Second).unwrap();
            assert!((v - net.forward(&p).unwrap()).abs() < 1e-14);
            let step = 1e-4;
            for k in 0..4 {
                let mut pp = p.clone();
                pp[k] += step;
                let mut pm = p.clone();
                pm[k] -= step;
                let fd = (net.forward(&pp).unwrap() - net.forward(&pm).unwrap()) / (2.0 * step);
                assert!(rel(fd, g[k]) < 1e-5, "grad {k}: {fd} vs {}", g[k]);
                let (_, gp, _) = net.input_jet(&pp, JetOrder::First).unwrap();
                let (_, gm, _) = net.input_jet(&pm, JetOrder::First).unwrap();
                for l in 0..4 {
                    let fd2 = (gp[l] - gm[l]) / (2.0 * step);
                    assert!(rel(fd2, h[k][l]) < 1e-5, "hess {k}{l}: {fd2} vs {}", h[k][l]);
                    assert!((h[k][l] - h[l][k]).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn batched_jets_agree_with_single_point_jets() {
    let net = TanhNetwork::new(arch(vec![8, 8], true), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 300;
    let pts: Vec<f64> = (0..n).flat_map(|_| random_point(&mut rng)).collect();
    let dirs = [1usize, 2, 3];
    let (batch, _) = net.jets(&pts, &dirs, JetOrder::Second).unwrap();
    for i in [0usize, 127, 128, 299] {
        let (v, g, h) = net.input_jet(&pts[i * 4..i * 4 + 4], JetOrder::Second).unwrap();
        assert!((batch.value(i) - v).abs() < 1e-14);
        for (k, &dk) in dirs.iter().enumerate() {
            assert!((batch.first(i, k) - g[dk]).abs() < 1e-13);
            for (l, &dl) in dirs.iter().enumerate() {
                assert!((batch.second(i, k, l) - h[dk][dl]).abs() < 1e-13);
            }
        }
    }
}

fn seeded_loss(net: &TanhNetwork, pts: &[f64], dirs: &[usize], seeds: &JetBatch, order: JetOrder) -> f64 {
    let (b, _) = net.jets(pts, dirs, order).unwrap();
    b.data().iter().zip(seeds.data()).map(|(a, s)| a * s).sum()
}

#[test]
fn output_bias_gradient_is_one() {
    let net = TanhNetwork::new(arch(vec![4, 4], true), 1).unwrap();
    let (_, trace) = net.jets(&[0.0, 0.1, 0.2, 0.3], &[], JetOrder::Value).unwrap();
    let mut seeds = JetBatch::zeros(1, 0, JetOrder::Value);
    *seeds.value_mut(0) = 1.0;
    let g = net.backward(&trace, &seeds).unwrap();
    assert_eq!(*g.last().unwrap(), 1.0);
}

#[test]
fn parameter_gradient_directional_derivatives() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for order in [JetOrder::Value, JetOrder::First, JetOrder::Second] {
        let net = TanhNetwork::new(arch(vec![40, 40, 40, 40], true), 4).unwrap();
        let n = 150;
        let pts: Vec<f64> = (0..n).flat_map(|_| random_point(&mut rng)).collect();
        let dirs = [0usize, 1, 2, 3];
        let (b, trace) = net.jets(&pts, &dirs, order).unwrap();
        let mut seeds = JetBatch::zeros(n, dirs.len(), order);
        let count = b.data().len();
        let raw: Vec<f64> = (0..count).map(|_| rng.random_range(-1.0..1.0)).collect();
        for i in 0..n {
            *seeds.value_mut(i) = raw[i];
            if order >= JetOrder::First {
                for k in 0..4 {
                    *seeds.first_mut(i, k) = raw[(1 + k) * n + i];
                }
            }
            if order == JetOrder::Second {
                for k in 0..4 {
                    for l in k..4 {
                        *seeds.second_mut(i, k, l) = raw[(5 + k * 4 + l) % count];
                    }
                }
            }
        }
        let grad = net.backward(&trace, &seeds).unwrap();
        let p0 = net.params();
        for _ in 0..5 {
            let dir: Vec<f64> = (0..p0.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let analytic: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            let h = 1e-5;
            let shifted = |s: f64| {
                let mut m = net.clone();
                let p: Vec<f64> = p0.iter().zip(&dir).map(|(p, d)| p + s * d).collect();
                m.set_params(&p).unwrap();
                seeded_loss(&m, &pts, &dirs, &seeds, order)
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            assert!(rel(fd, analytic) < 1e-4, "{order:?}: {fd} vs {analytic}");
        }
    }
}

#[test]
fn periodic_faces_are_bitwise_equal() {
    let net = TanhNetwork::new(arch(vec![6, 6], true), 8).unwrap();
    let pi = std::f64::consts::PI;
    for &(t, a, b) in &[(0.1, 0.3, -1.2), (0.45, -2.0, 2.0)] {
        assert_eq!(
            net.forward(&[t, pi, a, b]).unwrap().to_bits(),
            net.forward(&[t, -pi, a, b]).unwrap().to_bits()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hessian_is_symmetric(seed in 0u64..1000, t in -1.0f64..1.0, x in -3.0f64..3.0, v in -3.0f64..3.0, w in -3.0f64..3.0) {
        let net = TanhNetwork::new(arch(vec![10, 10, 10], true), seed).unwrap();
        let (_, _, h) = net.input_jet(&[t, x, v, w], JetOrder::Second).unwrap();
        for k in 0..4 {
            for l in 0..4 {
                prop_assert!((h[k][l] - h[l][k]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn same_seed_same_network(seed in 0u64..10_000) {
        let a = TanhNetwork::new(arch(vec![5, 5], false), seed).unwrap();
        let b = TanhNetwork::new(arch(vec![5, 5], false), seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

//! Residuals and the generalization error for the perturbation equation
//!
//! `u_t + xi . grad_x u + nu u - K u - Gamma(u, u) = S`
//!
//! on `[0, T] x T^{d_x} x Q_R`. The velocity integral always uses the nodes
//! of the assembled collision operator; only `(t, x)` are quadrature or
//! Monte Carlo variables.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use ndarray::ArrayView1;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_nets, BatchSizes, EvalMode, LossBreakdown, LossWeights, Objective, PinnBreakdown};
use crate::error::{check_len, Error, Result};
use crate::kinetic::{gamma_op, k_op, nu, AssembledCollision, CollisionKernel};
use crate::network::{Architecture, JetBatch, JetOrder, TanhNetwork};
use crate::par;
use crate::quadrature::{Rule, SphereRule, SpaceTimeGrid, VelocityQuadrature};

/// Initial data and source of a PINN problem.
pub trait PinnScenario: Send + Sync {
    fn label(&self) -> String;

    fn initial(&self, x: &[f64], xi: &[f64]) -> f64;

    /// `S(t, x, .)` at every node of the operator the scenario was built for.
    fn source_at_nodes(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// `S(t, x, xi)` at an arbitrary velocity.
    fn source(&self, t: f64, x: &[f64], xi: &[f64]) -> f64;
}

/// Source-free problem with the given initial data.
pub struct Homogeneous<F> {
    label: String,
    initial: F,
}

impl<F: Fn(&[f64], &[f64]) -> f64 + Send + Sync> Homogeneous<F> {
    pub fn new(label: impl Into<String>, initial: F) -> Self {
        Self {
            label: label.into(),
            initial,
        }
    }
}

impl<F: Fn(&[f64], &[f64]) -> f64 + Send + Sync> PinnScenario for Homogeneous<F> {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn initial(&self, x: &[f64], xi: &[f64]) -> f64 {
        (self.initial)(x, xi)
    }

    fn source_at_nodes(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn source(&self, _t: f64, _x: &[f64], _xi: &[f64]) -> f64 {
        0.0
    }
}

fn raw_point(t: f64, x: &[f64], xi: &[f64]) -> Vec<f64> {
    let mut p = Vec::with_capacity(1 + x.len() + xi.len());
    p.push(t);
    p.extend_from_slice(x);
    p.extend_from_slice(xi);
    p
}

fn check_net_dims(net: &TanhNetwork, dx: usize, dxi: usize) -> Result<()> {
    let a = net.architecture();
    check_len(a.dx, dx)?;
    check_len(a.dxi, dxi)
}

/// Pointwise interior residual at `(t, x, xi)`, with `K` and `Gamma` applied
/// to `u(t, x, .)` truncated to `Q_R` and integrated with `cube` and
/// `sphere`.
#[allow(clippy::too_many_arguments)]
pub fn pde_residual(
    net: &TanhNetwork,
    t: f64,
    x: &[f64],
    xi: &[f64],
    kernel: &CollisionKernel,
    cube: &VelocityQuadrature,
    sphere: &SphereRule,
    source: Option<&dyn Fn(f64, &[f64], &[f64]) -> f64>,
) -> Result<f64> {
    check_net_dims(net, x.len(), xi.len())?;
    if !cube.contains(xi) {
        return Err(Error::InvalidArgument(format!("velocity {xi:?} lies outside Q_R")));
    }
    if x.len() > xi.len() {
        return Err(Error::Dimension(x.len()));
    }
    let arch = net.architecture();
    let (u, grad, _) = net.input_jet(&raw_point(t, x, xi), JetOrder::First)?;
    let mut transport = grad[0];
    for (i, &v) in xi.iter().take(x.len()).enumerate() {
        transport += v * grad[arch.x_index(i)];
    }
    let slice = |v: &[f64]| net.forward(&raw_point(t, x, v)).unwrap_or(f64::NAN);
    let side = cube.side();
    let k = k_op(&slice, side, kernel, cube, sphere, xi)?;
    let g = gamma_op(&slice, &slice, side, kernel, cube, sphere, xi)?;
    let s = source.map_or(0.0, |f| f(t, x, xi));
    Ok(transport + nu(xi, kernel, cube, sphere)? * u - k - g - s)
}

/// `u(0, x, xi) - u0(x, xi)`.
pub fn initial_residual(net: &TanhNetwork, x: &[f64], xi: &[f64], u0: &dyn Fn(&[f64], &[f64]) -> f64) -> Result<f64> {
    check_net_dims(net, x.len(), xi.len())?;
    Ok(net.forward(&raw_point(0.0, x, xi))? - u0(x, xi))
}

/// `sum_i (u|_{x_i = pi} - u|_{x_i = -pi})^2`. Already a square.
pub fn boundary_residual(net: &TanhNetwork, t: f64, x: &[f64], xi: &[f64]) -> Result<f64> {
    check_net_dims(net, x.len(), xi.len())?;
    let mut sum = 0.0;
    let mut y = x.to_vec();
    for i in 0..x.len() {
        y[i] = PI;
        let plus = net.forward(&raw_point(t, &y, xi))?;
        y[i] = -PI;
        let minus = net.forward(&raw_point(t, &y, xi))?;
        y[i] = x[i];
        sum += (plus - minus).powi(2);
    }
    Ok(sum)
}

/// `(int int int |u_ref - u|^2)^(1/2)` with `grid` in `(t, x)` and `rule` in
/// velocity.
pub fn total_error(
    net: &TanhNetwork,
    u_ref: &(dyn Fn(f64, &[f64], &[f64]) -> f64 + Sync),
    grid: &SpaceTimeGrid,
    rule: &VelocityQuadrature,
) -> Result<f64> {
    check_net_dims(net, grid.dx(), rule.dim())?;
    let nv = rule.len();
    let nx = grid.x_len();
    let time = grid.time();
    let mut total = 0.0;
    for (&t, &wt) in time.nodes.iter().zip(&time.weights) {
        let mut pts = Vec::with_capacity(nx * nv * net.architecture().input_dim());
        for ix in 0..nx {
            for i in 0..nv {
                pts.extend(raw_point(t, grid.x_node(ix), rule.node(i)));
            }
        }
        let vals = net.eval_jets(&pts, &[], JetOrder::Value)?;
        let per_x = par::map_indexed(nx, |ix| {
            let x = grid.x_node(ix);
            let mut s = 0.0;
            for i in 0..nv {
                let d = u_ref(t, x, rule.node(i)) - vals.value(ix * nv + i);
                s += rule.weights()[i] * d * d;
            }
            s * grid.x_weights()[ix]
        });
        total += wt * per_x.iter().sum::<f64>();
    }
    Ok(total.sqrt())
}

/// One `(t, x)` point, or `(t, x, node)` where a velocity node is attached,
/// with its quadrature or Monte Carlo weight.
#[derive(Clone, Debug)]
struct Sample {
    t: f64,
    x: Vec<f64>,
    node: usize,
    scale: f64,
}

#[derive(Clone, Debug, Default)]
struct SampleSet {
    interior: Vec<Sample>,
    initial: Vec<Sample>,
    boundary: Vec<Sample>,
    penalty: Vec<Sample>,
}

impl SampleSet {
    fn count(&self, nv: usize) -> usize {
        self.interior.len() * nv + self.initial.len() + self.boundary.len() + self.penalty.len()
    }
}

/// Squared components `(E_i^2, E_t^2, E_b^2, E_p^2)`.
#[derive(Clone, Copy, Debug, Default)]
struct Squares {
    interior: f64,
    initial: f64,
    boundary: f64,
    penalty: f64,
}

/// The PINN loss for one operator, scenario and `(t, x)` rule.
pub struct PinnProblem {
    arch: Architecture,
    weights: LossWeights,
    op: Arc<AssembledCollision>,
    grid: SpaceTimeGrid,
    scenario: Arc<dyn PinnScenario>,
    node_sampler: WeightedIndex<f64>,
    node_mass: f64,
}

impl PinnProblem {
    pub fn new(
        arch: Architecture,
        weights: LossWeights,
        op: Arc<AssembledCollision>,
        grid: SpaceTimeGrid,
        scenario: Arc<dyn PinnScenario>,
    ) -> Result<Self> {
        arch.validate()?;
        weights.validate()?;
        let rule = op.rule();
        check_len(rule.dim(), arch.dxi)?;
        check_len(grid.dx(), arch.dx)?;
        if arch.dx > arch.dxi {
            return Err(Error::Dimension(arch.dx));
        }
        if (weights.r - rule.side()).abs() > 1e-12 * rule.side() {
            return Err(Error::InvalidArgument(format!(
                "loss weights use R = {} but the velocity rule has side {}",
                weights.r,
                rule.side()
            )));
        }
        if (weights.t_end - grid.t_end()).abs() > 1e-12 * grid.t_end() {
            return Err(Error::InvalidArgument(format!(
                "loss weights use T = {} but the space-time grid ends at {}",
                weights.t_end,
                grid.t_end()
            )));
        }
        let node_sampler =
            WeightedIndex::new(rule.weights()).map_err(|e| Error::InvalidArgument(format!("velocity weights: {e}")))?;
        let node_mass = rule.weights().iter().sum();
        Ok(Self {
            arch,
            weights,
            op,
            grid,
            scenario,
            node_sampler,
            node_mass,
        })
    }

    pub fn weights(&self) -> &LossWeights {
        &self.weights
    }

    pub fn operator(&self) -> &Arc<AssembledCollision> {
        &self.op
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn scenario(&self) -> &Arc<dyn PinnScenario> {
        &self.scenario
    }

    fn penalty_factor(&self) -> f64 {
        (1.0 + self.weights.r).powf(self.weights.gamma)
    }

    fn rule_label(&self) -> String {
        format!("{}_{}", self.grid.label(), self.op.rule().label())
    }

    fn point(&self, t: f64, x: &[f64], node: usize, out: &mut Vec<f64>) {
        out.push(t);
        out.extend_from_slice(x);
        out.extend_from_slice(self.op.rule().node(node));
    }

    fn quadrature_samples(&self) -> SampleSet {
        let rule = self.op.rule();
        let w = rule.weights();
        let time = self.grid.time();
        let dx = self.arch.dx;
        let mut set = SampleSet::default();
        for (&t, &wt) in time.nodes.iter().zip(&time.weights) {
            for ix in 0..self.grid.x_len() {
                let x = self.grid.x_node(ix).to_vec();
                let wx = self.grid.x_weights()[ix];
                set.interior.push(Sample {
                    t,
                    x: x.clone(),
                    node: 0,
                    scale: wt * wx,
                });
                for (i, &wi) in w.iter().enumerate() {
                    set.penalty.push(Sample {
                        t,
                        x: x.clone(),
                        node: i,
                        scale: wt * wx * wi,
                    });
                }
            }
        }
        for ix in 0..self.grid.x_len() {
            let x = self.grid.x_node(ix);
            for (i, &wi) in w.iter().enumerate() {
                set.initial.push(Sample {
                    t: 0.0,
                    x: x.to_vec(),
                    node: i,
                    scale: self.grid.x_weights()[ix] * wi,
                });
            }
        }
        // Faces x_a = +-pi; the remaining coordinates use the periodic axis.
        let axis = self.grid.space_axis();
        let na = axis.nodes.len();
        let face_points = na.pow(dx.saturating_sub(1) as u32);
        for a in 0..dx {
            for side in [PI, -PI] {
                for (&t, &wt) in time.nodes.iter().zip(&time.weights) {
                    for f in 0..face_points {
                        let mut x = Vec::with_capacity(dx);
                        let mut wf = 1.0;
                        let mut rest = f;
                        for b in 0..dx {
                            if b == a {
                                x.push(side);
                            } else {
                                let k = rest % na;
                                rest /= na;
                                x.push(axis.nodes[k]);
                                wf *= axis.weights[k];
                            }
                        }
                        for (i, &wi) in w.iter().enumerate() {
                            set.boundary.push(Sample {
                                t,
                                x: x.clone(),
                                node: i,
                                scale: wt * wf * wi,
                            });
                        }
                    }
                }
            }
        }
        set
    }

    fn random_samples(&self, rng: &mut ChaCha8Rng, batches: &BatchSizes) -> SampleSet {
        let dx = self.arch.dx;
        let t_end = self.weights.t_end;
        let nv = self.op.len();
        let volume = TAU.powi(dx as i32);
        let mut set = SampleSet::default();
        let uniform_x = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dx).map(|_| rng.random_range(-PI..PI)).collect() };

        let slices = (batches.interior / nv).max(1);
        for _ in 0..slices {
            let t = rng.random_range(0.0..t_end);
            let x = uniform_x(rng);
            set.interior.push(Sample {
                t,
                x,
                node: 0,
                scale: t_end * volume / slices as f64,
            });
        }
        if batches.initial > 0 {
            let scale = volume * self.node_mass / batches.initial as f64;
            for _ in 0..batches.initial {
                let x = uniform_x(rng);
                let node = self.node_sampler.sample(rng);
                set.initial.push(Sample { t: 0.0, x, node, scale });
            }
        }
        if batches.boundary > 0 && dx > 0 {
            let faces = 2 * dx;
            let scale = t_end * faces as f64 * TAU.powi(dx as i32 - 1) * self.node_mass / batches.boundary as f64;
            for _ in 0..batches.boundary {
                let t = rng.random_range(0.0..t_end);
                let mut x = uniform_x(rng);
                let face = rng.random_range(0..faces);
                x[face / 2] = if face % 2 == 0 { PI } else { -PI };
                let node = self.node_sampler.sample(rng);
                set.boundary.push(Sample { t, x, node, scale });
            }
        }
        if batches.constraint > 0 {
            let scale = t_end * volume * self.node_mass / batches.constraint as f64;
            for _ in 0..batches.constraint {
                let t = rng.random_range(0.0..t_end);
                let x = uniform_x(rng);
                let node = self.node_sampler.sample(rng);
                set.penalty.push(Sample { t, x, node, scale });
            }
        }
        set
    }

    /// Sum over slices of `scale * sum_i w_i r_i^2`; with `grad`, adds
    /// `mult` times its parameter gradient.
    fn interior(&self, net: &TanhNetwork, slices: &[Sample], grad: Option<(&mut [f64], f64)>) -> Result<f64> {
        if slices.is_empty() {
            return Ok(0.0);
        }
        let rule = self.op.rule();
        let nv = rule.len();
        let dx = self.arch.dx;
        let mut pts = Vec::with_capacity(slices.len() * nv * self.arch.input_dim());
        for s in slices {
            for i in 0..nv {
                self.point(s.t, &s.x, i, &mut pts);
            }
        }
        let dirs: Vec<usize> = std::iter::once(0).chain((0..dx).map(|i| self.arch.x_index(i))).collect();
        let want_grad = grad.is_some();
        let (batch, trace) = if want_grad {
            let (b, t) = net.jets(&pts, &dirs, JetOrder::First)?;
            (b, Some(t))
        } else {
            (net.eval_jets(&pts, &dirs, JetOrder::First)?, None)
        };
        let w = rule.weights();
        let nu = self.op.nu();
        let mult = grad.as_ref().map_or(0.0, |g| g.1);
        let per_slice = par::map_indexed(slices.len(), |s| {
            let base = s * nv;
            let u: Vec<f64> = (0..nv).map(|i| batch.value(base + i)).collect();
            let ku = self.op.apply_k(&u);
            let gu = self.op.gamma_diag(&u);
            let mut src = vec![0.0; nv];
            self.scenario.source_at_nodes(slices[s].t, &slices[s].x, &mut src);
            let r: Vec<f64> = (0..nv)
                .map(|i| {
                    let xi = rule.node(i);
                    let mut v = batch.first(base + i, 0);
                    for k in 0..dx {
                        v += xi[k] * batch.first(base + i, 1 + k);
                    }
                    v + nu[i] * u[i] - ku[i] - gu[i] - src[i]
                })
                .collect();
            let sum: f64 = (0..nv).map(|i| w[i] * r[i] * r[i]).sum();
            let seeds = want_grad.then(|| {
                let scale = 2.0 * mult * slices[s].scale;
                let rbar: Vec<f64> = (0..nv).map(|i| scale * w[i] * r[i]).collect();
                let kt = self.op.k_matrix().t().dot(&ArrayView1::from(&rbar));
                let mut gadj = vec![0.0; nv];
                self.op.gamma_diag_adjoint(&u, &rbar, &mut gadj);
                let value: Vec<f64> = (0..nv).map(|i| nu[i] * rbar[i] - kt[i] - gadj[i]).collect();
                (value, rbar)
            });
            (slices[s].scale * sum, seeds)
        });
        let mut total = 0.0;
        let mut seeds = want_grad.then(|| JetBatch::zeros(batch.len(), dirs.len(), JetOrder::First));
        for (s, (v, sd)) in per_slice.into_iter().enumerate() {
            total += v;
            if let (Some(seeds), Some((value, rbar))) = (seeds.as_mut(), sd) {
                let base = s * nv;
                for i in 0..nv {
                    *seeds.value_mut(base + i) = value[i];
                    *seeds.first_mut(base + i, 0) = rbar[i];
                    let xi = rule.node(i);
                    for k in 0..dx {
                        *seeds.first_mut(base + i, 1 + k) = xi[k] * rbar[i];
                    }
                }
            }
        }
        if let (Some((g, _)), Some(trace), Some(seeds)) = (grad, trace, seeds) {
            add_into(g, &net.backward(&trace, &seeds)?);
        }
        Ok(total)
    }

    fn initial_term(&self, net: &TanhNetwork, samples: &[Sample], grad: Option<(&mut [f64], f64)>) -> Result<f64> {
        if samples.is_empty() {
            return Ok(0.0);
        }
        let rule = self.op.rule();
        let mut pts = Vec::with_capacity(samples.len() * self.arch.input_dim());
        for s in samples {
            self.point(0.0, &s.x, s.node, &mut pts);
        }
        let diffs = par::map_indexed(samples.len(), |k| {
            let s = &samples[k];
            self.scenario.initial(&s.x, rule.node(s.node))
        });
        let (batch, trace) = eval(net, &pts, &[], JetOrder::Value, grad.is_some())?;
        let mut total = 0.0;
        let mut seeds = grad.as_ref().map(|_| JetBatch::zeros(samples.len(), 0, JetOrder::Value));
        for (k, s) in samples.iter().enumerate() {
            let d = batch.value(k) - diffs[k];
            total += s.scale * d * d;
            if let (Some(seeds), Some((_, mult))) = (seeds.as_mut(), grad.as_ref()) {
                *seeds.value_mut(k) = 2.0 * mult * s.scale * d;
            }
        }
        if let (Some((g, _)), Some(trace), Some(seeds)) = (grad, trace, seeds) {
            add_into(g, &net.backward(&trace, &seeds)?);
        }
        Ok(total)
    }

    fn boundary_term(&self, net: &TanhNetwork, samples: &[Sample], grad: Option<(&mut [f64], f64)>) -> Result<f64> {
        let dx = self.arch.dx;
        if samples.is_empty() || dx == 0 {
            return Ok(0.0);
        }
        // Paired layouts: entry `k * dx + j` of each array is sample `k` with
        // `x_j` replaced by `+pi` or `-pi`, so identical features give
        // identical values.
        let mut plus = Vec::with_capacity(samples.len() * dx * self.arch.input_dim());
        let mut minus = Vec::with_capacity(plus.capacity());
        for s in samples {
            for j in 0..dx {
                let mut x = s.x.clone();
                x[j] = PI;
                self.point(s.t, &x, s.node, &mut plus);
                x[j] = -PI;
                self.point(s.t, &x, s.node, &mut minus);
            }
        }
        let want = grad.is_some();
        let (bp, tp) = eval(net, &plus, &[], JetOrder::Value, want)?;
        let (bm, tm) = eval(net, &minus, &[], JetOrder::Value, want)?;
        let mut total = 0.0;
        let n = samples.len() * dx;
        let mut sp = want.then(|| JetBatch::zeros(n, 0, JetOrder::Value));
        let mut sm = want.then(|| JetBatch::zeros(n, 0, JetOrder::Value));
        for (k, s) in samples.iter().enumerate() {
            let rb: f64 = (0..dx).map(|j| (bp.value(k * dx + j) - bm.value(k * dx + j)).powi(2)).sum();
            total += s.scale * rb * rb;
            if let (Some(sp), Some(sm), Some((_, mult))) = (sp.as_mut(), sm.as_mut(), grad.as_ref()) {
                for j in 0..dx {
                    let i = k * dx + j;
                    let d = bp.value(i) - bm.value(i);
                    let c = mult * s.scale * 4.0 * rb * d;
                    *sp.value_mut(i) = c;
                    *sm.value_mut(i) = -c;
                }
            }
        }
        if let (Some((g, _)), Some(tp), Some(tm), Some(sp), Some(sm)) = (grad, tp, tm, sp, sm) {
            add_into(g, &net.backward(&tp, &sp)?);
            add_into(g, &net.backward(&tm, &sm)?);
        }
        Ok(total)
    }

    /// `(1 + R)^gamma` times the weighted sum of squared jets up to order two
    /// in `(x, xi)`, each unordered pair of directions counted once.
    fn penalty_term(&self, net: &TanhNetwork, samples: &[Sample], grad: Option<(&mut [f64], f64)>) -> Result<f64> {
        if samples.is_empty() {
            return Ok(0.0);
        }
        let mut pts = Vec::with_capacity(samples.len() * self.arch.input_dim());
        for s in samples {
            self.point(s.t, &s.x, s.node, &mut pts);
        }
        let dirs: Vec<usize> = (0..self.arch.dx)
            .map(|i| self.arch.x_index(i))
            .chain((0..self.arch.dxi).map(|i| self.arch.xi_index(i)))
            .collect();
        let m = dirs.len();
        let (batch, trace) = eval(net, &pts, &dirs, JetOrder::Second, grad.is_some())?;
        let factor = self.penalty_factor();
        let mut total = 0.0;
        let mut seeds = grad.as_ref().map(|_| JetBatch::zeros(samples.len(), m, JetOrder::Second));
        for (k, s) in samples.iter().enumerate() {
            let mut sq = batch.value(k).powi(2);
            for a in 0..m {
                sq += batch.first(k, a).powi(2);
                for b in a..m {
                    sq += batch.second(k, a, b).powi(2);
                }
            }
            total += s.scale * sq;
            if let (Some(seeds), Some((_, mult))) = (seeds.as_mut(), grad.as_ref()) {
                let c = 2.0 * mult * factor * s.scale;
                *seeds.value_mut(k) = c * batch.value(k);
                for a in 0..m {
                    *seeds.first_mut(k, a) = c * batch.first(k, a);
                    for b in a..m {
                        *seeds.second_mut(k, a, b) = c * batch.second(k, a, b);
                    }
                }
            }
        }
        if let (Some((g, _)), Some(trace), Some(seeds)) = (grad, trace, seeds) {
            add_into(g, &net.backward(&trace, &seeds)?);
        }
        Ok(factor * total)
    }

    fn squares(&self, net: &TanhNetwork, set: &SampleSet, mut grad: Option<&mut [f64]>) -> Result<Squares> {
        let lambda = self.weights.lambda_r;
        Ok(Squares {
            interior: self.interior(net, &set.interior, grad.as_deref_mut().map(|g| (g, 1.0)))?,
            initial: self.initial_term(net, &set.initial, grad.as_deref_mut().map(|g| (g, 1.0)))?,
            boundary: self.boundary_term(net, &set.boundary, grad.as_deref_mut().map(|g| (g, 1.0)))?,
            penalty: self.penalty_term(net, &set.penalty, grad.as_deref_mut().map(|g| (g, lambda)))?,
        })
    }

    fn breakdown_of(&self, sq: Squares, samples: usize, rule: String) -> LossBreakdown {
        let (eg_i, eg_t, eg_b, eg_p) = (
            sq.interior.sqrt(),
            sq.initial.sqrt(),
            sq.boundary.sqrt(),
            sq.penalty.sqrt(),
        );
        let lambda_r = self.weights.lambda_r;
        LossBreakdown::Pinn(PinnBreakdown {
            eg_i,
            eg_t,
            eg_b,
            eg_p,
            lambda_r,
            eg_total: PinnBreakdown::aggregate(eg_i, eg_t, eg_b, eg_p, lambda_r),
            samples,
            rule,
        })
    }

    /// Deterministic or Monte Carlo breakdown of `E_G` for one network.
    pub fn generalization_error(&self, net: &TanhNetwork, mode: EvalMode) -> Result<LossBreakdown> {
        check_nets(std::slice::from_ref(net), std::slice::from_ref(&self.arch))?;
        let (set, label) = match mode {
            EvalMode::Quadrature => (self.quadrature_samples(), self.rule_label()),
            EvalMode::MonteCarlo { seed, n } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (
                    self.random_samples(&mut rng, &BatchSizes::uniform(n)),
                    format!("mc{n}@{seed}_{}", self.op.rule().label()),
                )
            }
        };
        let sq = self.squares(net, &set, None)?;
        Ok(self.breakdown_of(sq, set.count(self.op.len()), label))
    }

    /// Total error against a reference on the problem's own rules.
    pub fn total_error(&self, net: &TanhNetwork, u_ref: &(dyn Fn(f64, &[f64], &[f64]) -> f64 + Sync)) -> Result<f64> {
        total_error(net, u_ref, &self.grid, self.op.rule())
    }
}

fn eval(
    net: &TanhNetwork,
    pts: &[f64],
    dirs: &[usize],
    order: JetOrder,
    keep: bool,
) -> Result<(JetBatch, Option<crate::network::JetTrace>)> {
    if keep {
        let (b, t) = net.jets(pts, dirs, order)?;
        Ok((b, Some(t)))
    } else {
        Ok((net.eval_jets(pts, dirs, order)?, None))
    }
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += b;
    }
}

impl Objective for PinnProblem {
    fn architectures(&self) -> Vec<Architecture> {
        vec![self.arch.clone()]
    }

    fn batch_loss(&self, nets: &[TanhNetwork], batches: &BatchSizes, rng: &mut ChaCha8Rng) -> Result<(f64, Vec<Vec<f64>>)> {
        check_nets(nets, std::slice::from_ref(&self.arch))?;
        let set = self.random_samples(rng, batches);
        let mut grad = vec![0.0; nets[0].param_count()];
        let sq = self.squares(&nets[0], &set, Some(&mut grad))?;
        let loss = sq.interior + sq.initial + sq.boundary + self.weights.lambda_r * sq.penalty;
        Ok((loss, vec![grad]))
    }

    fn breakdown(&self, nets: &[TanhNetwork], mode: EvalMode) -> Result<LossBreakdown> {
        check_nets(nets, std::slice::from_ref(&self.arch))?;
        self.generalization_error(&nets[0], mode)
    }
}

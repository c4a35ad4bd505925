//! Residuals of the micro-macro system
//!
//! `rho_t + div_x int xi g = 0`,
//! `eps^2 g_t + eps P1(xi . grad_x g) + xi . grad_x rho M = L(g)`,
//!
//! and the associated generalization and total errors. Two networks are
//! trained: `rho(t, x)` and `g(t, x, xi)`; optionally `g = M N` with `N` the
//! network, which puts the network output on the scale of the `1/M`
//! weighted norms.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_nets, ApnnBreakdown, BatchSizes, EvalMode, LossBreakdown, Objective};
use crate::error::{check_len, Error, Result};
use crate::kinetic::{AlphaKernel, RelaxationMatrix};
use crate::network::{Architecture, JetBatch, JetOrder, JetTrace, TanhNetwork};
use crate::par;
use crate::quadrature::{Rule, SpaceTimeGrid, VelocityQuadrature};
use crate::reference::{DiffusionSolution, DvmTrajectory};

/// `rho`, `g` and their `t` and `x` derivatives at one `(t, x)` and every
/// velocity node. `g_x[k * n_v + i]` is `d g / d x_k` at node `i`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SliceFields {
    pub rho: f64,
    pub rho_t: f64,
    pub rho_x: Vec<f64>,
    pub g: Vec<f64>,
    pub g_t: Vec<f64>,
    pub g_x: Vec<f64>,
}

impl SliceFields {
    fn zeros(dx: usize, nv: usize) -> Self {
        Self {
            rho: 0.0,
            rho_t: 0.0,
            rho_x: vec![0.0; dx],
            g: vec![0.0; nv],
            g_t: vec![0.0; nv],
            g_x: vec![0.0; dx * nv],
        }
    }
}

/// Anything that can supply macro and micro fields, e.g. an interpolated
/// reference trajectory.
pub trait MacroMicroField: Sync {
    fn fields(&self, t: f64, x: &[f64]) -> SliceFields;
}

/// Residual values at one `(t, x)`; `r2` and `r4` at every velocity node,
/// `r3` and `r4` at `(0, x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ApnnResiduals {
    pub r1: f64,
    pub r2: Vec<f64>,
    pub r3: f64,
    pub r4: Vec<f64>,
    pub r5: f64,
}

type Rho0 = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type G0 = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Initial data `(rho0, g0)`.
#[derive(Clone)]
pub struct ApnnInitial {
    label: String,
    rho0: Rho0,
    g0: G0,
}

impl ApnnInitial {
    pub fn new(label: impl Into<String>, rho0: Rho0, g0: G0) -> Self {
        Self {
            label: label.into(),
            rho0,
            g0,
        }
    }

    /// `f0 = rho0 M`, so `g0 = 0`.
    pub fn well_prepared(label: impl Into<String>, rho0: Rho0) -> Self {
        Self::new(label, rho0, Arc::new(|_, _| 0.0))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn rho0(&self, x: &[f64]) -> f64 {
        (self.rho0)(x)
    }

    pub fn g0(&self, x: &[f64], xi: &[f64]) -> f64 {
        (self.g0)(x, xi)
    }
}

#[derive(Clone, Debug)]
struct Slice {
    t: f64,
    x: Vec<f64>,
    scale: f64,
}

#[derive(Clone, Debug, Default)]
struct SliceSet {
    interior: Vec<Slice>,
    initial: Vec<Slice>,
    constraint: Vec<Slice>,
}

enum Source<'a> {
    Nets(&'a TanhNetwork, &'a TanhNetwork),
    Field(&'a dyn MacroMicroField),
}

pub struct ApnnProblem {
    rho_arch: Architecture,
    g_arch: Architecture,
    epsilon: f64,
    relax: RelaxationMatrix,
    grid: SpaceTimeGrid,
    initial: ApnnInitial,
    scaled: bool,
    /// `M` at the nodes if `g = M N`, else ones.
    g_scale: Vec<f64>,
}

impl ApnnProblem {
    /// `arch` gives the hidden widths and embedding of both networks; the
    /// density network drops the velocity inputs.
    pub fn new(
        arch: &Architecture,
        epsilon: f64,
        alpha: &AlphaKernel,
        rule: Arc<VelocityQuadrature>,
        grid: SpaceTimeGrid,
        initial: ApnnInitial,
        scaled: bool,
    ) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
        }
        check_len(rule.dim(), arch.dxi)?;
        check_len(grid.dx(), arch.dx)?;
        if arch.dx > arch.dxi {
            return Err(Error::Dimension(arch.dx));
        }
        let g_arch = arch.clone();
        g_arch.validate()?;
        let rho_arch = Architecture {
            dxi: 0,
            ..arch.clone()
        };
        let relax = RelaxationMatrix::new(alpha, rule);
        let g_scale = if scaled {
            relax.maxwellian().to_vec()
        } else {
            vec![1.0; relax.rule().len()]
        };
        Ok(Self {
            rho_arch,
            g_arch,
            epsilon,
            relax,
            grid,
            initial,
            scaled,
            g_scale,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rule(&self) -> &Arc<VelocityQuadrature> {
        self.relax.rule()
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn relaxation(&self) -> &RelaxationMatrix {
        &self.relax
    }

    pub fn is_scaled(&self) -> bool {
        self.scaled
    }

    fn dx(&self) -> usize {
        self.g_arch.dx
    }

    fn nv(&self) -> usize {
        self.relax.rule().len()
    }

    fn rule_label(&self) -> String {
        format!("{}_{}", self.grid.label(), self.rule().label())
    }

    /// `R1`, `R2` and `R5` from the fields at one `(t, x)`.
    fn interior_residuals(&self, f: &SliceFields) -> (f64, Vec<f64>, f64) {
        let rule = self.rule();
        let w = rule.weights();
        let m = self.relax.maxwellian();
        let (nv, dx, eps) = (self.nv(), self.dx(), self.epsilon);
        let mut r1 = f.rho_t;
        for k in 0..dx {
            for i in 0..nv {
                r1 += w[i] * rule.node(i)[k] * f.g_x[k * nv + i];
            }
        }
        let transport: Vec<f64> = (0..nv)
            .map(|i| (0..dx).map(|k| rule.node(i)[k] * f.g_x[k * nv + i]).sum())
            .collect();
        let mass: f64 = transport.iter().zip(w).map(|(v, w)| v * w).sum();
        let lg = self.relax.matrix() * DVector::from_column_slice(&f.g);
        let r2 = (0..nv)
            .map(|i| {
                let grad_rho: f64 = (0..dx).map(|k| rule.node(i)[k] * f.rho_x[k]).sum();
                eps * eps * f.g_t[i] + eps * (transport[i] - m[i] * mass) + grad_rho * m[i] - lg[i]
            })
            .collect();
        let int_g: f64 = f.g.iter().zip(w).map(|(g, w)| g * w).sum();
        let mut r5 = int_g * int_g;
        for k in 0..dx {
            let d: f64 = (0..nv).map(|i| w[i] * f.g_x[k * nv + i]).sum();
            r5 += d * d;
        }
        (r1, r2, r5)
    }

    fn initial_residuals(&self, x: &[f64], f: &SliceFields) -> (f64, Vec<f64>) {
        let rule = self.rule();
        let r3 = f.rho - self.initial.rho0(x);
        let r4 = (0..self.nv()).map(|i| f.g[i] - self.initial.g0(x, rule.node(i))).collect();
        (r3, r4)
    }

    /// Residuals at `(t, x)` for a pair `[rho, g]` of networks.
    pub fn residuals_at(&self, nets: &[TanhNetwork], t: f64, x: &[f64]) -> Result<ApnnResiduals> {
        check_nets(nets, &self.architectures())?;
        let here = [Slice {
            t,
            x: x.to_vec(),
            scale: 1.0,
        }];
        let start = [Slice {
            t: 0.0,
            x: x.to_vec(),
            scale: 1.0,
        }];
        let (f, _) = self.net_fields(&nets[0], &nets[1], &here, false)?;
        let (f0, _) = self.net_fields(&nets[0], &nets[1], &start, false)?;
        let (r1, r2, r5) = self.interior_residuals(&f[0]);
        let (r3, r4) = self.initial_residuals(x, &f0[0]);
        Ok(ApnnResiduals { r1, r2, r3, r4, r5 })
    }

    fn dirs(&self) -> Vec<usize> {
        std::iter::once(0)
            .chain((0..self.dx()).map(|i| self.g_arch.x_index(i)))
            .collect()
    }

    fn net_fields(
        &self,
        rho: &TanhNetwork,
        g: &TanhNetwork,
        slices: &[Slice],
        keep: bool,
    ) -> Result<(Vec<SliceFields>, Option<(JetTrace, JetTrace)>)> {
        let (nv, dx) = (self.nv(), self.dx());
        let rule = self.rule();
        let dirs = self.dirs();
        let mut rp = Vec::with_capacity(slices.len() * (1 + dx));
        let mut gp = Vec::with_capacity(slices.len() * nv * self.g_arch.input_dim());
        for s in slices {
            rp.push(s.t);
            rp.extend_from_slice(&s.x);
            for i in 0..nv {
                gp.push(s.t);
                gp.extend_from_slice(&s.x);
                gp.extend_from_slice(rule.node(i));
            }
        }
        let (rb, gb, traces) = if keep {
            let (rb, rt) = rho.jets(&rp, &dirs, JetOrder::First)?;
            let (gb, gt) = g.jets(&gp, &dirs, JetOrder::First)?;
            (rb, gb, Some((rt, gt)))
        } else {
            (
                rho.eval_jets(&rp, &dirs, JetOrder::First)?,
                g.eval_jets(&gp, &dirs, JetOrder::First)?,
                None,
            )
        };
        let sc = &self.g_scale;
        let fields = (0..slices.len())
            .map(|s| {
                let base = s * nv;
                SliceFields {
                    rho: rb.value(s),
                    rho_t: rb.first(s, 0),
                    rho_x: (0..dx).map(|k| rb.first(s, 1 + k)).collect(),
                    g: (0..nv).map(|i| sc[i] * gb.value(base + i)).collect(),
                    g_t: (0..nv).map(|i| sc[i] * gb.first(base + i, 0)).collect(),
                    g_x: (0..dx)
                        .flat_map(|k| (0..nv).map(move |i| (k, i)))
                        .map(|(k, i)| sc[i] * gb.first(base + i, 1 + k))
                        .collect(),
                }
            })
            .collect();
        Ok((fields, traces))
    }

    fn fields(&self, source: &Source<'_>, slices: &[Slice], keep: bool) -> Result<(Vec<SliceFields>, Option<(JetTrace, JetTrace)>)> {
        match source {
            Source::Nets(rho, g) => self.net_fields(rho, g, slices, keep),
            Source::Field(f) => Ok((par::map_indexed(slices.len(), |s| f.fields(slices[s].t, &slices[s].x)), None)),
        }
    }

    fn backprop(
        &self,
        rho: &TanhNetwork,
        g: &TanhNetwork,
        traces: &(JetTrace, JetTrace),
        bars: &[SliceFields],
        grads: &mut [Vec<f64>],
    ) -> Result<()> {
        let (nv, dx) = (self.nv(), self.dx());
        let n = bars.len();
        let mut rs = JetBatch::zeros(n, 1 + dx, JetOrder::First);
        let mut gs = JetBatch::zeros(n * nv, 1 + dx, JetOrder::First);
        let sc = &self.g_scale;
        for (s, b) in bars.iter().enumerate() {
            *rs.value_mut(s) = b.rho;
            *rs.first_mut(s, 0) = b.rho_t;
            for k in 0..dx {
                *rs.first_mut(s, 1 + k) = b.rho_x[k];
            }
            for i in 0..nv {
                let p = s * nv + i;
                *gs.value_mut(p) = sc[i] * b.g[i];
                *gs.first_mut(p, 0) = sc[i] * b.g_t[i];
                for k in 0..dx {
                    *gs.first_mut(p, 1 + k) = sc[i] * b.g_x[k * nv + i];
                }
            }
        }
        let gr = rho.backward(&traces.0, &rs)?;
        let gg = g.backward(&traces.1, &gs)?;
        for (a, b) in grads[0].iter_mut().zip(&gr) {
            *a += b;
        }
        for (a, b) in grads[1].iter_mut().zip(&gg) {
            *a += b;
        }
        Ok(())
    }

    /// Adjoint of `c1 R1^2 + c2 sum_i w_i R2_i^2 / M_i + c5 R5^2` with respect
    /// to the fields.
    fn interior_bar(&self, f: &SliceFields, c1: f64, c2: f64, c5: f64) -> SliceFields {
        let rule = self.rule();
        let w = rule.weights();
        let m = self.relax.maxwellian();
        let (nv, dx, eps) = (self.nv(), self.dx(), self.epsilon);
        let (r1, r2, r5) = self.interior_residuals(f);
        let mut bar = SliceFields::zeros(dx, nv);
        let a1 = 2.0 * c1 * r1;
        bar.rho_t += a1;
        for k in 0..dx {
            for i in 0..nv {
                bar.g_x[k * nv + i] += a1 * w[i] * rule.node(i)[k];
            }
        }
        if c2 != 0.0 {
            let b: Vec<f64> = (0..nv).map(|i| 2.0 * c2 * w[i] * r2[i] / m[i]).collect();
            let mb: f64 = b.iter().zip(m).map(|(b, m)| b * m).sum();
            for i in 0..nv {
                bar.g_t[i] += eps * eps * b[i];
                let p = b[i] - w[i] * mb;
                for k in 0..dx {
                    let xk = rule.node(i)[k];
                    bar.g_x[k * nv + i] += eps * xk * p;
                    bar.rho_x[k] += b[i] * xk * m[i];
                }
            }
            let lt = self.relax.matrix().tr_mul(&DVector::from_column_slice(&b));
            for i in 0..nv {
                bar.g[i] -= lt[i];
            }
        }
        if c5 != 0.0 {
            let a5 = 2.0 * c5 * r5;
            let int_g: f64 = f.g.iter().zip(w).map(|(g, w)| g * w).sum();
            for i in 0..nv {
                bar.g[i] += a5 * 2.0 * int_g * w[i];
            }
            for k in 0..dx {
                let d: f64 = (0..nv).map(|i| w[i] * f.g_x[k * nv + i]).sum();
                for i in 0..nv {
                    bar.g_x[k * nv + i] += a5 * 2.0 * d * w[i];
                }
            }
        }
        bar
    }

    /// Squared components `[E1^2 .. E5^2]`; with `grads`, adds their sum's
    /// gradient.
    fn squares(&self, source: &Source<'_>, set: &SliceSet, mut grads: Option<&mut [Vec<f64>]>) -> Result<[f64; 5]> {
        let w = self.rule().weights();
        let m = self.relax.maxwellian();
        let nv = self.nv();
        let keep = grads.is_some();
        let mut out = [0.0; 5];

        let (fi, ti) = self.fields(source, &set.interior, keep)?;
        let parts = par::map_indexed(fi.len(), |s| {
            let (r1, r2, _) = self.interior_residuals(&fi[s]);
            let e2: f64 = (0..nv).map(|i| w[i] * r2[i] * r2[i] / m[i]).sum();
            (set.interior[s].scale * r1 * r1, set.interior[s].scale * e2)
        });
        for (a, b) in parts {
            out[0] += a;
            out[1] += b;
        }
        if let (Some(g), Some(tr), Source::Nets(rho, gn)) = (grads.as_deref_mut(), ti.as_ref(), source) {
            let bars = par::map_indexed(fi.len(), |s| {
                let c = set.interior[s].scale;
                self.interior_bar(&fi[s], c, c, 0.0)
            });
            self.backprop(rho, gn, tr, &bars, g)?;
        }

        let (f0, t0) = self.fields(source, &set.initial, keep)?;
        let mut bars0 = Vec::with_capacity(f0.len());
        for (s, f) in f0.iter().enumerate() {
            let sl = &set.initial[s];
            let (r3, r4) = self.initial_residuals(&sl.x, f);
            out[2] += sl.scale * r3 * r3;
            out[3] += sl.scale * (0..nv).map(|i| w[i] * r4[i] * r4[i]).sum::<f64>();
            if keep {
                let mut bar = SliceFields::zeros(self.dx(), nv);
                bar.rho = 2.0 * sl.scale * r3;
                for i in 0..nv {
                    bar.g[i] = 2.0 * sl.scale * w[i] * r4[i];
                }
                bars0.push(bar);
            }
        }
        if let (Some(g), Some(tr), Source::Nets(rho, gn)) = (grads.as_deref_mut(), t0.as_ref(), source) {
            self.backprop(rho, gn, tr, &bars0, g)?;
        }

        let (fc, tc) = self.fields(source, &set.constraint, keep)?;
        for (s, f) in fc.iter().enumerate() {
            let (_, _, r5) = self.interior_residuals(f);
            out[4] += set.constraint[s].scale * r5 * r5;
        }
        if let (Some(g), Some(tr), Source::Nets(rho, gn)) = (grads, tc.as_ref(), source) {
            let bars = par::map_indexed(fc.len(), |s| self.interior_bar(&fc[s], 0.0, 0.0, set.constraint[s].scale));
            self.backprop(rho, gn, tr, &bars, g)?;
        }
        Ok(out)
    }

    fn quadrature_slices(&self) -> SliceSet {
        let time = self.grid.time();
        let mut set = SliceSet::default();
        for (&t, &wt) in time.nodes.iter().zip(&time.weights) {
            for ix in 0..self.grid.x_len() {
                set.interior.push(Slice {
                    t,
                    x: self.grid.x_node(ix).to_vec(),
                    scale: wt * self.grid.x_weights()[ix],
                });
            }
        }
        set.constraint = set.interior.clone();
        for ix in 0..self.grid.x_len() {
            set.initial.push(Slice {
                t: 0.0,
                x: self.grid.x_node(ix).to_vec(),
                scale: self.grid.x_weights()[ix],
            });
        }
        set
    }

    fn random_slices(&self, rng: &mut ChaCha8Rng, batches: &BatchSizes) -> SliceSet {
        let nv = self.nv();
        let dx = self.dx();
        let t_end = self.grid.t_end();
        let volume = TAU.powi(dx as i32);
        let mut draw = |count: usize, timed: bool| -> Vec<Slice> {
            let n = (count / nv).max(1);
            let scale = if timed { t_end } else { 1.0 } * volume / n as f64;
            (0..n)
                .map(|_| {
                    let t = if timed { rng.random_range(0.0..t_end) } else { 0.0 };
                    let x = (0..dx).map(|_| rng.random_range(-PI..PI)).collect();
                    Slice { t, x, scale }
                })
                .collect()
        };
        let interior = draw(batches.interior, true);
        let initial = draw(batches.initial, false);
        let constraint = draw(batches.constraint, true);
        SliceSet {
            interior,
            initial,
            constraint,
        }
    }

    fn breakdown_of(&self, sq: [f64; 5], samples: usize, rule: String) -> LossBreakdown {
        let r = sq.map(f64::sqrt);
        LossBreakdown::Apnn(ApnnBreakdown {
            r1: r[0],
            r2: r[1],
            r3: r[2],
            r4: r[3],
            r5: r[4],
            eg_total: ApnnBreakdown::aggregate(r),
            samples,
            rule,
        })
    }

    fn set_for(&self, mode: EvalMode) -> (SliceSet, String) {
        match mode {
            EvalMode::Quadrature => (self.quadrature_slices(), self.rule_label()),
            EvalMode::MonteCarlo { seed, n } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (
                    self.random_slices(&mut rng, &BatchSizes::uniform(n)),
                    format!("mc{n}@{seed}_{}", self.rule().label()),
                )
            }
        }
    }

    fn sample_count(&self, set: &SliceSet) -> usize {
        (set.interior.len() + set.initial.len() + set.constraint.len()) * self.nv()
    }

    /// `E_G` of arbitrary fields, e.g. an interpolated trajectory.
    pub fn field_breakdown(&self, field: &dyn MacroMicroField, mode: EvalMode) -> Result<LossBreakdown> {
        let (set, label) = self.set_for(mode);
        let sq = self.squares(&Source::Field(field), &set, None)?;
        Ok(self.breakdown_of(sq, self.sample_count(&set), label))
    }

    fn check_reference(&self, traj: &DvmTrajectory) -> Result<()> {
        if traj.rule().label() != self.rule().label() || (traj.epsilon() - self.epsilon).abs() > 1e-15 * self.epsilon {
            return Err(Error::InvalidArgument(format!(
                "reference ({}, eps {}) does not match the problem ({}, eps {})",
                traj.rule().label(),
                traj.epsilon(),
                self.rule().label(),
                self.epsilon
            )));
        }
        if self.dx() != 1 {
            return Err(Error::Dimension(self.dx()));
        }
        Ok(())
    }

    /// Network values of `rho` per cell and `g` per cell and node at
    /// snapshot time `t` on the trajectory grid.
    fn on_grid(&self, nets: &[TanhNetwork], t: f64, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let slices: Vec<Slice> = x
            .iter()
            .map(|&xj| Slice {
                t,
                x: vec![xj],
                scale: 1.0,
            })
            .collect();
        let (f, _) = self.net_fields(&nets[0], &nets[1], &slices, false)?;
        let rho = f.iter().map(|s| s.rho).collect();
        let g = f.into_iter().flat_map(|s| s.g).collect();
        Ok((rho, g))
    }

    /// `E_T^2 = int int |rho^eps - rho|^2 + eps^2 int int int |g^eps - g|^2 / M`
    /// on the reference grid (trapezoid in time, cells in space).
    pub fn total_error(&self, nets: &[TanhNetwork], reference: &DvmTrajectory) -> Result<f64> {
        check_nets(nets, &self.architectures())?;
        self.check_reference(reference)?;
        let w = self.rule().weights();
        let m = self.relax.maxwellian();
        let nv = self.nv();
        let h = reference.cell_width();
        let eps2 = self.epsilon * self.epsilon;
        let mut acc = 0.0;
        for (k, wt) in reference.time_weights().into_iter().enumerate() {
            let (rho, g) = self.on_grid(nets, reference.times()[k], reference.x())?;
            let rr = reference.rho(k);
            let gr = reference.g(k);
            let mut s = 0.0;
            for j in 0..rho.len() {
                s += (rr[j] - rho[j]).powi(2);
                for i in 0..nv {
                    s += eps2 * w[i] * (gr[j * nv + i] - g[j * nv + i]).powi(2) / m[i];
                }
            }
            acc += wt * h * s;
        }
        Ok(acc.sqrt())
    }

    /// `(E_G breakdown, E_T)`.
    pub fn errors(&self, nets: &[TanhNetwork], reference: &DvmTrajectory) -> Result<(LossBreakdown, f64)> {
        Ok((self.breakdown(nets, EvalMode::Quadrature)?, self.total_error(nets, reference)?))
    }

    /// `||rho_net - rho^0|| / ||rho^0||` in `L^2(dt dx)` on the diffusion
    /// solution's grid.
    pub fn rho_distance(&self, nets: &[TanhNetwork], limit: &DiffusionSolution) -> Result<f64> {
        check_nets(nets, &self.architectures())?;
        let wt = crate::reference::dvm::trapezoid(limit.times());
        let (mut num, mut den) = (0.0, 0.0);
        for (k, &t) in limit.times().iter().enumerate() {
            let mut pts = Vec::with_capacity(2 * limit.x().len());
            for &x in limit.x() {
                pts.push(t);
                pts.push(x);
            }
            let vals = nets[0].eval_jets(&pts, &[], JetOrder::Value)?;
            for (j, r0) in limit.rho(k).iter().enumerate() {
                num += wt[k] * (vals.value(j) - r0).powi(2);
                den += wt[k] * r0 * r0;
            }
        }
        if den == 0.0 {
            return Err(Error::InvalidArgument("diffusion reference is identically zero".into()));
        }
        Ok((num / den).sqrt())
    }
}

impl Objective for ApnnProblem {
    fn architectures(&self) -> Vec<Architecture> {
        vec![self.rho_arch.clone(), self.g_arch.clone()]
    }

    fn batch_loss(&self, nets: &[TanhNetwork], batches: &BatchSizes, rng: &mut ChaCha8Rng) -> Result<(f64, Vec<Vec<f64>>)> {
        check_nets(nets, &self.architectures())?;
        let set = self.random_slices(rng, batches);
        let mut grads = vec![vec![0.0; nets[0].param_count()], vec![0.0; nets[1].param_count()]];
        let sq = self.squares(&Source::Nets(&nets[0], &nets[1]), &set, Some(&mut grads))?;
        Ok((sq.iter().sum(), grads))
    }

    fn breakdown(&self, nets: &[TanhNetwork], mode: EvalMode) -> Result<LossBreakdown> {
        check_nets(nets, &self.architectures())?;
        let (set, label) = self.set_for(mode);
        let sq = self.squares(&Source::Nets(&nets[0], &nets[1]), &set, None)?;
        Ok(self.breakdown_of(sq, self.sample_count(&set), label))
    }
}

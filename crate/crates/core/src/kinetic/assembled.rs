//! The linearized collision operator assembled on a tensor velocity grid, for
//! the training losses: `nu` as a vector, `K` as a dense matrix and `Gamma`
//! as a sparse list of gain interactions plus a dense loss matrix.
//!
//! The inner `xi_*` integral uses the grid's own nodes, post-collision values
//! come from multilinear interpolation (zero outside the cube), so
//! `K u` and `Gamma(u, v)` agree with [`super::k_op`] and
//! [`super::gamma_op`] applied to the interpolated grid function.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};

use super::{collide_into, maxwellian, sqrt_maxwellian, CollisionKernel};
use crate::error::{check_len, Error, Result};
use crate::par;
use crate::quadrature::{Rule, SphereRule, Stencil, VelocityQuadrature};

/// One `(xi_*, omega)` interaction of the gain term at a fixed `xi`.
#[derive(Clone, Copy, Debug)]
struct Gain {
    coef: f64,
    prime: Stencil,
    prime_star: Stencil,
}

#[derive(Clone, Debug)]
pub struct AssembledCollision {
    rule: Arc<VelocityQuadrature>,
    kernel: CollisionKernel,
    nu: Array1<f64>,
    k: Array2<f64>,
    loss: Array2<f64>,
    gains: Vec<Gain>,
    offsets: Vec<usize>,
}

impl AssembledCollision {
    pub fn new(kernel: &CollisionKernel, rule: Arc<VelocityQuadrature>, sphere: &SphereRule) -> Result<Self> {
        let d = rule.dim();
        if d < 2 || sphere.dim() < 2 {
            return Err(Error::DegenerateSphere);
        }
        check_len(d, sphere.dim())?;
        if rule.points_per_dim().is_none() {
            return Err(Error::InvalidArgument("assembly needs a tensor cube rule".into()));
        }
        kernel.validate()?;
        let sphere = if kernel.profile.is_even() {
            sphere.merged_antipodes()
        } else {
            sphere.clone()
        };
        let n = rule.len();
        let w = rule.weights();
        let sqrt_m: Vec<f64> = (0..n).map(|j| sqrt_maxwellian(rule.node(j))).collect();
        let m: Vec<f64> = (0..n).map(|j| maxwellian(rule.node(j))).collect();

        struct Row {
            nu: f64,
            k: Vec<f64>,
            loss: Vec<f64>,
            gains: Vec<Gain>,
        }
        let rows = par::map_indexed(n, |i| {
            let xi = rule.node(i);
            let mut a = [0.0; 3];
            let mut b = [0.0; 3];
            let mut nu = 0.0;
            let mut k = vec![0.0; n];
            let mut loss = vec![0.0; n];
            let mut gains = Vec::new();
            for j in 0..n {
                let xs = rule.node(j);
                let mut qsum = 0.0;
                for dir in 0..sphere.len() {
                    let (v, cos) = collide_into(xi, xs, sphere.direction(dir), &mut a[..d], &mut b[..d]);
                    let q = sphere.weights()[dir] * kernel.q(v, cos);
                    if q == 0.0 {
                        continue;
                    }
                    qsum += q;
                    let coef = w[j] * q * sqrt_m[j];
                    let prime = rule.stencil(&a[..d]);
                    let prime_star = rule.stencil(&b[..d]);
                    let (sp, sps) = (sqrt_maxwellian(&a[..d]), sqrt_maxwellian(&b[..d]));
                    for (idx, wt) in prime_star.iter() {
                        k[idx] += coef * sp * wt;
                    }
                    for (idx, wt) in prime.iter() {
                        k[idx] += coef * sps * wt;
                    }
                    if !prime.is_empty() && !prime_star.is_empty() {
                        gains.push(Gain {
                            coef,
                            prime,
                            prime_star,
                        });
                    }
                }
                nu += w[j] * qsum * m[j];
                loss[j] = w[j] * qsum * sqrt_m[j];
            }
            for j in 0..n {
                k[j] -= sqrt_m[i] * loss[j];
            }
            Row { nu, k, loss, gains }
        });

        let mut nu = Array1::zeros(n);
        let mut k = Array2::zeros((n, n));
        let mut loss = Array2::zeros((n, n));
        let mut gains = Vec::new();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            nu[i] = row.nu;
            k.row_mut(i).assign(&ArrayView1::from(&row.k));
            loss.row_mut(i).assign(&ArrayView1::from(&row.loss));
            gains.extend(row.gains);
            offsets.push(gains.len());
        }
        Ok(Self {
            rule,
            kernel: *kernel,
            nu,
            k,
            loss,
            gains,
            offsets,
        })
    }

    pub fn rule(&self) -> &Arc<VelocityQuadrature> {
        &self.rule
    }

    pub fn kernel(&self) -> &CollisionKernel {
        &self.kernel
    }

    pub fn len(&self) -> usize {
        self.rule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.is_empty()
    }

    pub fn nu(&self) -> &Array1<f64> {
        &self.nu
    }

    pub fn k_matrix(&self) -> &Array2<f64> {
        &self.k
    }

    pub fn gain_count(&self) -> usize {
        self.gains.len()
    }

    /// `K u` at every node.
    pub fn apply_k(&self, u: &[f64]) -> Vec<f64> {
        self.k.dot(&ArrayView1::from(u)).to_vec()
    }

    /// `Gamma(u, v)` at every node.
    pub fn gamma(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let gu = self.loss.dot(&ArrayView1::from(u));
        let gv = self.loss.dot(&ArrayView1::from(v));
        (0..self.len())
            .map(|i| {
                let mut gain = 0.0;
                for e in &self.gains[self.offsets[i]..self.offsets[i + 1]] {
                    let (ua, ub) = (e.prime.apply(u), e.prime_star.apply(u));
                    let (va, vb) = (e.prime.apply(v), e.prime_star.apply(v));
                    gain += e.coef * (ua * vb + ub * va);
                }
                0.5 * gain - 0.5 * (u[i] * gv[i] + v[i] * gu[i])
            })
            .collect()
    }

    /// `Gamma(u, u)` at every node.
    pub fn gamma_diag(&self, u: &[f64]) -> Vec<f64> {
        let gu = self.loss.dot(&ArrayView1::from(u));
        (0..self.len())
            .map(|i| {
                let mut gain = 0.0;
                for e in &self.gains[self.offsets[i]..self.offsets[i + 1]] {
                    gain += e.coef * e.prime.apply(u) * e.prime_star.apply(u);
                }
                gain - u[i] * gu[i]
            })
            .collect()
    }

    /// Adds `d/du sum_i seed_i Gamma(u, u)_i` to `grad`.
    pub fn gamma_diag_adjoint(&self, u: &[f64], seed: &[f64], grad: &mut [f64]) {
        let gu = self.loss.dot(&ArrayView1::from(u));
        for i in 0..self.len() {
            let s = seed[i];
            if s == 0.0 {
                continue;
            }
            for e in &self.gains[self.offsets[i]..self.offsets[i + 1]] {
                let a = e.prime.apply(u);
                let b = e.prime_star.apply(u);
                for (idx, wt) in e.prime.iter() {
                    grad[idx] += s * e.coef * wt * b;
                }
                for (idx, wt) in e.prime_star.iter() {
                    grad[idx] += s * e.coef * wt * a;
                }
            }
            grad[i] -= s * gu[i];
        }
        // d/du_j of -u_i (G u)_i contributes -seed_i u_i G_ij.
        let su: Vec<f64> = (0..self.len()).map(|i| seed[i] * u[i]).collect();
        let back = self.loss.t().dot(&ArrayView1::from(&su));
        for (g, b) in grad.iter_mut().zip(back.iter()) {
            *g -= b;
        }
    }
}

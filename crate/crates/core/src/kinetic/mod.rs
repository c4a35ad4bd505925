//! Kinetic operators near the global Maxwellian: the Boltzmann collision
//! operator and its linearization, and the linear relaxation model with its
//! projections and diffusion limit.

pub mod assembled;
pub mod collision;
pub mod relaxation;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::quadrature::{integrate, Rule, VelocityQuadrature};

pub use assembled::AssembledCollision;
pub use collision::{collision_q, entropy_production, entropy_production_fn, gamma_op, k_op, loss_frequency, nu};
pub use relaxation::{
    diffusion_coefficient, eta, kappa_at, l_op, project_p0, project_p1, size_condition, solve_h,
    AlphaForm, AlphaKernel, RelaxationMatrix, SizeCondition,
};

/// Global Maxwellian `(2 pi)^{-d/2} exp(-|xi|^2 / 2)`, with `d = xi.len()`.
#[inline]
pub fn maxwellian(xi: &[f64]) -> f64 {
    let r2: f64 = xi.iter().map(|x| x * x).sum();
    (2.0 * PI).powf(-0.5 * xi.len() as f64) * (-0.5 * r2).exp()
}

/// Square root of the Maxwellian.
#[inline]
pub fn sqrt_maxwellian(xi: &[f64]) -> f64 {
    let r2: f64 = xi.iter().map(|x| x * x).sum();
    (2.0 * PI).powf(-0.25 * xi.len() as f64) * (-0.25 * r2).exp()
}

/// Relative speed `v = |xi - xi_*|`, `v cos(theta) = (xi - xi_*) . omega`
/// and the post-collision pair written into `out` / `out_star`. Returns
/// `(v, cos_theta)` with `cos_theta = 0` when `v = 0`.
#[inline]
pub(crate) fn collide_into(
    xi: &[f64],
    xi_star: &[f64],
    omega: &[f64],
    out: &mut [f64],
    out_star: &mut [f64],
) -> (f64, f64) {
    let mut v2 = 0.0;
    let mut proj = 0.0;
    for k in 0..xi.len() {
        let rel = xi[k] - xi_star[k];
        v2 += rel * rel;
        proj += rel * omega[k];
    }
    for k in 0..xi.len() {
        out[k] = xi[k] - proj * omega[k];
        out_star[k] = xi_star[k] + proj * omega[k];
    }
    let v = v2.sqrt();
    let cos = if v > 0.0 { proj / v } else { 0.0 };
    (v, cos)
}

/// Post-collision velocities `xi' = xi - ((xi - xi_*) . omega) omega` and
/// `xi'_* = xi_* + ((xi - xi_*) . omega) omega`.
pub fn post_collision(xi: &[f64], xi_star: &[f64], omega: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![0.0; xi.len()];
    let mut b = vec![0.0; xi.len()];
    collide_into(xi, xi_star, omega, &mut a, &mut b);
    (a, b)
}

/// Angular part `b(cos theta)` of the collision kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngularProfile {
    /// `b = |cos theta|`.
    AbsCos,
    /// `b = 1`.
    Isotropic,
}

impl AngularProfile {
    #[inline]
    pub fn eval(self, cos_theta: f64) -> f64 {
        match self {
            AngularProfile::AbsCos => cos_theta.abs(),
            AngularProfile::Isotropic => 1.0,
        }
    }

    pub fn sup(self) -> f64 {
        1.0
    }

    /// Whether `b(-c) = b(c)`.
    pub fn is_even(self) -> bool {
        true
    }
}

/// Cutoff power-law kernel `q(v, theta) = amplitude * v^gamma * b(cos theta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionKernel {
    pub gamma: f64,
    pub profile: AngularProfile,
    pub amplitude: f64,
}

impl Default for CollisionKernel {
    fn default() -> Self {
        Self {
            gamma: 0.0,
            profile: AngularProfile::AbsCos,
            amplitude: 1.0,
        }
    }
}

impl CollisionKernel {
    pub fn new(gamma: f64, profile: AngularProfile, amplitude: f64) -> Result<Self> {
        let k = Self {
            gamma,
            profile,
            amplitude,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidArgument(format!(
                "kernel exponent must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn q(&self, v: f64, cos_theta: f64) -> f64 {
        let speed = if self.gamma == 0.0 { 1.0 } else { v.powf(self.gamma) };
        self.amplitude * speed * self.profile.eval(cos_theta)
    }
}

/// A function of velocity that can be evaluated at arbitrary points.
pub trait VelocityFn: Sync {
    fn eval(&self, xi: &[f64]) -> f64;
}

impl<F: ?Sized> VelocityFn for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    #[inline]
    fn eval(&self, xi: &[f64]) -> f64 {
        self(xi)
    }
}

/// `u * chi_{Q_R}`: the wrapped function outside the closed cube of side
/// `side` is replaced by zero.
pub struct Truncated<'a, F: ?Sized> {
    inner: &'a F,
    half: f64,
}

impl<'a, F: VelocityFn + ?Sized> Truncated<'a, F> {
    pub fn new(inner: &'a F, side: f64) -> Self {
        Self {
            inner,
            half: 0.5 * side,
        }
    }
}

impl<F: VelocityFn + ?Sized> VelocityFn for Truncated<'_, F> {
    #[inline]
    fn eval(&self, xi: &[f64]) -> f64 {
        if xi.iter().all(|x| x.abs() <= self.half) {
            self.inner.eval(xi)
        } else {
            0.0
        }
    }
}

/// Values at the nodes of a tensor velocity rule. Between nodes the function
/// is multilinear; it vanishes on the cube faces and outside the cube.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    rule: Arc<VelocityQuadrature>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(rule: Arc<VelocityQuadrature>, values: Vec<f64>) -> Result<Self> {
        check_len(rule.len(), values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid function value at node {i} is not finite"
            )));
        }
        Ok(Self { rule, values })
    }

    pub fn from_fn<F: VelocityFn + ?Sized>(rule: Arc<VelocityQuadrature>, f: &F) -> Self {
        let values = (0..rule.len()).map(|i| f.eval(rule.node(i))).collect();
        Self { rule, values }
    }

    pub fn rule(&self) -> &Arc<VelocityQuadrature> {
        &self.rule
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn integral(&self) -> f64 {
        integrate(&self.values, self.rule.as_ref()).expect("lengths agree by construction")
    }

    pub fn map(&self, f: impl Fn(&[f64], f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(self.rule.node(i), v))
            .collect();
        Self {
            rule: Arc::clone(&self.rule),
            values,
        }
    }
}

impl VelocityFn for GridFunction {
    #[inline]
    fn eval(&self, xi: &[f64]) -> f64 {
        self.rule.stencil(xi).apply(&self.values)
    }
}

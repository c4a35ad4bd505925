//! Manufactured solutions of the perturbation equation. Every case is a
//! product `u*(t, x, xi) = tau(t) X(x_1) phi(xi)`, so the source
//!
//! `S = tau' X phi + tau (xi_1 X') phi + tau X A - tau^2 X^2 B`
//!
//! needs `A = nu phi - K(phi chi)` and `B = Gamma(phi chi, phi chi)` only,
//! which are computed once with an oracle rule finer than the training one.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetic::{gamma_op, k_op, nu, AssembledCollision, CollisionKernel};
use crate::losses::pinn::PinnScenario;
use crate::par;
use crate::quadrature::{Rule, SphereRule, VelocityQuadrature};

/// Registered case names.
pub const CATALOGUE: &[&str] = &["decay", "steady", "zero"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
enum SpaceMode {
    Cos,
    Sin,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
enum VelocityMode {
    /// `xi_1 exp(-|xi|^2 / 4)`.
    Odd,
    /// `exp(-|xi|^2 / 4)`.
    Even,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct Shape {
    amplitude: f64,
    decay: f64,
    space: SpaceMode,
    velocity: VelocityMode,
}

impl Shape {
    fn named(name: &str) -> Result<Self> {
        match name {
            "decay" => Ok(Self {
                amplitude: 1.0,
                decay: 1.0,
                space: SpaceMode::Cos,
                velocity: VelocityMode::Odd,
            }),
            "steady" => Ok(Self {
                amplitude: 0.5,
                decay: 0.0,
                space: SpaceMode::Sin,
                velocity: VelocityMode::Even,
            }),
            "zero" => Ok(Self {
                amplitude: 0.0,
                decay: 0.0,
                space: SpaceMode::Cos,
                velocity: VelocityMode::Odd,
            }),
            other => Err(Error::UnknownCase(other.to_string())),
        }
    }

    fn tau(&self, t: f64) -> f64 {
        self.amplitude * (-self.decay * t).exp()
    }

    fn tau_dot(&self, t: f64) -> f64 {
        -self.decay * self.tau(t)
    }

    fn space(&self, x: &[f64]) -> f64 {
        match self.space {
            SpaceMode::Cos => x[0].cos(),
            SpaceMode::Sin => x[0].sin(),
        }
    }

    fn space_dx(&self, x: &[f64]) -> f64 {
        match self.space {
            SpaceMode::Cos => -x[0].sin(),
            SpaceMode::Sin => x[0].cos(),
        }
    }

    fn phi(&self, xi: &[f64]) -> f64 {
        let g = (-0.25 * xi.iter().map(|v| v * v).sum::<f64>()).exp();
        match self.velocity {
            VelocityMode::Odd => xi[0] * g,
            VelocityMode::Even => g,
        }
    }
}

/// Rules used to evaluate the source.
#[derive(Clone, Debug)]
pub struct OracleRules {
    pub kernel: CollisionKernel,
    pub cube: Arc<VelocityQuadrature>,
    pub sphere: SphereRule,
}

impl OracleRules {
    /// Gauss-Legendre cube with `points_per_dim` points and `dirs` sphere
    /// directions.
    pub fn new(kernel: CollisionKernel, dim: usize, side: f64, points_per_dim: usize, dirs: usize) -> Result<Self> {
        Ok(Self {
            kernel,
            cube: Arc::new(VelocityQuadrature::cube(dim, side, points_per_dim)?),
            sphere: SphereRule::new(dim, dirs)?,
        })
    }

    pub fn label(&self) -> String {
        format!("{}_{}", self.cube.label(), self.sphere.label())
    }
}

/// A manufactured case with `A` and `B` cached on the nodes of a training
/// operator.
pub struct ManufacturedCase {
    name: String,
    shape: Shape,
    oracle: OracleRules,
    nodes: Arc<VelocityQuadrature>,
    drop_time_derivative: bool,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl ManufacturedCase {
    pub fn new(name: &str, op: &AssembledCollision, oracle: OracleRules) -> Result<Self> {
        let shape = Shape::named(name)?;
        if oracle.cube.dim() != op.rule().dim() || (oracle.cube.side() - op.rule().side()).abs() > 1e-12 {
            return Err(Error::InvalidArgument(
                "oracle and training rules must share dimension and side".into(),
            ));
        }
        let rule = op.rule();
        let ab = par::map_indexed(rule.len(), |i| source_parts(&shape, &oracle, rule.node(i)));
        let mut a = Vec::with_capacity(rule.len());
        let mut b = Vec::with_capacity(rule.len());
        for r in ab {
            let (x, y) = r?;
            a.push(x);
            b.push(y);
        }
        Ok(Self {
            name: name.to_string(),
            shape,
            oracle,
            nodes: Arc::clone(rule),
            drop_time_derivative: false,
            a,
            b,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn oracle(&self) -> &OracleRules {
        &self.oracle
    }

    /// The same case with the `tau' X phi` term removed from the source.
    pub fn without_time_derivative(mut self) -> Self {
        self.drop_time_derivative = true;
        self
    }

    pub fn u_star(&self, t: f64, x: &[f64], xi: &[f64]) -> f64 {
        self.shape.tau(t) * self.shape.space(x) * self.shape.phi(xi)
    }

    /// `(A, B)` at the training nodes.
    pub fn cached_parts(&self) -> (&[f64], &[f64]) {
        (&self.a, &self.b)
    }

    /// `||(1 + |xi|)^(gamma/2) u*||` over `[0, T] x T^{d_x} x Q_R` with the
    /// oracle cube, by separation of variables.
    pub fn weighted_norm(&self, gamma: f64, t_end: f64, dx: usize) -> f64 {
        let s = &self.shape;
        let time = if s.decay == 0.0 {
            s.amplitude.powi(2) * t_end
        } else {
            s.amplitude.powi(2) * (1.0 - (-2.0 * s.decay * t_end).exp()) / (2.0 * s.decay)
        };
        // int_{-pi}^{pi} cos^2 = int sin^2 = pi; other axes contribute 2 pi.
        let space = std::f64::consts::PI * std::f64::consts::TAU.powi(dx as i32 - 1);
        let cube = &self.oracle.cube;
        let vel: f64 = (0..cube.len())
            .map(|i| {
                let xi = cube.node(i);
                let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                cube.weights()[i] * (1.0 + r).powf(gamma) * s.phi(xi).powi(2)
            })
            .sum();
        (time * space * vel).sqrt()
    }

    fn combine(&self, t: f64, x: &[f64], xi: &[f64], a: f64, b: f64) -> f64 {
        let s = &self.shape;
        let (tau, sx, phi) = (s.tau(t), s.space(x), s.phi(xi));
        let dt = if self.drop_time_derivative {
            0.0
        } else {
            s.tau_dot(t) * sx * phi
        };
        dt + tau * xi[0] * s.space_dx(x) * phi + tau * sx * a - tau * tau * sx * sx * b
    }
}

fn source_parts(shape: &Shape, oracle: &OracleRules, xi: &[f64]) -> Result<(f64, f64)> {
    let phi = |v: &[f64]| shape.phi(v);
    let side = oracle.cube.side();
    let (k, c, s) = (&oracle.kernel, &*oracle.cube, &oracle.sphere);
    let a = nu(xi, k, c, s)? * shape.phi(xi) - k_op(&phi, side, k, c, s, xi)?;
    let b = gamma_op(&phi, &phi, side, k, c, s, xi)?;
    Ok((a, b))
}

impl PinnScenario for ManufacturedCase {
    fn label(&self) -> String {
        format!("manufactured:{}@{}", self.name, self.oracle.label())
    }

    fn initial(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.u_star(0.0, x, xi)
    }

    fn source_at_nodes(&self, t: f64, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.combine(t, x, self.nodes.node(i), self.a[i], self.b[i]);
        }
    }

    fn source(&self, t: f64, x: &[f64], xi: &[f64]) -> f64 {
        match source_parts(&self.shape, &self.oracle, xi) {
            Ok((a, b)) => self.combine(t, x, xi, a, b),
            Err(_) => f64::NAN,
        }
    }
}

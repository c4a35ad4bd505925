//! Distance between the kinetic density `rho^eps` and its diffusion limit
//! as `eps` shrinks, for well-prepared data `f0 = rho0(x) M(xi)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::diffusion::{diffusion_from_cells, DiffusionSolution};
use super::dvm::{dvm_solve, CollisionStep, DvmConfig, DvmTrajectory, Splitting, Transport};
use crate::error::{Error, Result};
use crate::kinetic::{diffusion_coefficient, maxwellian, solve_h, AlphaForm, AlphaKernel};
use crate::quadrature::{CubeScheme, VelocityQuadrature};
use crate::stats::{loglog_fit, LinearFit};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApStudyConfig {
    pub alpha: AlphaForm,
    pub side: f64,
    pub velocity_points: usize,
    pub scheme: CubeScheme,
    pub x_cells: usize,
    pub t_end: f64,
    /// Time step is `min(dt_max, dt_factor * eps^2)`.
    pub dt_factor: f64,
    pub dt_max: f64,
    /// Number of snapshots kept per unit time, at least.
    pub snapshots: usize,
    /// Amplitude `a` of `rho0 = 1 + a cos x`.
    pub amplitude: f64,
}

impl Default for ApStudyConfig {
    fn default() -> Self {
        Self {
            alpha: AlphaForm::default(),
            side: 8.0,
            velocity_points: 32,
            scheme: CubeScheme::GaussLegendre,
            x_cells: 64,
            t_end: 0.5,
            dt_factor: 0.05,
            dt_max: 0.01,
            snapshots: 20,
            amplitude: 0.5,
        }
    }
}

impl ApStudyConfig {
    pub fn rule(&self) -> Result<Arc<VelocityQuadrature>> {
        Ok(Arc::new(VelocityQuadrature::cube_with(
            1,
            self.side,
            self.velocity_points,
            self.scheme,
        )?))
    }

    pub fn dvm_config(&self, epsilon: f64) -> DvmConfig {
        let dt = self.dt_max.min(self.dt_factor * epsilon * epsilon);
        let steps = (self.t_end / dt).ceil().max(1.0) as usize;
        DvmConfig {
            epsilon,
            alpha: self.alpha,
            x_cells: self.x_cells,
            dt,
            t_end: self.t_end,
            transport: Transport::Spectral,
            splitting: Splitting::Strang,
            collision: CollisionStep::Exact,
            save_every: (steps / self.snapshots.max(1)).max(1),
        }
    }

    pub fn rho0(&self, x: f64) -> f64 {
        1.0 + self.amplitude * x.cos()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApStudyRow {
    pub epsilon: f64,
    /// `||rho^eps - rho^0||` in `L^2(dt dx)`.
    pub error: f64,
    /// `||rho^0||` in the same norm.
    pub reference_norm: f64,
    pub error_at_zero: f64,
    pub dt: f64,
    pub snapshots: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApStudyTable {
    pub diffusion: f64,
    pub rows: Vec<ApStudyRow>,
    /// Log-log fit of error against `eps`; `None` with fewer than two rows.
    pub fit: Option<LinearFit>,
}

impl ApStudyTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error < w[0].error)
    }
}

/// The well-prepared DVM run for one `eps`.
pub fn ap_trajectory(config: &ApStudyConfig, epsilon: f64) -> Result<DvmTrajectory> {
    let rule = config.rule()?;
    let f0 = |x: f64, xi: &[f64]| config.rho0(x) * maxwellian(xi);
    dvm_solve(&config.dvm_config(epsilon), rule, &f0)
}

/// Diffusion solution started from the trajectory's own initial density, at
/// the trajectory's snapshot times.
pub fn matching_diffusion(config: &ApStudyConfig, traj: &DvmTrajectory) -> Result<DiffusionSolution> {
    let alpha = AlphaKernel::new(config.alpha)?;
    let h = solve_h(&alpha, Arc::clone(traj.rule()))?;
    let d = diffusion_coefficient(&h)?;
    diffusion_from_cells(&d, &traj.rho(0), traj.times())
}

/// `||a - b||` in `L^2(dt dx)` over the trajectory grid, with the
/// trajectory's trapezoid weights in time.
pub fn rho_distance(traj: &DvmTrajectory, rho_of: impl Fn(usize) -> Vec<f64>, other: impl Fn(usize) -> Vec<f64>) -> f64 {
    let wt = traj.time_weights();
    let h = traj.cell_width();
    let mut acc = 0.0;
    for (k, w) in wt.iter().enumerate() {
        let a = rho_of(k);
        let b = other(k);
        acc += w * h * a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    }
    acc.sqrt()
}

pub fn dvm_ap_study(config: &ApStudyConfig, epsilons: &[f64]) -> Result<ApStudyTable> {
    if epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidArgument("epsilons must be positive".into()));
    }
    let mut rows = Vec::with_capacity(epsilons.len());
    let mut diffusion = f64::NAN;
    for &eps in epsilons {
        let traj = ap_trajectory(config, eps)?;
        let diff = matching_diffusion(config, &traj)?;
        diffusion = diff.diffusion()[(0, 0)];
        let error = rho_distance(&traj, |k| traj.rho(k), |k| diff.rho(k).to_vec());
        let reference_norm = rho_distance(&traj, |k| diff.rho(k).to_vec(), |k| vec![0.0; diff.rho(k).len()]);
        let r0 = traj.rho(0);
        let error_at_zero = r0
            .iter()
            .zip(diff.rho(0))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        rows.push(ApStudyRow {
            epsilon: eps,
            error,
            reference_norm,
            error_at_zero,
            dt: traj.config().dt,
            snapshots: traj.times().len(),
        });
    }
    let fit = if rows.len() >= 2 {
        let e: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
        let v: Vec<f64> = rows.iter().map(|r| r.error).collect();
        Some(loglog_fit(&e, &v)?)
    } else {
        None
    };
    Ok(ApStudyTable { diffusion, rows, fit })
}

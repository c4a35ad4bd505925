//! The diffusion limit `rho_t + div(D grad rho) = 0` on the periodic
//! interval, integrated exactly mode by mode.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::dvm::cell_centres;
use crate::error::{check_len, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionSolution {
    times: Vec<f64>,
    x: Vec<f64>,
    /// `rho[k * x_cells + j]`.
    rho: Vec<f64>,
    d: DMatrix<f64>,
}

impl DiffusionSolution {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn rho(&self, k: usize) -> &[f64] {
        let n = self.x.len();
        &self.rho[k * n..(k + 1) * n]
    }

    pub fn mass(&self, k: usize) -> f64 {
        self.rho(k).iter().sum::<f64>() * TAU / self.x.len() as f64
    }
}

/// Solves on `x_cells` cell centres and reports the state at `times`.
/// Only `d_x = 1` is supported; `D` must then be a negative `1 x 1` matrix.
pub fn diffusion_solve(
    d: &DMatrix<f64>,
    x_cells: usize,
    times: &[f64],
    rho0: &dyn Fn(f64) -> f64,
) -> Result<DiffusionSolution> {
    if x_cells < 2 {
        return Err(Error::InvalidArgument("need at least 2 cells".into()));
    }
    let values: Vec<f64> = cell_centres(x_cells).into_iter().map(rho0).collect();
    diffusion_from_cells(d, &values, times)
}

/// As [`diffusion_solve`], from initial values at the cell centres.
pub fn diffusion_from_cells(d: &DMatrix<f64>, values: &[f64], times: &[f64]) -> Result<DiffusionSolution> {
    if d.nrows() != 1 || d.ncols() != 1 {
        return Err(Error::Dimension(d.nrows()));
    }
    let kappa = -d[(0, 0)];
    if !(kappa > 0.0) {
        return Err(Error::IndefiniteDiffusion(vec![kappa]));
    }
    if values.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 cells".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidArgument("times must be nonnegative and sorted".into()));
    }
    let n = values.len();
    let x = cell_centres(n);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut hat: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut hat);
    let mut rho = Vec::with_capacity(times.len() * n);
    for &t in times {
        let mut buf: Vec<Complex64> = hat
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let k = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                c * (-kappa * k * k * t).exp()
            })
            .collect();
        inv.process(&mut buf);
        rho.extend(buf.iter().map(|c| c.re / n as f64));
    }
    check_len(times.len() * n, rho.len())?;
    Ok(DiffusionSolution {
        times: times.to_vec(),
        x,
        rho,
        d: d.clone(),
    })
}

//! Discrete-velocity solver for `eps f_t + xi_1 f_x = L(f) / eps` on the
//! periodic interval `[-pi, pi)`: operator splitting between transport and
//! the stiff relaxation step.

use std::f64::consts::{PI, TAU};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::kinetic::{maxwellian, AlphaForm, AlphaKernel, RelaxationMatrix};
use crate::losses::apnn::{MacroMicroField, SliceFields};
use crate::par;
use crate::quadrature::{CubeScheme, Rule, VelocityQuadrature};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    /// First-order upwind finite volumes; needs `max |xi_1| dt <= eps dx`.
    Upwind,
    /// Exact shift of every Fourier mode.
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitting {
    Lie,
    Strang,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionStep {
    /// `exp(dt L / eps^2)` through the symmetrized eigendecomposition.
    /// Requires a symmetric scattering rate.
    Exact,
    /// `(I - dt L / eps^2)^{-1}`.
    Implicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DvmConfig {
    pub epsilon: f64,
    pub alpha: AlphaForm,
    pub x_cells: usize,
    pub dt: f64,
    pub t_end: f64,
    pub transport: Transport,
    pub splitting: Splitting,
    pub collision: CollisionStep,
    /// A snapshot is kept every `save_every` steps, plus the final state.
    pub save_every: usize,
}

impl DvmConfig {
    pub fn new(epsilon: f64, x_cells: usize, dt: f64, t_end: f64) -> Self {
        Self {
            epsilon,
            alpha: AlphaForm::default(),
            x_cells,
            dt,
            t_end,
            transport: Transport::Spectral,
            splitting: Splitting::Strang,
            collision: CollisionStep::Exact,
            save_every: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.x_cells < 2 || self.save_every == 0 {
            return Err(Error::InvalidArgument("need at least 2 cells and save_every >= 1".into()));
        }
        if !(self.dt > 0.0 && self.t_end > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dt and t_end must be positive, got {} and {}",
                self.dt, self.t_end
            )));
        }
        Ok(())
    }
}

/// Cell centres of `n` equal cells on `[-pi, pi)`.
pub fn cell_centres(n: usize) -> Vec<f64> {
    let h = TAU / n as f64;
    (0..n).map(|j| -PI + (j as f64 + 0.5) * h).collect()
}

/// Snapshots of `f` on `x cells x velocity nodes`.
#[derive(Clone, Debug)]
pub struct DvmTrajectory {
    config: DvmConfig,
    rule: Arc<VelocityQuadrature>,
    x: Vec<f64>,
    times: Vec<f64>,
    /// `f[(snapshot * x_cells + cell) * n_v + node]`.
    f: Vec<f64>,
    maxwellian: Vec<f64>,
}

fn collision_matrix(relax: &RelaxationMatrix, tau: f64, step: CollisionStep) -> Result<DMatrix<f64>> {
    let rule = relax.rule();
    let n = rule.len();
    let w = rule.weights();
    let m = relax.maxwellian();
    let l = relax.matrix();
    match step {
        CollisionStep::Exact => {
            // D L D^{-1} with D = diag(sqrt(w / M)) is symmetric for a
            // symmetric rate.
            let d: Vec<f64> = (0..n).map(|i| (w[i] / m[i]).sqrt()).collect();
            let a = DMatrix::from_fn(n, n, |i, j| d[i] * l[(i, j)] / d[j]);
            let defect = (&a - a.transpose()).amax();
            if defect > 1e-10 * a.amax() {
                return Err(Error::InvalidArgument(format!(
                    "exact collision step needs a symmetric scattering rate (defect {defect:e})"
                )));
            }
            let eig = SymmetricEigen::new((&a + a.transpose()) * 0.5);
            let v = &eig.eigenvectors;
            let e = DMatrix::from_diagonal(&eig.eigenvalues.map(|lam| (lam * tau).exp()));
            let core = v * e * v.transpose();
            Ok(DMatrix::from_fn(n, n, |i, j| core[(i, j)] * d[j] / d[i]))
        }
        CollisionStep::Implicit => {
            let sys = DMatrix::identity(n, n) - l * tau;
            sys.try_inverse()
                .ok_or_else(|| Error::Singular("implicit collision matrix".into()))
        }
    }
}

struct Stepper {
    nx: usize,
    nv: usize,
    h: f64,
    epsilon: f64,
    xi1: Vec<f64>,
    transport: Transport,
    fft: Option<(Arc<dyn rustfft::Fft<f64>>, Arc<dyn rustfft::Fft<f64>>)>,
}

impl Stepper {
    fn transport(&self, f: &mut [f64], tau: f64) {
        let (nx, nv) = (self.nx, self.nv);
        let columns = par::map_indexed(nv, |i| {
            let col: Vec<f64> = (0..nx).map(|j| f[j * nv + i]).collect();
            match self.transport {
                Transport::Upwind => self.upwind(&col, self.xi1[i] * tau / (self.epsilon * self.h)),
                Transport::Spectral => self.spectral(&col, self.xi1[i] * tau / self.epsilon),
            }
        });
        for (i, col) in columns.into_iter().enumerate() {
            for (j, v) in col.into_iter().enumerate() {
                f[j * nv + i] = v;
            }
        }
    }

    fn upwind(&self, col: &[f64], c: f64) -> Vec<f64> {
        let n = col.len();
        (0..n)
            .map(|j| {
                if c >= 0.0 {
                    col[j] - c * (col[j] - col[(j + n - 1) % n])
                } else {
                    col[j] - c * (col[(j + 1) % n] - col[j])
                }
            })
            .collect()
    }

    /// `col(x - shift)` for the trigonometric interpolant of `col`.
    fn spectral(&self, col: &[f64], shift: f64) -> Vec<f64> {
        let (fwd, inv) = self.fft.as_ref().expect("spectral plans");
        let n = col.len();
        let mut buf: Vec<Complex64> = col.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fwd.process(&mut buf);
        for (j, c) in buf.iter_mut().enumerate() {
            let k = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            let phase = -k * shift;
            if n % 2 == 0 && j == n / 2 {
                // The Nyquist mode of a real signal shifts as a cosine.
                *c *= phase.cos();
            } else {
                *c *= Complex64::new(phase.cos(), phase.sin());
            }
        }
        inv.process(&mut buf);
        buf.iter().map(|c| c.re / n as f64).collect()
    }
}

/// Runs the splitting scheme from `f0(x, xi)`.
pub fn dvm_solve(
    config: &DvmConfig,
    rule: Arc<VelocityQuadrature>,
    f0: &(dyn Fn(f64, &[f64]) -> f64 + Sync),
) -> Result<DvmTrajectory> {
    config.validate()?;
    let alpha = AlphaKernel::new(config.alpha)?;
    let nx = config.x_cells;
    let nv = rule.len();
    let h = TAU / nx as f64;
    let steps = (config.t_end / config.dt).ceil().max(1.0) as usize;
    let dt = config.t_end / steps as f64;
    let xi1: Vec<f64> = (0..nv).map(|i| rule.node(i)[0]).collect();
    if config.transport == Transport::Upwind {
        let vmax = xi1.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let cfl = vmax * dt / (config.epsilon * h);
        if cfl > 1.0 {
            return Err(Error::Cfl(format!(
                "upwind Courant number {cfl:.3} > 1 (dt {dt:e}, dx {h:e}, eps {})",
                config.epsilon
            )));
        }
    }
    let relax = RelaxationMatrix::new(&alpha, Arc::clone(&rule));
    let coll_dt = dt / (config.epsilon * config.epsilon);
    let collision = collision_matrix(&relax, coll_dt, config.collision)?;
    let fft = (config.transport == Transport::Spectral).then(|| {
        let mut planner = FftPlanner::new();
        (planner.plan_fft_forward(nx), planner.plan_fft_inverse(nx))
    });
    let stepper = Stepper {
        nx,
        nv,
        h,
        epsilon: config.epsilon,
        xi1,
        transport: config.transport,
        fft,
    };

    let x = cell_centres(nx);
    let mut f = vec![0.0; nx * nv];
    for (j, &xj) in x.iter().enumerate() {
        for i in 0..nv {
            f[j * nv + i] = f0(xj, rule.node(i));
        }
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial data is not finite".into()));
    }
    let mut times = vec![0.0];
    let mut snaps = f.clone();
    let collide = |f: &mut [f64]| {
        par::for_each_chunk_mut(f, nv, |_, cell| {
            let out = &collision * DVector::from_column_slice(cell);
            cell.copy_from_slice(out.as_slice());
        });
    };
    for step in 1..=steps {
        match config.splitting {
            Splitting::Lie => {
                stepper.transport(&mut f, dt);
                collide(&mut f);
            }
            Splitting::Strang => {
                stepper.transport(&mut f, 0.5 * dt);
                collide(&mut f);
                stepper.transport(&mut f, 0.5 * dt);
            }
        }
        if step % config.save_every == 0 || step == steps {
            times.push(if step == steps { config.t_end } else { step as f64 * dt });
            snaps.extend_from_slice(&f);
        }
    }
    let maxwellian = (0..nv).map(|i| maxwellian(rule.node(i))).collect();
    let mut config = config.clone();
    config.dt = dt;
    Ok(DvmTrajectory {
        config,
        rule,
        x,
        times,
        f: snaps,
        maxwellian,
    })
}

const MAGIC: &[u8; 4] = b"KDVM";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: DvmConfig,
    dim: usize,
    side: f64,
    points_per_dim: usize,
    scheme: CubeScheme,
    times: Vec<f64>,
}

impl DvmTrajectory {
    pub fn config(&self) -> &DvmConfig {
        &self.config
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon
    }

    pub fn rule(&self) -> &Arc<VelocityQuadrature> {
        &self.rule
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn cell_width(&self) -> f64 {
        TAU / self.x.len() as f64
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn maxwellian(&self) -> &[f64] {
        &self.maxwellian
    }

    /// `f` at snapshot `k`, cell-major.
    pub fn snapshot(&self, k: usize) -> &[f64] {
        let len = self.x.len() * self.rule.len();
        &self.f[k * len..(k + 1) * len]
    }

    /// `rho = int_{Q_R} f` per cell at snapshot `k`.
    pub fn rho(&self, k: usize) -> Vec<f64> {
        let nv = self.rule.len();
        let w = self.rule.weights();
        self.snapshot(k)
            .chunks(nv)
            .map(|cell| cell.iter().zip(w).map(|(f, w)| f * w).sum())
            .collect()
    }

    /// `g = (f - rho M) / eps` at snapshot `k`, cell-major.
    pub fn g(&self, k: usize) -> Vec<f64> {
        let nv = self.rule.len();
        let rho = self.rho(k);
        let eps = self.epsilon();
        let mut out = self.snapshot(k).to_vec();
        for (j, cell) in out.chunks_mut(nv).enumerate() {
            for (v, m) in cell.iter_mut().zip(&self.maxwellian) {
                *v = (*v - rho[j] * m) / eps;
            }
        }
        out
    }

    /// `int int f dxi dx` at snapshot `k`.
    pub fn mass(&self, k: usize) -> f64 {
        self.rho(k).iter().sum::<f64>() * self.cell_width()
    }

    /// Trapezoid weights over the snapshot times.
    pub fn time_weights(&self) -> Vec<f64> {
        trapezoid(&self.times)
    }

    /// `sqrt(int int sum_{|xi| > cut} w (g^2 + (d_x g)^2) / M dx dt)`: the
    /// micro part beyond `cut`, with centred differences in `x`.
    pub fn tail_norm(&self, cut: f64) -> f64 {
        let nv = self.rule.len();
        let nx = self.x.len();
        let h = self.cell_width();
        let w = self.rule.weights();
        let outer: Vec<usize> = (0..nv)
            .filter(|&i| self.rule.node(i).iter().map(|v| v * v).sum::<f64>().sqrt() > cut)
            .collect();
        let mut acc = 0.0;
        for (k, wt) in self.time_weights().into_iter().enumerate() {
            let g = self.g(k);
            for j in 0..nx {
                let (l, r) = ((j + nx - 1) % nx, (j + 1) % nx);
                for &i in &outer {
                    let gx = (g[r * nv + i] - g[l * nv + i]) / (2.0 * h);
                    let v = g[j * nv + i];
                    acc += wt * h * w[i] * (v * v + gx * gx) / self.maxwellian[i];
                }
            }
        }
        acc.sqrt()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(&mut BufReader::new(File::open(path)?))
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        let (scheme, ppd) = match (self.rule.scheme(), self.rule.points_per_dim()) {
            (Some(s), Some(p)) => (s, p),
            _ => return Err(Error::Format("only cube rules can be persisted".into())),
        };
        let header = serde_json::to_vec(&Header {
            config: self.config.clone(),
            dim: self.rule.dim(),
            side: self.rule.side(),
            points_per_dim: ppd,
            scheme,
            times: self.times.clone(),
        })?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        for v in &self.f {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a trajectory file".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported trajectory version {version}")));
        }
        r.read_exact(&mut word)?;
        let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
        r.read_exact(&mut header)?;
        let header: Header = serde_json::from_slice(&header)?;
        let rule = Arc::new(VelocityQuadrature::cube_with(
            header.dim,
            header.side,
            header.points_per_dim,
            header.scheme,
        )?);
        let count = header.times.len() * header.config.x_cells * rule.len();
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        check_len(count * 8, bytes.len()).map_err(|_| Error::Format("trajectory payload has the wrong size".into()))?;
        let f = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let maxwellian = (0..rule.len()).map(|i| maxwellian(rule.node(i))).collect();
        Ok(Self {
            x: cell_centres(header.config.x_cells),
            config: header.config,
            rule,
            times: header.times,
            f,
            maxwellian,
        })
    }

    /// Piecewise-linear interpolant in `(t, x)` of `rho` and `g`, usable
    /// wherever networks are.
    pub fn field(&self) -> DvmField<'_> {
        let rho = (0..self.times.len()).map(|k| self.rho(k)).collect();
        let g = (0..self.times.len()).map(|k| self.g(k)).collect();
        DvmField { traj: self, rho, g }
    }
}

pub(crate) fn trapezoid(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for k in 1..n {
        let h = times[k] - times[k - 1];
        w[k - 1] += 0.5 * h;
        w[k] += 0.5 * h;
    }
    w
}

pub struct DvmField<'a> {
    traj: &'a DvmTrajectory,
    rho: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
}

/// Bracketing index `k` with `grid[k] <= v <= grid[k + 1]` and the
/// fraction along the interval.
fn bracket(grid: &[f64], v: f64) -> (usize, f64) {
    if grid.len() < 2 {
        return (0, 0.0);
    }
    let k = grid.partition_point(|&g| g <= v).clamp(1, grid.len() - 1) - 1;
    let frac = ((v - grid[k]) / (grid[k + 1] - grid[k])).clamp(0.0, 1.0);
    (k, frac)
}

impl DvmField<'_> {
    fn rho_at(&self, k: usize, j: usize) -> f64 {
        self.rho[k][j]
    }
}

impl MacroMicroField for DvmField<'_> {
    fn fields(&self, t: f64, x: &[f64]) -> SliceFields {
        let traj = self.traj;
        let nv = traj.rule.len();
        let nx = traj.x.len();
        let h = traj.cell_width();
        let (k, a) = bracket(&traj.times, t);
        let k1 = (k + 1).min(traj.times.len() - 1);
        let dt = if k1 > k { traj.times[k1] - traj.times[k] } else { 1.0 };
        // Periodic cell bracket: centre j sits at -pi + (j + 1/2) h.
        let s = (x[0] + PI) / h - 0.5;
        let j0f = s.floor();
        let b = s - j0f;
        let j0 = (j0f as i64).rem_euclid(nx as i64) as usize;
        let j1 = (j0 + 1) % nx;
        let bilinear = |v: &dyn Fn(usize, usize) -> f64| -> (f64, f64, f64) {
            let at = |kk: usize| (1.0 - b) * v(kk, j0) + b * v(kk, j1);
            let value = (1.0 - a) * at(k) + a * at(k1);
            let dx_at = |kk: usize| (v(kk, j1) - v(kk, j0)) / h;
            let dxv = (1.0 - a) * dx_at(k) + a * dx_at(k1);
            let dtv = if k1 > k { (at(k1) - at(k)) / dt } else { 0.0 };
            (value, dtv, dxv)
        };
        let (rho, rho_t, rho_x) = bilinear(&|kk, j| self.rho_at(kk, j));
        let mut g = vec![0.0; nv];
        let mut g_t = vec![0.0; nv];
        let mut g_x = vec![0.0; nv];
        for i in 0..nv {
            let (v, vt, vx) = bilinear(&|kk, j| self.g[kk][j * nv + i]);
            g[i] = v;
            g_t[i] = vt;
            g_x[i] = vx;
        }
        SliceFields {
            rho,
            rho_t,
            rho_x: vec![rho_x],
            g,
            g_t,
            g_x,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(n: usize, side: f64) -> Arc<VelocityQuadrature> {
        Arc::new(VelocityQuadrature::cube(1, side, n).unwrap())
    }

    #[test]
    fn spectral_shift_is_exact_for_a_mode() {
        let n = 16;
        let x = cell_centres(n);
        let st = Stepper {
            nx: n,
            nv: 1,
            h: TAU / n as f64,
            epsilon: 1.0,
            xi1: vec![1.0],
            transport: Transport::Spectral,
            fft: Some({
                let mut p = FftPlanner::new();
                (p.plan_fft_forward(n), p.plan_fft_inverse(n))
            }),
        };
        let col: Vec<f64> = x.iter().map(|&v| (3.0 * v).sin()).collect();
        let out = st.spectral(&col, 0.3);
        for (o, &v) in out.iter().zip(&x) {
            assert!((o - (3.0 * (v - 0.3)).sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn mass_conserved_and_roundtrip() {
        let r = rule(12, 8.0);
        let mut cfg = DvmConfig::new(0.5, 16, 0.01, 0.1);
        cfg.save_every = 5;
        let f0 = |x: f64, xi: &[f64]| (1.0 + 0.5 * x.cos()) * maxwellian(xi) * (1.0 + 0.3 * xi[0]);
        let traj = dvm_solve(&cfg, r, &f0).unwrap();
        let m0 = traj.mass(0);
        for k in 0..traj.times().len() {
            assert!((traj.mass(k) - m0).abs() < 1e-12 * m0);
        }
        let mut buf = Vec::new();
        traj.write(&mut buf).unwrap();
        let back = DvmTrajectory::read(&mut buf.as_slice()).unwrap();
        assert_eq!(back.f, traj.f);
        assert_eq!(back.times, traj.times);
        buf.push(0);
        assert!(DvmTrajectory::read(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn upwind_cfl_is_enforced() {
        let mut cfg = DvmConfig::new(0.1, 32, 0.1, 1.0);
        cfg.transport = Transport::Upwind;
        let err = dvm_solve(&cfg, rule(8, 8.0), &|_, xi| maxwellian(xi)).unwrap_err();
        assert!(matches!(err, Error::Cfl(_)));
    }

    #[test]
    fn skewed_rate_needs_implicit_step() {
        let mut cfg = DvmConfig::new(1.0, 8, 0.01, 0.02);
        cfg.alpha = AlphaForm::Skewed {
            base: 1.0,
            amplitude: 0.3,
        };
        assert!(dvm_solve(&cfg, rule(8, 8.0), &|_, xi| maxwellian(xi)).is_err());
        cfg.collision = CollisionStep::Implicit;
        assert!(dvm_solve(&cfg, rule(8, 8.0), &|_, xi| maxwellian(xi)).is_ok());
    }
}

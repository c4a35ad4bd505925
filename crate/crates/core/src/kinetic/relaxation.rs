//! The linear relaxation operator `L(f) = int alpha(xi, xi') (M f' - M' f) dxi'`,
//! the rate `eta`, the projections onto and away from `span{M}`, the
//! auxiliary solve `L(h) = xi M` and the diffusion matrix `D = int xi (x) h`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{maxwellian, GridFunction, VelocityFn};
use crate::error::{check_len, Error, Result};
use crate::quadrature::{Rule, VelocityQuadrature};

/// Functional form of the scattering rate `alpha(xi, xi')`. Perturbations act
/// on the first velocity component only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum AlphaForm {
    /// `alpha = value`.
    Constant { value: f64 },
    /// `alpha = base + amplitude sin(xi_1) sin(xi'_1)`.
    SinProduct { base: f64, amplitude: f64 },
    /// `alpha = base + amplitude cos(xi_1) cos(xi'_1)`, even in both arguments.
    CosProduct { base: f64, amplitude: f64 },
    /// `alpha = base + amplitude sin(xi_1) cos(xi'_1)`. Not symmetric; kept
    /// as a negative control for the symmetry checks.
    Skewed { base: f64, amplitude: f64 },
}

impl Default for AlphaForm {
    fn default() -> Self {
        AlphaForm::Constant { value: 1.0 }
    }
}

/// A bounded scattering rate with its bounds `0 < alpha0 <= alpha <= alpha1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaKernel {
    form: AlphaForm,
    alpha0: f64,
    alpha1: f64,
}

impl AlphaKernel {
    pub fn new(form: AlphaForm) -> Result<Self> {
        let (alpha0, alpha1) = match form {
            AlphaForm::Constant { value } => (value, value),
            AlphaForm::SinProduct { base, amplitude }
            | AlphaForm::CosProduct { base, amplitude }
            | AlphaForm::Skewed { base, amplitude } => (base - amplitude.abs(), base + amplitude.abs()),
        };
        if !(alpha0 > 0.0 && alpha1.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "scattering rate must be bounded below by a positive constant, got lower bound {alpha0}"
            )));
        }
        Ok(Self { form, alpha0, alpha1 })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(AlphaForm::Constant { value })
    }

    pub fn form(&self) -> AlphaForm {
        self.form
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    #[inline]
    pub fn eval(&self, xi: &[f64], xp: &[f64]) -> f64 {
        match self.form {
            AlphaForm::Constant { value } => value,
            AlphaForm::SinProduct { base, amplitude } => base + amplitude * xi[0].sin() * xp[0].sin(),
            AlphaForm::CosProduct { base, amplitude } => base + amplitude * xi[0].cos() * xp[0].cos(),
            AlphaForm::Skewed { base, amplitude } => base + amplitude * xi[0].sin() * xp[0].cos(),
        }
    }

    /// Largest `|alpha(a, b) - alpha(b, a)|` over all pairs of the given
    /// points (flat, `dim` coordinates each).
    pub fn symmetry_defect(&self, points: &[f64], dim: usize) -> f64 {
        let n = points.len() / dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let a = &points[i * dim..(i + 1) * dim];
            for j in 0..n {
                let b = &points[j * dim..(j + 1) * dim];
                worst = worst.max((self.eval(a, b) - self.eval(b, a)).abs());
            }
        }
        worst
    }
}

/// `L(f)(xi) = sum_j w_j alpha(xi, xi_j) (M(xi) f(xi_j) - M(xi_j) f(xi))`.
/// Pass a shell rule to integrate over the complement of the truncation cube.
pub fn l_op<F: VelocityFn + ?Sized>(
    f: &F,
    alpha: &AlphaKernel,
    rule: &VelocityQuadrature,
    xi: &[f64],
) -> f64 {
    let m = maxwellian(xi);
    let f0 = f.eval(xi);
    let w = rule.weights();
    let mut acc = 0.0;
    for j in 0..rule.len() {
        let xp = rule.node(j);
        acc += w[j] * alpha.eval(xi, xp) * (m * f.eval(xp) - maxwellian(xp) * f0);
    }
    acc
}

/// `eta(xi) = int alpha(xi, xi') M(xi') dxi'`.
pub fn eta(xi: &[f64], alpha: &AlphaKernel, rule: &VelocityQuadrature) -> f64 {
    let w = rule.weights();
    (0..rule.len())
        .map(|j| w[j] * alpha.eval(xi, rule.node(j)) * maxwellian(rule.node(j)))
        .sum()
}

/// Optimal centring `c` of the size condition and the resulting
/// `kappa = max(|alpha0 - c|, |alpha1 - c|) / alpha0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeCondition {
    pub c: f64,
    pub kappa: f64,
}

impl SizeCondition {
    pub fn holds(&self) -> bool {
        self.kappa < 1.0
    }
}

pub fn size_condition(alpha0: f64, alpha1: f64) -> Result<SizeCondition> {
    if !(alpha0 > 0.0 && alpha1 >= alpha0) {
        return Err(Error::InvalidArgument(format!(
            "size condition needs 0 < alpha0 <= alpha1, got {alpha0}, {alpha1}"
        )));
    }
    Ok(SizeCondition {
        c: 0.5 * (alpha0 + alpha1),
        kappa: (alpha1 - alpha0) / (2.0 * alpha0),
    })
}

/// `kappa` for a given centring `c`.
pub fn kappa_at(c: f64, alpha0: f64, alpha1: f64) -> f64 {
    (alpha0 - c).abs().max((alpha1 - c).abs()) / alpha0
}

/// Dense matrix of the discrete relaxation operator on a velocity rule:
/// `L_ij = w_j alpha(xi_i, xi_j) M(xi_i) - delta_ij eta_i`.
#[derive(Clone, Debug)]
pub struct RelaxationMatrix {
    rule: Arc<VelocityQuadrature>,
    matrix: DMatrix<f64>,
    maxwellian: Vec<f64>,
    eta: Vec<f64>,
}

impl RelaxationMatrix {
    pub fn new(alpha: &AlphaKernel, rule: Arc<VelocityQuadrature>) -> Self {
        let n = rule.len();
        let w = rule.weights();
        let m: Vec<f64> = (0..n).map(|i| maxwellian(rule.node(i))).collect();
        let mut matrix = DMatrix::zeros(n, n);
        let mut eta = vec![0.0; n];
        for i in 0..n {
            let xi = rule.node(i);
            let mut e = 0.0;
            for j in 0..n {
                let a = alpha.eval(xi, rule.node(j));
                matrix[(i, j)] = w[j] * a * m[i];
                e += w[j] * a * m[j];
            }
            matrix[(i, i)] -= e;
            eta[i] = e;
        }
        Self {
            rule,
            matrix,
            maxwellian: m,
            eta,
        }
    }

    pub fn rule(&self) -> &Arc<VelocityQuadrature> {
        &self.rule
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn maxwellian(&self) -> &[f64] {
        &self.maxwellian
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rule.len(), f.len())?;
        let v = &self.matrix * DVector::from_column_slice(f);
        Ok(v.as_slice().to_vec())
    }
}

/// `P0 f = (int_{Q_R} f) M` on the nodes of `f`'s rule.
pub fn project_p0(f: &GridFunction) -> GridFunction {
    let mass = f.integral();
    f.map(|xi, _| mass * maxwellian(xi))
}

/// `P1 f = f - P0 f`.
pub fn project_p1(f: &GridFunction) -> GridFunction {
    let mass = f.integral();
    f.map(|xi, v| v - mass * maxwellian(xi))
}

/// Solves `L(h_k) = xi_k M` with `int h_k = 0` for each velocity component,
/// through the bordered system `[L M; w^T 0] [h; lambda] = [xi_k M; 0]`.
pub fn solve_h(alpha: &AlphaKernel, rule: Arc<VelocityQuadrature>) -> Result<Vec<GridFunction>> {
    let relax = RelaxationMatrix::new(alpha, Arc::clone(&rule));
    let n = rule.len();
    let w = rule.weights();
    let mut bordered = DMatrix::zeros(n + 1, n + 1);
    bordered.view_mut((0, 0), (n, n)).copy_from(relax.matrix());
    for i in 0..n {
        bordered[(i, n)] = relax.maxwellian[i];
        bordered[(n, i)] = w[i];
    }
    let lu = bordered.clone().lu();
    let mut out = Vec::with_capacity(rule.dim());
    for k in 0..rule.dim() {
        let mut rhs = DVector::zeros(n + 1);
        for i in 0..n {
            rhs[i] = rule.node(i)[k] * relax.maxwellian[i];
        }
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("bordered relaxation system".into()))?;
        let residual = (&bordered * &sol - &rhs).amax();
        let scale = rhs.amax().max(f64::MIN_POSITIVE);
        if !(residual <= 1e-10 * scale) {
            return Err(Error::Singular(format!(
                "h-solve residual {residual:e} for component {k}"
            )));
        }
        out.push(GridFunction::new(Arc::clone(&rule), sol.as_slice()[..n].to_vec())?);
    }
    Ok(out)
}

/// `D_kl = int xi_k h_l dxi`. Fails unless `-D` (symmetrized) is positive
/// definite.
pub fn diffusion_coefficient(h: &[GridFunction]) -> Result<DMatrix<f64>> {
    let d = h.len();
    if d == 0 {
        return Err(Error::InvalidArgument("no h components".into()));
    }
    let rule = h[0].rule();
    check_len(rule.dim(), d)?;
    let w = rule.weights();
    let mut dm = DMatrix::zeros(d, d);
    for k in 0..d {
        for (l, hl) in h.iter().enumerate() {
            dm[(k, l)] = (0..rule.len())
                .map(|i| w[i] * rule.node(i)[k] * hl.values()[i])
                .sum();
        }
    }
    let sym = -(&dm + dm.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    if eig.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::IndefiniteDiffusion(eig.as_slice().to_vec()));
    }
    Ok(dm)
}

//! Residual-based loss functionals. [`pinn`] covers the perturbation
//! equation around the Maxwellian, [`apnn`] the micro-macro system of the
//! diffusively scaled linear model.

pub mod apnn;
pub mod pinn;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Architecture, TanhNetwork};

/// Scalars entering the loss functionals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Weight of the `H^2` penalty.
    pub lambda_r: f64,
    /// Exponent of the `(1 + R)^gamma` factors.
    pub gamma: f64,
    /// Side of the velocity cube.
    pub r: f64,
    /// Scaling parameter of the multiscale model (ignored by the PINN loss).
    pub epsilon: f64,
    /// Final time.
    pub t_end: f64,
}

impl LossWeights {
    pub const DEFAULT_LAMBDA0: f64 = 1e-2;

    /// `lambda0 (1 + R)^(-gamma)`.
    pub fn default_lambda(lambda0: f64, gamma: f64, r: f64) -> f64 {
        lambda0 * (1.0 + r).powf(-gamma)
    }

    pub fn new(gamma: f64, r: f64, epsilon: f64, t_end: f64, lambda_r: Option<f64>) -> Result<Self> {
        let w = Self {
            lambda_r: lambda_r.unwrap_or_else(|| Self::default_lambda(Self::DEFAULT_LAMBDA0, gamma, r)),
            gamma,
            r,
            epsilon,
            t_end,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_R", self.lambda_r),
            ("R", self.r),
            ("epsilon", self.epsilon),
            ("T", self.t_end),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Sample counts per loss component for stochastic estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchSizes {
    pub interior: usize,
    pub initial: usize,
    pub boundary: usize,
    pub constraint: usize,
}

impl Default for BatchSizes {
    fn default() -> Self {
        Self {
            interior: 1024,
            initial: 256,
            boundary: 256,
            constraint: 256,
        }
    }
}

impl BatchSizes {
    pub fn uniform(n: usize) -> Self {
        Self {
            interior: n,
            initial: n,
            boundary: n,
            constraint: n,
        }
    }
}

/// How a breakdown's integrals are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    Quadrature,
    MonteCarlo { seed: u64, n: usize },
}

/// Component norms of the PINN generalization error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinnBreakdown {
    pub eg_i: f64,
    pub eg_t: f64,
    pub eg_b: f64,
    pub eg_p: f64,
    pub lambda_r: f64,
    pub eg_total: f64,
    pub samples: usize,
    pub rule: String,
}

impl PinnBreakdown {
    pub fn aggregate(eg_i: f64, eg_t: f64, eg_b: f64, eg_p: f64, lambda_r: f64) -> f64 {
        (eg_i * eg_i + eg_t * eg_t + eg_b * eg_b + lambda_r * eg_p * eg_p).sqrt()
    }
}

/// Component norms of the APNN generalization error: `r1 = ||R1||`,
/// `r2 = ||R2 / sqrt(M)||`, `r3`, `r4`, and `r5 = ||R5||`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApnnBreakdown {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    pub eg_total: f64,
    pub samples: usize,
    pub rule: String,
}

impl ApnnBreakdown {
    pub fn aggregate(r: [f64; 5]) -> f64 {
        r.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LossBreakdown {
    Pinn(PinnBreakdown),
    Apnn(ApnnBreakdown),
}

impl LossBreakdown {
    pub fn eg_total(&self) -> f64 {
        match self {
            LossBreakdown::Pinn(b) => b.eg_total,
            LossBreakdown::Apnn(b) => b.eg_total,
        }
    }

    /// Whether `eg_total` equals the aggregate of the stored components,
    /// bit for bit.
    pub fn aggregation_holds(&self) -> bool {
        let expect = match self {
            LossBreakdown::Pinn(b) => PinnBreakdown::aggregate(b.eg_i, b.eg_t, b.eg_b, b.eg_p, b.lambda_r),
            LossBreakdown::Apnn(b) => ApnnBreakdown::aggregate([b.r1, b.r2, b.r3, b.r4, b.r5]),
        };
        expect.to_bits() == self.eg_total().to_bits()
    }

    /// Flat record with one named column per component, for CSV output.
    pub fn to_row(&self) -> BreakdownRow {
        match self {
            LossBreakdown::Pinn(b) => BreakdownRow {
                mode: "pinn".into(),
                eg_total: b.eg_total,
                eg_i: Some(b.eg_i),
                eg_t: Some(b.eg_t),
                eg_b: Some(b.eg_b),
                eg_p: Some(b.eg_p),
                lambda_r: Some(b.lambda_r),
                r1: None,
                r2: None,
                r3: None,
                r4: None,
                r5: None,
                samples: b.samples,
                rule: b.rule.clone(),
            },
            LossBreakdown::Apnn(b) => BreakdownRow {
                mode: "apnn".into(),
                eg_total: b.eg_total,
                eg_i: None,
                eg_t: None,
                eg_b: None,
                eg_p: None,
                lambda_r: None,
                r1: Some(b.r1),
                r2: Some(b.r2),
                r3: Some(b.r3),
                r4: Some(b.r4),
                r5: Some(b.r5),
                samples: b.samples,
                rule: b.rule.clone(),
            },
        }
    }
}

/// CSV shape of a [`LossBreakdown`]; inapplicable columns are empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub mode: String,
    pub eg_total: f64,
    pub eg_i: Option<f64>,
    pub eg_t: Option<f64>,
    pub eg_b: Option<f64>,
    pub eg_p: Option<f64>,
    pub lambda_r: Option<f64>,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub r3: Option<f64>,
    pub r4: Option<f64>,
    pub r5: Option<f64>,
    pub samples: usize,
    pub rule: String,
}

impl BreakdownRow {
    pub fn into_breakdown(self) -> Result<LossBreakdown> {
        let missing = || Error::Format("breakdown row lacks a component column".into());
        match self.mode.as_str() {
            "pinn" => Ok(LossBreakdown::Pinn(PinnBreakdown {
                eg_i: self.eg_i.ok_or_else(missing)?,
                eg_t: self.eg_t.ok_or_else(missing)?,
                eg_b: self.eg_b.ok_or_else(missing)?,
                eg_p: self.eg_p.ok_or_else(missing)?,
                lambda_r: self.lambda_r.ok_or_else(missing)?,
                eg_total: self.eg_total,
                samples: self.samples,
                rule: self.rule,
            })),
            "apnn" => Ok(LossBreakdown::Apnn(ApnnBreakdown {
                r1: self.r1.ok_or_else(missing)?,
                r2: self.r2.ok_or_else(missing)?,
                r3: self.r3.ok_or_else(missing)?,
                r4: self.r4.ok_or_else(missing)?,
                r5: self.r5.ok_or_else(missing)?,
                eg_total: self.eg_total,
                samples: self.samples,
                rule: self.rule,
            })),
            other => Err(Error::Format(format!("unknown breakdown mode `{other}`"))),
        }
    }
}

/// A trainable generalization-error functional over one or more networks.
///
/// Implementations see only the problem data (operators, initial data,
/// sources), never a reference solution: total errors are measured
/// elsewhere.
pub trait Objective: Sync {
    fn architectures(&self) -> Vec<Architecture>;

    /// Stochastic estimate of `E_G^2` and its gradient with respect to the
    /// parameters of each network.
    fn batch_loss(
        &self,
        nets: &[TanhNetwork],
        batches: &BatchSizes,
        rng: &mut ChaCha8Rng,
    ) -> Result<(f64, Vec<Vec<f64>>)>;

    /// Component breakdown of `E_G`.
    fn breakdown(&self, nets: &[TanhNetwork], mode: EvalMode) -> Result<LossBreakdown>;
}

pub(crate) fn check_nets(nets: &[TanhNetwork], archs: &[Architecture]) -> Result<()> {
    if nets.len() != archs.len() {
        return Err(Error::LengthMismatch {
            expected: archs.len(),
            got: nets.len(),
        });
    }
    for (n, a) in nets.iter().zip(archs) {
        let got = n.architecture();
        if got.dx != a.dx || got.dxi != a.dxi {
            return Err(Error::InvalidArgument(format!(
                "network inputs (dx={}, dxi={}) do not match the problem (dx={}, dxi={})",
                got.dx, got.dxi, a.dx, a.dxi
            )));
        }
    }
    Ok(())
}

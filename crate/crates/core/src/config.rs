//! Run configuration, read from TOML with sections `[network]`,
//! `[optimizer]`, `[weights]`, `[scenario]`, `[rules]`, `[study]` and
//! `[suite]`.
//! Every field has a default, so an empty file is a valid configuration.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kinetic::{AlphaForm, AlphaKernel, AngularProfile, AssembledCollision, CollisionKernel};
use crate::losses::apnn::{ApnnInitial, ApnnProblem};
use crate::losses::pinn::PinnProblem;
use crate::losses::{BatchSizes, LossWeights};
use crate::network::{Architecture, TanhNetwork};
use crate::quadrature::{CubeScheme, SpaceTimeGrid, SphereRule, VelocityQuadrature};
use crate::reference::{ApStudyConfig, ManufacturedCase, OracleRules};
use crate::train::{AdamConfig, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Pinn,
    Apnn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub hidden: Vec<usize>,
    pub periodic: bool,
    /// APNN only: the micro network outputs `g / M` instead of `g`.
    pub scaled_micro: bool,
    /// Initialization seed; network `k` of a run uses `seed + k`.
    pub seed: u64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            hidden: vec![40; 4],
            periodic: true,
            scaled_micro: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub log_every: usize,
    pub checkpoint_every: usize,
    pub divergence_factor: f64,
    /// Mini-batch sampler seed.
    pub seed: u64,
    pub batches: BatchSizes,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            iterations: 2000,
            log_every: 100,
            checkpoint_every: 0,
            divergence_factor: 1e6,
            seed: 1,
            batches: BatchSizes::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsSection {
    /// `lambda_R = lambda0 (1 + R)^(-gamma)` unless `lambda_r` is set.
    pub lambda0: f64,
    pub lambda_r: Option<f64>,
    /// Kernel exponent, also used in the `(1 + R)^gamma` weights.
    pub gamma: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub epsilon: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        Self {
            lambda0: LossWeights::DEFAULT_LAMBDA0,
            lambda_r: None,
            gamma: 0.0,
            r: 8.0,
            epsilon: 1.0,
            t_end: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub mode: Mode,
    /// Manufactured case name (PINN mode).
    pub case: String,
    pub dx: usize,
    pub pinn_dxi: usize,
    pub apnn_dxi: usize,
    pub profile: AngularProfile,
    pub kernel_amplitude: f64,
    pub alpha: AlphaForm,
    /// `rho0 = 1 + amplitude cos x` (APNN mode).
    pub rho_amplitude: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            mode: Mode::Pinn,
            case: "decay".into(),
            dx: 1,
            pinn_dxi: 2,
            apnn_dxi: 1,
            profile: AngularProfile::AbsCos,
            kernel_amplitude: 1.0,
            alpha: AlphaForm::default(),
            rho_amplitude: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RulesSection {
    pub velocity_points: usize,
    pub velocity_scheme: CubeScheme,
    pub sphere_dirs: usize,
    pub oracle_points: usize,
    pub oracle_dirs: usize,
    pub ap_velocity_points: usize,
    pub ap_velocity_scheme: CubeScheme,
    pub x_points: usize,
    pub t_points: usize,
    pub dvm_x_cells: usize,
    pub dvm_dt_factor: f64,
    pub dvm_dt_max: f64,
    pub dvm_snapshots: usize,
}

impl Default for RulesSection {
    fn default() -> Self {
        Self {
            velocity_points: 16,
            velocity_scheme: CubeScheme::Midpoint,
            sphere_dirs: 8,
            oracle_points: 32,
            oracle_dirs: 16,
            ap_velocity_points: 32,
            ap_velocity_scheme: CubeScheme::GaussLegendre,
            x_points: 32,
            t_points: 8,
            dvm_x_cells: 64,
            dvm_dt_factor: 0.05,
            dvm_dt_max: 0.01,
            dvm_snapshots: 20,
        }
    }
}

/// Study sweeps and verdict thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    /// Network seed offsets, one training run each.
    pub seeds: Vec<u64>,
    /// Checkpoint thresholds as fractions of each run's initial `E_G`,
    /// strictly decreasing.
    pub threshold_fractions: Vec<f64>,
    pub min_pairs: usize,
    /// Checkpoints each seed must reach.
    pub min_checkpoints: usize,
    pub min_spearman: f64,
    pub max_c_spread: f64,
    pub epsilons: Vec<f64>,
    /// AP study: the `rho` check applies to the smallest `eps` whose final
    /// `E_G` is at most this.
    pub eg_threshold: f64,
    pub rho_tolerance: f64,
    /// Upper bound on the fitted constant in `E_T <= C (E_G + tails)`.
    pub max_c: f64,
    /// Velocities with `|xi| > tail_fraction R / 2` count as tails.
    pub tail_fraction: f64,
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2],
            threshold_fractions: vec![0.7, 0.5, 0.4, 0.33, 0.28, 0.24, 0.21, 0.19, 0.17, 0.155, 0.14, 0.125],
            min_pairs: 4,
            min_checkpoints: 10,
            min_spearman: 0.9,
            max_c_spread: 10.0,
            epsilons: vec![1.0, 0.1, 0.01],
            eg_threshold: 0.25,
            rho_tolerance: 5e-2,
            max_c: 10.0,
            tail_fraction: 0.8,
        }
    }
}

/// Rules and tolerances of the operator suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSection {
    pub seed: u64,
    /// Conservation: random isotropic two-temperature mixtures on a 2-D rule.
    pub conservation_points: usize,
    pub conservation_dirs: usize,
    pub conservation_samples: usize,
    pub mixture_temperatures: [f64; 2],
    pub conservation_tolerance: f64,
    /// Kernel identities for `K` and `Gamma` on a 3-D rule.
    pub identity_points: usize,
    pub identity_dirs: usize,
    pub identity_tolerance: f64,
    /// Truncated-argument identities are flagged rather than failed when
    /// the Gaussian mass outside the cube exceeds this.
    pub tail_mass_limit: f64,
    pub entropy_points: usize,
    pub entropy_dirs: usize,
    pub entropy_samples: usize,
    pub entropy_tolerance: f64,
    /// Local-estimate probes: batch size and admissible max/min spread.
    pub probe_points: usize,
    pub probe_dirs: usize,
    pub probe_samples: usize,
    pub probe_spread: f64,
    /// Relaxation closed forms hold once the Maxwellian tail is negligible.
    pub closed_form_side: f64,
    pub closed_form_points: usize,
    pub closed_form_tolerance: f64,
    pub h_tolerance: f64,
    pub diffusion_tolerance: f64,
    /// Identities exact up to rounding.
    pub exact_tolerance: f64,
    pub positivity_floor: f64,
    pub mass_tolerance: f64,
    pub macro_tolerance: f64,
    /// Residual of the manufactured equation at off-grid points.
    pub closure_tolerance: f64,
    pub mc_seeds: usize,
    pub mc_samples: usize,
    pub mc_standard_errors: f64,
    pub min_order: f64,
}

impl Default for SuiteSection {
    fn default() -> Self {
        Self {
            seed: 7,
            conservation_points: 24,
            conservation_dirs: 16,
            conservation_samples: 6,
            mixture_temperatures: [0.3, 0.5],
            conservation_tolerance: 1e-6,
            identity_points: 12,
            identity_dirs: 26,
            identity_tolerance: 1e-10,
            tail_mass_limit: 1e-6,
            entropy_points: 16,
            entropy_dirs: 8,
            entropy_samples: 100,
            entropy_tolerance: 1e-8,
            probe_points: 12,
            probe_dirs: 8,
            probe_samples: 8,
            probe_spread: 1e3,
            closed_form_side: 16.0,
            closed_form_points: 32,
            closed_form_tolerance: 1e-10,
            h_tolerance: 1e-8,
            diffusion_tolerance: 1e-6,
            exact_tolerance: 1e-12,
            positivity_floor: 1e-10,
            mass_tolerance: 1e-8,
            macro_tolerance: 1e-3,
            closure_tolerance: 1e-8,
            mc_seeds: 50,
            mc_samples: 128,
            mc_standard_errors: 3.0,
            min_order: 0.8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkSection,
    pub optimizer: OptimizerSection,
    pub weights: WeightsSection,
    pub scenario: ScenarioSection,
    pub rules: RulesSection,
    pub study: StudySection,
    pub suite: SuiteSection,
}

/// A PINN problem with its manufactured reference.
pub struct PinnSetup {
    pub problem: PinnProblem,
    pub case: Arc<ManufacturedCase>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical TOML rendering, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn kernel(&self) -> Result<CollisionKernel> {
        CollisionKernel::new(self.weights.gamma, self.scenario.profile, self.scenario.kernel_amplitude)
    }

    pub fn loss_weights(&self) -> Result<LossWeights> {
        let w = &self.weights;
        let lambda = w
            .lambda_r
            .unwrap_or_else(|| LossWeights::default_lambda(w.lambda0, w.gamma, w.r));
        LossWeights::new(w.gamma, w.r, w.epsilon, w.t_end, Some(lambda))
    }

    pub fn architecture(&self, mode: Mode) -> Architecture {
        Architecture {
            dx: self.scenario.dx,
            dxi: match mode {
                Mode::Pinn => self.scenario.pinn_dxi,
                Mode::Apnn => self.scenario.apnn_dxi,
            },
            hidden: self.network.hidden.clone(),
            periodic: self.network.periodic,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let o = &self.optimizer;
        TrainConfig {
            adam: AdamConfig {
                learning_rate: o.learning_rate,
                beta1: o.beta1,
                beta2: o.beta2,
                epsilon: o.epsilon,
            },
            iterations: o.iterations,
            batches: o.batches,
            seed: o.seed,
            log_every: o.log_every,
            checkpoint_every: o.checkpoint_every,
            divergence_factor: o.divergence_factor,
        }
    }

    pub fn space_time(&self) -> Result<SpaceTimeGrid> {
        SpaceTimeGrid::new(
            self.scenario.dx,
            self.rules.x_points,
            self.rules.t_points,
            self.weights.t_end,
        )
    }

    pub fn collision_operator(&self) -> Result<Arc<AssembledCollision>> {
        let r = &self.rules;
        let rule = Arc::new(VelocityQuadrature::cube_with(
            self.scenario.pinn_dxi,
            self.weights.r,
            r.velocity_points,
            r.velocity_scheme,
        )?);
        let sphere = SphereRule::new(self.scenario.pinn_dxi, r.sphere_dirs)?;
        Ok(Arc::new(AssembledCollision::new(&self.kernel()?, rule, &sphere)?))
    }

    pub fn pinn(&self) -> Result<PinnSetup> {
        let op = self.collision_operator()?;
        self.pinn_with(op)
    }

    /// As [`RunConfig::pinn`] with an already assembled operator.
    pub fn pinn_with(&self, op: Arc<AssembledCollision>) -> Result<PinnSetup> {
        let r = &self.rules;
        let oracle = OracleRules::new(
            self.kernel()?,
            self.scenario.pinn_dxi,
            self.weights.r,
            r.oracle_points,
            r.oracle_dirs,
        )?;
        let case = Arc::new(ManufacturedCase::new(&self.scenario.case, &op, oracle)?);
        let problem = PinnProblem::new(
            self.architecture(Mode::Pinn),
            self.loss_weights()?,
            op,
            self.space_time()?,
            case.clone(),
        )?;
        Ok(PinnSetup { problem, case })
    }

    pub fn alpha(&self) -> Result<AlphaKernel> {
        AlphaKernel::new(self.scenario.alpha)
    }

    pub fn ap_study(&self) -> ApStudyConfig {
        ApStudyConfig {
            alpha: self.scenario.alpha,
            side: self.weights.r,
            velocity_points: self.rules.ap_velocity_points,
            scheme: self.rules.ap_velocity_scheme,
            x_cells: self.rules.dvm_x_cells,
            t_end: self.weights.t_end,
            dt_factor: self.rules.dvm_dt_factor,
            dt_max: self.rules.dvm_dt_max,
            snapshots: self.rules.dvm_snapshots,
            amplitude: self.scenario.rho_amplitude,
        }
    }

    /// The APNN problem at `epsilon` with well-prepared initial data.
    pub fn apnn(&self, epsilon: f64) -> Result<ApnnProblem> {
        if self.scenario.dx != 1 || self.scenario.apnn_dxi != 1 {
            return Err(Error::Config("APNN runs use d_x = d_xi = 1".into()));
        }
        let study = self.ap_study();
        let amp = self.scenario.rho_amplitude;
        let initial = ApnnInitial::well_prepared(
            format!("well_prepared:1+{amp}cos"),
            Arc::new(move |x: &[f64]| 1.0 + amp * x[0].cos()),
        );
        ApnnProblem::new(
            &self.architecture(Mode::Apnn),
            epsilon,
            &self.alpha()?,
            study.rule()?,
            self.space_time()?,
            initial,
            self.network.scaled_micro,
        )
    }

    /// Fresh networks for `mode`, seeded from `[network] seed + offset`.
    pub fn init_networks(&self, mode: Mode, offset: u64) -> Result<Vec<TanhNetwork>> {
        let arch = self.architecture(mode);
        let seed = self.network.seed.wrapping_add(offset);
        match mode {
            Mode::Pinn => Ok(vec![TanhNetwork::new(arch, seed)?]),
            Mode::Apnn => {
                let rho = Architecture { dxi: 0, ..arch.clone() };
                Ok(vec![
                    TanhNetwork::new(rho, seed)?,
                    TanhNetwork::new(arch, seed.wrapping_add(1_000_003))?,
                ])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.network.hidden, vec![40; 4]);
    }

    #[test]
    fn roundtrip_and_hash() {
        let mut c = RunConfig::default();
        c.weights.r = 6.0;
        c.scenario.alpha = AlphaForm::CosProduct {
            base: 1.0,
            amplitude: 0.25,
        };
        let text = c.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
        assert_ne!(RunConfig::default().hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("[network]\nwidth = 3\n").is_err());
    }

    #[test]
    fn sections_parse() {
        let c = RunConfig::from_toml(
            "[weights]\nR = 6.0\nT = 1.0\n[scenario]\nmode = \"apnn\"\nalpha = { form = \"constant\", value = 2.0 }\n[optimizer.batches]\ninterior = 64\n",
        )
        .unwrap();
        assert_eq!(c.weights.r, 6.0);
        assert_eq!(c.scenario.mode, Mode::Apnn);
        assert_eq!(c.optimizer.batches.interior, 64);
        assert_eq!(c.optimizer.batches.initial, 256);
    }
}

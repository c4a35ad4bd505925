//! Reference solutions: the discrete-velocity solver for the multiscale
//! linear model, its diffusion limit, and manufactured solutions of the
//! nonlinear perturbation equation.

pub mod ap_study;
pub mod diffusion;
pub mod dvm;
pub mod manufactured;

pub use ap_study::{
    ap_trajectory, dvm_ap_study, matching_diffusion, rho_distance, ApStudyConfig, ApStudyRow, ApStudyTable,
};
pub use diffusion::{diffusion_from_cells, diffusion_solve, DiffusionSolution};
pub use dvm::{dvm_solve, CollisionStep, DvmConfig, DvmField, DvmTrajectory, Splitting, Transport};
pub use manufactured::{ManufacturedCase, OracleRules, CATALOGUE};

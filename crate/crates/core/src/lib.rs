pub mod config;
pub mod error;
pub mod harness;
pub mod kinetic;
pub mod losses;
pub mod network;
pub mod par;
pub mod quadrature;
pub mod reference;
pub mod stats;
pub mod train;

pub use error::{Error, Result};

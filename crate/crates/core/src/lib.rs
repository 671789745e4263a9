//! Spatial excitation correlations of a trapped-ion chain.
//!
//! A weak sideband laser couples the electronic state of each addressed ion to
//! its displacement. Reading out which ions were excited gives a binary record
//! whose first and second moments are the single-ion probability `P_m` and the
//! joint probability `P_mn`. This crate computes both, to lowest order in the
//! coupling, for zero-mean Gaussian vibrational states:
//!
//! - [`chain`]: equilibrium positions and normal modes of the linear chain.
//! - [`gaussian`]: covariance-matrix description of Gaussian states.
//! - [`correlators`]: `P_m`, `P_mn` (split into its three Wick terms), `f_mn`,
//!   the rotating-wave closed forms, detuning scans and correlation maps.
//! - [`oracle`]: a truncated Fock-space engine that evaluates the same
//!   quantities by brute force, used to check the covariance path.
//! - [`records`]: sampling and estimation of simulated measurement records.
//!
//! All quantities are dimensionless: frequencies in units of the axial trap
//! frequency ν, times in units of `1/ν`.

pub mod chain;
pub mod correlators;
pub mod error;
pub mod gaussian;
pub mod oracle;
pub mod records;

pub use chain::{normal_modes, ChainSpec, NormalModes};
pub use correlators::{CorrelationReport, ProbePlan};
pub use error::{Error, Result};
pub use gaussian::GaussianCovariance;

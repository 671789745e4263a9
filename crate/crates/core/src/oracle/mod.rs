//! Truncated Fock-space oracle.
//!
//! Builds thermal, squeezed and number states of up to three modes explicitly,
//! evaluates correlators by operator products, and integrates the probability
//! formulas by quadrature. Nothing here relies on the Gaussian shortcuts used
//! in [`crate::correlators`], which is what makes it a useful cross-check.

pub mod moments;
pub mod quadrature;
pub mod space;
pub mod state;
pub mod verify;
pub mod wick;

pub use moments::{
    four_point_ordered, normal_ordered, ten_term_expansion, three_term_wick, two_point, vacuum_contraction,
    Insertion,
};
pub use quadrature::{integrate_pm, integrate_pmn, QuadratureEstimate, Rule};
pub use space::{phi_operator, FockSpace, Ladder, TruncatedMode};
pub use state::{suggested_cutoff, FockState, StateKind};
pub use verify::{run_verification, Check, VerifyConfig, VerifyReport};
pub use wick::{double_factorial_odd, wick_pairings, Pairing};

/// Most modes the oracle will handle.
pub const MAX_MODES: usize = 3;
/// Highest per-mode cutoff.
pub const MAX_CUTOFF: usize = 60;
/// Largest space for which dense matrices are formed.
pub const MAX_DENSE_DIM: usize = 1024;
/// States with more population than this in the top two levels are rejected.
pub const TAIL_LIMIT: f64 = 1e-8;

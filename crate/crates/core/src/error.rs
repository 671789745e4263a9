use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("equilibrium solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("degenerate geometry: ions {0} and {1} coincide")]
    DegenerateGeometry(usize, usize),

    #[error("degenerate spectrum: eigenvalues {0} and {1} closer than {2:.1e}")]
    DegenerateSpectrum(usize, usize, f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("perturbative validity violated: {0}")]
    Perturbative(String),

    #[error("detuning {detuning} does not match mode frequency {frequency} of mode {mode}")]
    OffResonance { mode: usize, detuning: f64, frequency: f64 },

    #[error("infeasible moments: {0}")]
    InfeasibleMoments(String),

    #[error("cutoff too small: tail mass {tail:.3e} exceeds {limit:.1e}")]
    CutoffTooSmall { tail: f64, limit: f64 },

    #[error("quadrature under-resolved: {0}")]
    Resolution(String),
}

pub type Result<T> = std::result::Result<T, Error>;

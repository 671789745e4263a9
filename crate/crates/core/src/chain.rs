//! Linear ion chain: Coulomb-crystal equilibrium, linearized coupling matrix,
//! and its normal modes.
//!
//! Everything here is dimensionless. Lengths are in units of
//! `(e² / 4πε₀ M ν²)^{1/3}` and frequencies in units of the axial trap
//! frequency ν, so the force on ion `m` reads
//!
//! ```text
//! F_m = u_m − Σ_{k<m} (u_m − u_k)^{-2} + Σ_{k>m} (u_m − u_k)^{-2}
//! ```
//!
//! and its Jacobian is the coupling matrix `A`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual force tolerance for the equilibrium solve.
pub const EQUILIBRIUM_TOL: f64 = 1e-12;
/// Newton iteration cap.
pub const EQUILIBRIUM_MAX_ITER: usize = 200;
/// Minimum eigenvalue gap before the spectrum is declared degenerate.
pub const DEGENERACY_GAP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_ions: usize,
    /// Axial trap frequency in rad/s. Only used to annotate outputs.
    pub trap_frequency: f64,
}

impl ChainSpec {
    pub fn new(n_ions: usize, trap_frequency: f64) -> Result<Self> {
        let spec = Self { n_ions, trap_frequency };
        spec.check()?;
        Ok(spec)
    }

    /// Chain with the trap frequency set to 1, i.e. everything in units of ν.
    pub fn dimensionless(n_ions: usize) -> Result<Self> {
        Self::new(n_ions, 1.0)
    }

    pub fn check(&self) -> Result<()> {
        if self.n_ions == 0 {
            return Err(Error::InvalidInput("n_ions must be at least 1".into()));
        }
        if !(self.trap_frequency > 0.0) || !self.trap_frequency.is_finite() {
            return Err(Error::InvalidInput(format!(
                "trap frequency must be positive, got {}",
                self.trap_frequency
            )));
        }
        Ok(())
    }
}

/// Eigenstructure of the linearized chain.
///
/// `mode_matrix` is `B` with `A = Bᵀ diag(μ) B`; row `p` is normal mode `p`, so
/// the geometric factor of ion `m` in mode `p` is `mode_matrix[(p, m)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalModes {
    pub positions: DVector<f64>,
    pub coupling: DMatrix<f64>,
    pub mode_matrix: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    /// Mode frequencies `√μ_p` in units of ν.
    pub frequencies: DVector<f64>,
    pub trap_frequency: f64,
}

impl NormalModes {
    pub fn n(&self) -> usize {
        self.positions.len()
    }

    /// `b_m^(p)` with zero-based ion `m` and mode `p`.
    pub fn b(&self, mode: usize, ion: usize) -> f64 {
        self.mode_matrix[(mode, ion)]
    }

    /// Vector `Λ^{-1/4} B e_m`: the weight `b_m^(r) μ_r^{-1/4}` of each mode
    /// in the local displacement of ion `m`.
    pub fn ion_weights(&self, ion: usize) -> DVector<f64> {
        DVector::from_fn(self.n(), |r, _| {
            self.mode_matrix[(r, ion)] * self.eigenvalues[r].powf(-0.25)
        })
    }

    /// Mode frequencies in rad/s.
    pub fn physical_frequencies(&self) -> DVector<f64> {
        &self.frequencies * self.trap_frequency
    }
}

fn force(u: &DVector<f64>) -> DVector<f64> {
    let n = u.len();
    DVector::from_fn(n, |m, _| {
        let mut f = u[m];
        for k in 0..n {
            if k == m {
                continue;
            }
            let d = u[m] - u[k];
            f -= d.signum() / (d * d);
        }
        f
    })
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Dimensionless equilibrium positions of `n_ions` ions, in ascending order.
pub fn solve_equilibrium(n_ions: usize) -> Result<DVector<f64>> {
    if n_ions == 0 {
        return Err(Error::InvalidInput("n_ions must be at least 1".into()));
    }
    if n_ions == 1 {
        return Ok(DVector::zeros(1));
    }
    let n = n_ions as f64;
    // empirical scaling of the chain length, ~2 n^0.44
    let half = 1.009 * (n - 1.0) / n.powf(0.559);
    let mut u = DVector::from_fn(n_ions, |m, _| -half + 2.0 * half * m as f64 / (n - 1.0));
    let mut f = force(&u);
    let mut residual = max_abs(&f);

    for _ in 0..EQUILIBRIUM_MAX_ITER {
        if residual < EQUILIBRIUM_TOL {
            return Ok(u);
        }
        let jac = coupling_matrix(&u)?;
        let step = jac
            .cholesky()
            .ok_or(Error::SolverFailure { iterations: 0, residual })?
            .solve(&f);
        let mut damping = 1.0;
        loop {
            let trial = &u - &step * damping;
            let ordered = trial.as_slice().windows(2).all(|w| w[0] < w[1]);
            if ordered {
                let ft = force(&trial);
                let rt = max_abs(&ft);
                if rt < residual || damping < 1e-6 {
                    u = trial;
                    f = ft;
                    residual = rt;
                    break;
                }
            }
            damping *= 0.5;
            if damping < 1e-9 {
                return Err(Error::SolverFailure { iterations: 0, residual });
            }
        }
    }
    if residual < EQUILIBRIUM_TOL {
        Ok(u)
    } else {
        Err(Error::SolverFailure { iterations: EQUILIBRIUM_MAX_ITER, residual })
    }
}

/// Linearized coupling matrix at the given positions:
/// `A_mm = 1 + 2 Σ_{k≠m} |u_m − u_k|^{-3}`, `A_mn = −2 |u_m − u_n|^{-3}`.
pub fn coupling_matrix(positions: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = positions.len();
    let mut a = DMatrix::identity(n, n);
    for m in 0..n {
        for k in (m + 1)..n {
            let d = (positions[m] - positions[k]).abs();
            if d == 0.0 || !d.is_finite() {
                return Err(Error::DegenerateGeometry(m + 1, k + 1));
            }
            let c = 2.0 / (d * d * d);
            a[(m, k)] = -c;
            a[(k, m)] = -c;
            a[(m, m)] += c;
            a[(k, k)] += c;
        }
    }
    Ok(a)
}

/// Fix the sign of a mode vector: the entry of largest magnitude is positive,
/// ties going to the lowest ion index.
fn fix_sign(row: &mut [f64]) {
    let max = row.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let tie = 1e-12 * max.max(1.0);
    if let Some(lead) = row.iter().position(|x| x.abs() >= max - tie) {
        if row[lead] < 0.0 {
            row.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

pub fn normal_modes(spec: &ChainSpec) -> Result<NormalModes> {
    spec.check()?;
    let positions = solve_equilibrium(spec.n_ions)?;
    let coupling = coupling_matrix(&positions)?;
    let n = spec.n_ions;

    let eig = SymmetricEigen::new(coupling.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    for p in 1..n {
        if eigenvalues[p] - eigenvalues[p - 1] < DEGENERACY_GAP {
            return Err(Error::DegenerateSpectrum(p, p + 1, DEGENERACY_GAP));
        }
    }
    if eigenvalues[0] <= 0.0 {
        return Err(Error::InvalidInput("coupling matrix is not positive definite".into()));
    }

    let mut mode_matrix = DMatrix::zeros(n, n);
    for (p, &i) in order.iter().enumerate() {
        let mut row: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        fix_sign(&mut row);
        for (m, v) in row.into_iter().enumerate() {
            mode_matrix[(p, m)] = v;
        }
    }
    let frequencies = eigenvalues.map(f64::sqrt);

    Ok(NormalModes {
        positions,
        coupling,
        mode_matrix,
        eigenvalues,
        frequencies,
        trap_frequency: spec.trap_frequency,
    })
}

/// `Bᵀ diag(μ^{-1/2}) B`, i.e. `A^{-1/2}`; entry `(m, n)` is the equal-time
/// commutator `[ψ_m, ψ†_n]` of the local field operators.
pub fn inverse_sqrt_coupling(modes: &NormalModes) -> DMatrix<f64> {
    let b = &modes.mode_matrix;
    let scale = DMatrix::from_diagonal(&modes.eigenvalues.map(|mu| 1.0 / mu.sqrt()));
    b.transpose() * scale * b
}

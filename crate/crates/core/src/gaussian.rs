//! Zero-mean Gaussian vibrational states described by their normal-mode
//! second moments.
//!
//! A state is stored as the pair `aa[(r, s)] = ⟨a_r a_s⟩` and
//! `na[(r, s)] = ⟨a†_r a_s⟩`. The remaining blocks follow from the bosonic
//! commutator: `⟨a†_r a†_s⟩ = aa[(r, s)]*` and `⟨a_r a†_s⟩ = na[(s, r)] + δ_rs`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::NormalModes;
use crate::error::{Error, Result};

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const PHYSICALITY_TOL: f64 = 1e-9;
/// Smallest target occupation accepted by [`thermal_with_target`].
pub const MIN_TARGET_OCCUPATION: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "StateDescription", try_from = "StateDescription")]
pub struct GaussianCovariance {
    pub aa: DMatrix<Complex64>,
    pub na: DMatrix<Complex64>,
    pub tag: String,
}

impl GaussianCovariance {
    pub fn new(aa: DMatrix<Complex64>, na: DMatrix<Complex64>, tag: impl Into<String>) -> Result<Self> {
        let n = aa.nrows();
        if n == 0 || !aa.is_square() || na.shape() != (n, n) {
            return Err(Error::InvalidState(format!(
                "covariance blocks must be square and equal size, got {:?} and {:?}",
                aa.shape(),
                na.shape()
            )));
        }
        Ok(Self { aa, na, tag: tag.into() })
    }

    pub fn n_modes(&self) -> usize {
        self.aa.nrows()
    }

    /// `⟨a†_r a†_s⟩`
    pub fn creation_pairs(&self) -> DMatrix<Complex64> {
        self.aa.map(|z| z.conj())
    }

    /// `⟨a_r a†_s⟩ = ⟨a†_s a_r⟩ + δ_rs`
    pub fn antinormal(&self) -> DMatrix<Complex64> {
        let n = self.n_modes();
        self.na.transpose() + DMatrix::identity(n, n)
    }

    /// Hermitian moment matrix `⟨ξ ξ†⟩` for `ξ = (a_1..a_n, a†_1..a†_n)`.
    /// Positive semidefinite for every physical state.
    pub fn moment_matrix(&self) -> DMatrix<Complex64> {
        let n = self.n_modes();
        let mut g = DMatrix::zeros(2 * n, 2 * n);
        g.view_mut((0, 0), (n, n)).copy_from(&self.antinormal());
        g.view_mut((0, n), (n, n)).copy_from(&self.aa);
        g.view_mut((n, 0), (n, n)).copy_from(&self.creation_pairs());
        g.view_mut((n, n), (n, n)).copy_from(&self.na);
        g
    }
}

pub fn vacuum(n_modes: usize) -> Result<GaussianCovariance> {
    if n_modes == 0 {
        return Err(Error::InvalidInput("n_modes must be at least 1".into()));
    }
    GaussianCovariance::new(
        DMatrix::zeros(n_modes, n_modes),
        DMatrix::zeros(n_modes, n_modes),
        "vacuum",
    )
}

/// Bose occupation `1/(e^x − 1)`.
pub fn bose(x: f64) -> f64 {
    1.0 / x.exp_m1()
}

/// Thermal state at inverse temperature `beta` (units of `1/ħν`).
pub fn thermal(modes: &NormalModes, beta: f64) -> Result<GaussianCovariance> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("inverse temperature must be positive, got {beta}")));
    }
    let occupations = modes.frequencies.map(|nu| bose(beta * nu));
    let na = DMatrix::from_diagonal(&occupations.map(|x| Complex64::new(x, 0.0)));
    let n = modes.n();
    GaussianCovariance::new(DMatrix::zeros(n, n), na, "thermal")
}

/// Inverse temperature at which mode `target_mode` (zero-based) holds
/// `occupation` phonons.
pub fn beta_for_occupation(modes: &NormalModes, target_mode: usize, occupation: f64) -> Result<f64> {
    if target_mode >= modes.n() {
        return Err(Error::InvalidInput(format!(
            "mode {} out of range 1..={}",
            target_mode + 1,
            modes.n()
        )));
    }
    if !(occupation > MIN_TARGET_OCCUPATION) || !occupation.is_finite() {
        return Err(Error::Domain(format!(
            "target occupation must exceed {MIN_TARGET_OCCUPATION:e}, got {occupation}"
        )));
    }
    Ok((1.0 / occupation).ln_1p() / modes.frequencies[target_mode])
}

pub fn thermal_with_target(
    modes: &NormalModes,
    target_mode: usize,
    occupation: f64,
) -> Result<GaussianCovariance> {
    let beta = beta_for_occupation(modes, target_mode, occupation)?;
    let mut state = thermal(modes, beta)?;
    // pin the target exactly; the round trip through ln/exp costs a few ulps
    state.na[(target_mode, target_mode)] = Complex64::new(occupation, 0.0);
    Ok(state)
}

/// Every normal mode squeezed with the same strength, `n̄ = sinh² r`.
pub fn squeezed_uniform(n_modes: usize, occupation: f64) -> Result<GaussianCovariance> {
    if n_modes == 0 {
        return Err(Error::InvalidInput("n_modes must be at least 1".into()));
    }
    if !(occupation >= 0.0) || !occupation.is_finite() {
        return Err(Error::Domain(format!("mean occupation must be non-negative, got {occupation}")));
    }
    let pair = -(occupation * (occupation + 1.0)).sqrt();
    let aa = DMatrix::from_diagonal_element(n_modes, n_modes, Complex64::new(pair, 0.0));
    let na = DMatrix::from_diagonal_element(n_modes, n_modes, Complex64::new(occupation, 0.0));
    let tag = if occupation == 0.0 { "vacuum" } else { "squeezed" };
    GaussianCovariance::new(aa, na, tag)
}

pub fn mean_occupation(cov: &GaussianCovariance) -> Result<Vec<f64>> {
    cov.na
        .diagonal()
        .iter()
        .enumerate()
        .map(|(p, z)| {
            if z.im.abs() > SYMMETRY_TOL {
                Err(Error::InvalidState(format!(
                    "mode {} occupation has imaginary part {:.3e}",
                    p + 1,
                    z.im
                )))
            } else {
                Ok(z.re)
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Violation {
    /// `⟨a aᵀ⟩` not symmetric; worst `|aa − aaᵀ|`.
    PairAsymmetry(f64),
    /// `⟨ã aᵀ⟩` not Hermitian; worst `|na − na†|`.
    NotHermitian(f64),
    /// `⟨ã aᵀ⟩` has a negative eigenvalue.
    NotPositive(f64),
    /// The full moment matrix has a negative eigenvalue (uncertainty relation).
    Unphysical(f64),
    NonFinite,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub violations: Vec<Violation>,
}

impl Diagnostics {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn min_hermitian_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    // symmetrize first so round-off asymmetry does not leak into the spectrum
    let h = (m + m.adjoint()).map(|z| z * 0.5);
    SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn validate(cov: &GaussianCovariance) -> Diagnostics {
    let mut violations = Vec::new();
    if cov.aa.iter().chain(cov.na.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Diagnostics { violations: vec![Violation::NonFinite] };
    }

    let asym = (&cov.aa - cov.aa.transpose()).iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    if asym > SYMMETRY_TOL {
        violations.push(Violation::PairAsymmetry(asym));
    }
    let herm = (&cov.na - cov.na.adjoint()).iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    if herm > SYMMETRY_TOL {
        violations.push(Violation::NotHermitian(herm));
    }
    let min_na = min_hermitian_eigenvalue(&cov.na);
    if min_na < -PSD_TOL {
        violations.push(Violation::NotPositive(min_na));
    }
    let min_full = min_hermitian_eigenvalue(&cov.moment_matrix());
    if min_full < -PHYSICALITY_TOL {
        violations.push(Violation::Unphysical(min_full));
    }
    Diagnostics { violations }
}

/// JSON layout of a state: matrices as nested arrays of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDescription {
    pub n_modes: usize,
    #[serde(default)]
    pub tag: String,
    pub aa: Vec<Vec<[f64; 2]>>,
    pub na: Vec<Vec<[f64; 2]>>,
}

pub fn matrix_to_pairs(m: &DMatrix<Complex64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

pub fn pairs_to_matrix(rows: &[Vec<[f64; 2]>], n: usize) -> Result<DMatrix<Complex64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidState(format!("expected a {n}x{n} matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |r, c| Complex64::new(rows[r][c][0], rows[r][c][1])))
}

impl From<GaussianCovariance> for StateDescription {
    fn from(cov: GaussianCovariance) -> Self {
        Self {
            n_modes: cov.n_modes(),
            tag: cov.tag.clone(),
            aa: matrix_to_pairs(&cov.aa),
            na: matrix_to_pairs(&cov.na),
        }
    }
}

impl TryFrom<StateDescription> for GaussianCovariance {
    type Error = Error;

    fn try_from(desc: StateDescription) -> Result<Self> {
        let aa = pairs_to_matrix(&desc.aa, desc.n_modes)?;
        let na = pairs_to_matrix(&desc.na, desc.n_modes)?;
        GaussianCovariance::new(aa, na, desc.tag)
    }
}

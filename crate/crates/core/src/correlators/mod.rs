//! Excitation probabilities of addressed ions to lowest order in the probe
//! coupling `g = Ω₀η`.
//!
//! For a zero-mean Gaussian state both probabilities reduce to quadratic forms
//! in the ion weight vectors `w_m = Λ^{-1/4} B e_m`:
//!
//! ```text
//! P_m     = (gT)² w_mᵀ M w_m
//! P_mn    = P_m P_n + (gT)⁴ |w_mᵀ M w_n|² + (gT)⁴ |w_mᵀ M̊ w_n|²
//! ```
//!
//! `M` collects the untimed two-point function integrated against the probe
//! phases, `M̊` the time-ordered one. See [`ProbeKernel`].

pub mod integrals;
mod scan;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::NormalModes;
use crate::error::{Error, Result};
use crate::gaussian::GaussianCovariance;

pub use integrals::{ring_s_halves, ring_s_matrix, s_matrix, sinc};
pub use scan::{corr_map, detuning_scan, CorrMap, ScanRow};

/// Hard perturbative limit on `gT`.
pub const MAX_GT: f64 = 0.3;
/// Above this `gT` a warning is attached.
pub const WARN_GT: f64 = 0.1;
/// Probabilities above this carry a warning.
pub const WARN_PROBABILITY: f64 = 0.1;
/// Probabilities above this are rejected.
pub const MAX_PROBABILITY: f64 = 0.5;
/// The rotating-wave closed forms require `Tν` at least this long.
pub const RWA_MIN_WINDOW: f64 = 20.0;
/// Detuning must sit this close to a mode frequency for the RWA forms.
pub const RESONANCE_TOL: f64 = 1e-9;
const IMAG_TOL: f64 = 1e-12;

/// Probe parameters in units of the trap frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbePlan {
    /// `Δ = ω_A − ω_L`; positive is red of the atomic line.
    pub detuning: f64,
    /// Separate detunings for the two ions. Only the rotating-wave path uses them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ion_detunings: Option<[f64; 2]>,
    /// `gT = Ω₀ηT`.
    pub gt: f64,
    /// `Tν`.
    pub window: f64,
    /// Addressed ions, 1-based.
    pub ions: (usize, usize),
}

impl ProbePlan {
    pub fn new(detuning: f64, gt: f64, window: f64, ions: (usize, usize)) -> Self {
        Self { detuning, ion_detunings: None, gt, window, ions }
    }

    pub fn coupling(&self) -> f64 {
        self.gt / self.window
    }

    pub fn with_detuning(&self, detuning: f64) -> Self {
        Self { detuning, ..self.clone() }
    }

    pub fn with_ions(&self, m: usize, n: usize) -> Self {
        Self { ions: (m, n), ..self.clone() }
    }

    /// Checks the plan against a chain of `n_ions`, returning any warnings.
    pub fn check(&self, n_ions: usize) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if !self.detuning.is_finite() {
            return Err(Error::InvalidInput("detuning must be finite".into()));
        }
        if !(self.window > 0.0) || !self.window.is_finite() {
            return Err(Error::InvalidInput(format!("window Tν must be positive, got {}", self.window)));
        }
        if !(self.gt > 0.0) || !self.gt.is_finite() {
            return Err(Error::InvalidInput(format!("gT must be positive, got {}", self.gt)));
        }
        if self.gt >= MAX_GT {
            return Err(Error::Perturbative(format!("gT = {} must stay below {MAX_GT}", self.gt)));
        }
        if self.gt > WARN_GT {
            warnings.push(format!("gT = {} exceeds {WARN_GT}; second-order truncation error grows", self.gt));
        }
        let (m, n) = self.ions;
        for ion in [m, n] {
            if ion == 0 || ion > n_ions {
                return Err(Error::InvalidInput(format!("ion index {ion} outside 1..={n_ions}")));
            }
        }
        Ok(warnings)
    }
}

/// Everything measured in one two-ion experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub plan: ProbePlan,
    pub state_tag: String,
    pub p_m: f64,
    pub p_n: f64,
    pub term1: f64,
    pub term2: f64,
    pub term3: f64,
    pub p_mn: f64,
    /// `P_mn / (P_m P_n)`; `None` when either single-ion probability vanishes.
    pub f_mn: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl CorrelationReport {
    pub const CSV_HEADER: &'static str = "m,n,delta,gT,Tnu,Pm,Pn,term1,term2,term3,Pmn,fmn,state_tag";

    pub fn csv_row(&self) -> String {
        let f = self.f_mn.map(|f| format!("{f:.12e}")).unwrap_or_else(|| "nan".into());
        format!(
            "{},{},{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{}",
            self.plan.ions.0,
            self.plan.ions.1,
            self.plan.detuning,
            self.plan.gt,
            self.plan.window,
            self.p_m,
            self.p_n,
            self.term1,
            self.term2,
            self.term3,
            self.p_mn,
            f,
            self.state_tag
        )
    }
}

/// `f = P_mn / (P_m P_n)`, or `None` when the denominator vanishes.
pub fn normalized_correlation(p_mn: f64, p_m: f64, p_n: f64) -> Option<f64> {
    let denom = p_m * p_n;
    (denom > f64::MIN_POSITIVE).then(|| p_mn / denom)
}

/// Mode-space kernels for one detuning and window.
///
/// `first_order` is
/// `⟨a aᵀ⟩∘S(−Δ,Δ) + ⟨ã ãᵀ⟩∘S(Δ,−Δ) + ⟨a ãᵀ⟩∘S(−Δ,−Δ) + ⟨ã aᵀ⟩∘S(Δ,Δ)`, the
/// normalized double integral of `e^{-iΔ(t−t')} K(t, t')`.
///
/// `time_ordered` is the normalized double integral of `e^{iΔ(t+t')} K̊(t, t')`,
/// where `K̊` is `K` for `t > t'` and `K*` for `t < t'`. Written out with the
/// triangle halves of [`ring_s_halves`]:
/// `⟨a aᵀ⟩∘S(Δ,Δ) + ⟨ã ãᵀ⟩∘S(−Δ,−Δ) + ⟨a ãᵀ⟩∘S̊₊(Δ,Δ) + (⟨ã aᵀ⟩+I)∘S̊₋(Δ,Δ)
///  + ⟨ã aᵀ⟩∘S̊₊(−Δ,−Δ)* + ⟨ã aᵀ⟩ᵀ∘S̊₋(−Δ,−Δ)*`.
#[derive(Clone, Debug)]
pub struct ProbeKernel {
    pub first_order: DMatrix<Complex64>,
    pub time_ordered: DMatrix<Complex64>,
    weights: Vec<DVector<f64>>,
}

fn hadamard_real(a: &DMatrix<Complex64>, s: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.zip_map(s, |z, x| z * x)
}

fn hadamard(a: &DMatrix<Complex64>, s: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.zip_map(s, |z, w| z * w)
}

impl ProbeKernel {
    pub fn new(detuning: f64, window: f64, cov: &GaussianCovariance, modes: &NormalModes) -> Result<Self> {
        if cov.n_modes() != modes.n() {
            return Err(Error::InvalidInput(format!(
                "state has {} modes but chain has {}",
                cov.n_modes(),
                modes.n()
            )));
        }
        let d = detuning;
        let aa = &cov.aa;
        let aa_conj = cov.creation_pairs();
        let anti = cov.antinormal();
        let na = &cov.na;
        let n = modes.n();

        let first_order = hadamard_real(aa, &s_matrix(-d, d, window, modes))
            + hadamard_real(&aa_conj, &s_matrix(d, -d, window, modes))
            + hadamard_real(&anti, &s_matrix(-d, -d, window, modes))
            + hadamard_real(na, &s_matrix(d, d, window, modes));

        let (upper_p, lower_p) = ring_s_halves(d, d, window, modes);
        let (upper_m, lower_m) = ring_s_halves(-d, -d, window, modes);
        let na_plus = na + DMatrix::<Complex64>::identity(n, n);
        let time_ordered = hadamard_real(aa, &s_matrix(d, d, window, modes))
            + hadamard_real(&aa_conj, &s_matrix(-d, -d, window, modes))
            + hadamard(&anti, &upper_p)
            + hadamard(&na_plus, &lower_p)
            + hadamard(na, &upper_m.map(|z| z.conj()))
            + hadamard(&na.transpose(), &lower_m.map(|z| z.conj()));

        let weights = (0..n).map(|m| modes.ion_weights(m)).collect();
        Ok(Self { first_order, time_ordered, weights })
    }

    fn form(&self, kernel: &DMatrix<Complex64>, m: usize, n: usize) -> Complex64 {
        let wm = &self.weights[m];
        let wn = &self.weights[n];
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..wm.len() {
            for s in 0..wn.len() {
                acc += kernel[(r, s)] * (wm[r] * wn[s]);
            }
        }
        acc
    }

    /// `w_mᵀ M w_n` for zero-based ions.
    pub fn untimed(&self, m: usize, n: usize) -> Complex64 {
        self.form(&self.first_order, m, n)
    }

    /// `w_mᵀ M̊ w_n` for zero-based ions.
    pub fn ordered(&self, m: usize, n: usize) -> Complex64 {
        self.form(&self.time_ordered, m, n)
    }

    /// `P_m / (gT)²` for a zero-based ion.
    pub fn single(&self, m: usize) -> Result<f64> {
        let z = self.untimed(m, m);
        if z.im.abs() > IMAG_TOL * z.re.abs().max(1.0) {
            return Err(Error::InvalidState(format!(
                "single-ion probability has imaginary part {:.3e}",
                z.im
            )));
        }
        if z.re < -IMAG_TOL {
            return Err(Error::InvalidState(format!("negative single-ion probability {:.3e}", z.re)));
        }
        Ok(z.re.max(0.0))
    }
}

fn check_probability(p: f64, what: &str, warnings: &mut Vec<String>) -> Result<()> {
    if p > MAX_PROBABILITY {
        return Err(Error::Perturbative(format!("{what} = {p:.3} exceeds {MAX_PROBABILITY}")));
    }
    if p > WARN_PROBABILITY {
        warnings.push(format!("{what} = {p:.3} exceeds {WARN_PROBABILITY}"));
    }
    Ok(())
}

/// Single-ion excitation probability `P_m` for 1-based ion `m`.
///
/// Valid for any state with the given second moments, Gaussian or not.
pub fn single_ion_probability(
    m: usize,
    plan: &ProbePlan,
    cov: &GaussianCovariance,
    modes: &NormalModes,
) -> Result<f64> {
    plan.with_ions(m, m).check(modes.n())?;
    let kernel = ProbeKernel::new(plan.detuning, plan.window, cov, modes)?;
    let p = plan.gt * plan.gt * kernel.single(m - 1)?;
    check_probability(p, &format!("P_{m}"), &mut Vec::new())?;
    Ok(p)
}

/// Joint probability `P_mn` with its Wick decomposition, for the ions in
/// `plan.ions`.
///
/// The three-term split is exact for zero-mean Gaussian states only. When
/// both indices coincide the joint probability collapses to `P_m`, reported
/// as `term1` with the other two terms zero.
pub fn pair_probability(
    plan: &ProbePlan,
    cov: &GaussianCovariance,
    modes: &NormalModes,
) -> Result<CorrelationReport> {
    let mut warnings = plan.check(modes.n())?;
    let kernel = ProbeKernel::new(plan.detuning, plan.window, cov, modes)?;
    report_from_kernel(&kernel, plan, &cov.tag, &mut warnings)
}

pub(crate) fn report_from_kernel(
    kernel: &ProbeKernel,
    plan: &ProbePlan,
    tag: &str,
    warnings: &mut Vec<String>,
) -> Result<CorrelationReport> {
    let (m, n) = plan.ions;
    let gt2 = plan.gt * plan.gt;
    let p_m = gt2 * kernel.single(m - 1)?;
    let p_n = gt2 * kernel.single(n - 1)?;
    check_probability(p_m, &format!("P_{m}"), warnings)?;
    check_probability(p_n, &format!("P_{n}"), warnings)?;

    let (term1, term2, term3) = if m == n {
        (p_m, 0.0, 0.0)
    } else {
        let gt4 = gt2 * gt2;
        (
            p_m * p_n,
            gt4 * kernel.untimed(m - 1, n - 1).norm_sqr(),
            gt4 * kernel.ordered(m - 1, n - 1).norm_sqr(),
        )
    };
    let p_mn = term1 + term2 + term3;
    check_probability(p_mn, &format!("P_{m}{n}"), warnings)?;

    Ok(CorrelationReport {
        plan: plan.clone(),
        state_tag: tag.to_string(),
        p_m,
        p_n,
        term1,
        term2,
        term3,
        p_mn,
        f_mn: normalized_correlation(p_mn, p_m, p_n),
        warnings: warnings.clone(),
    })
}

fn check_rwa(plan: &ProbePlan) -> Result<()> {
    if plan.window < RWA_MIN_WINDOW {
        return Err(Error::Domain(format!(
            "rotating-wave form needs Tν ≥ {RWA_MIN_WINDOW}, got {}",
            plan.window
        )));
    }
    if !(plan.gt > 0.0) || plan.gt > MAX_GT {
        return Err(Error::Perturbative(format!("rotating-wave form needs 0 < gT ≤ {MAX_GT}")));
    }
    Ok(())
}

fn check_resonance(detuning: f64, mode: usize, modes: &NormalModes) -> Result<()> {
    if mode >= modes.n() {
        return Err(Error::InvalidInput(format!("mode {} outside 1..={}", mode + 1, modes.n())));
    }
    let nu = modes.frequencies[mode];
    if (detuning - nu).abs() > RESONANCE_TOL {
        return Err(Error::OffResonance { mode: mode + 1, detuning, frequency: nu });
    }
    Ok(())
}

/// `⟨a†_p a†_q a_q a_p⟩` of a zero-mean Gaussian state, zero-based modes.
pub fn gaussian_fourth_moment(cov: &GaussianCovariance, p: usize, q: usize) -> f64 {
    cov.aa[(p, q)].norm_sqr() + cov.na[(p, q)].norm_sqr() + cov.na[(p, p)].re * cov.na[(q, q)].re
}

/// Red-sideband rotating-wave `P_m = (gT)² (b_m^(p))²/√μ_p ⟨a†_p a_p⟩`.
/// Ion `m` and mode `p` are 1-based.
pub fn rwa_single_probability(
    m: usize,
    p: usize,
    plan: &ProbePlan,
    cov: &GaussianCovariance,
    modes: &NormalModes,
) -> Result<f64> {
    plan.with_ions(m, m).check(modes.n())?;
    check_rwa(plan)?;
    let p0 = p.checked_sub(1).ok_or_else(|| Error::InvalidInput("mode index is 1-based".into()))?;
    check_resonance(plan.detuning, p0, modes)?;
    let b = modes.b(p0, m - 1);
    Ok(plan.gt * plan.gt * b * b / modes.eigenvalues[p0].sqrt() * cov.na[(p0, p0)].re)
}

/// Rotating-wave joint probability
/// `(gT)⁴ (b_m^(p) b_n^(p'))² / √(μ_p μ_p') ⟨a†_p a†_p' a_p' a_p⟩`.
///
/// With `plan.ion_detunings` unset both ions share `plan.detuning`, which must
/// equal `ν_p`, and `p'` must equal `p`. Otherwise ion `m` sits on `ν_p` and
/// ion `n` on `ν_p'`. Indices are 1-based.
pub fn rwa_pair_probability(
    p: usize,
    p_prime: usize,
    plan: &ProbePlan,
    cov: &GaussianCovariance,
    modes: &NormalModes,
) -> Result<f64> {
    plan.check(modes.n())?;
    check_rwa(plan)?;
    let (p0, q0) = match (p.checked_sub(1), p_prime.checked_sub(1)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::InvalidInput("mode indices are 1-based".into())),
    };
    match plan.ion_detunings {
        Some([dm, dn]) => {
            check_resonance(dm, p0, modes)?;
            check_resonance(dn, q0, modes)?;
        }
        None => {
            if p0 != q0 {
                return Err(Error::InvalidInput(
                    "distinct modes need separate ion detunings".into(),
                ));
            }
            check_resonance(plan.detuning, p0, modes)?;
        }
    }
    let (m, n) = plan.ions;
    let geometric = modes.b(p0, m - 1) * modes.b(q0, n - 1);
    let gt4 = plan.gt.powi(4);
    let mu = (modes.eigenvalues[p0] * modes.eigenvalues[q0]).sqrt();
    Ok(gt4 * geometric * geometric / mu * gaussian_fourth_moment(cov, p0, q0))
}

/// Covariance-path two-point matrix `Υ(t, t')_mn = ⟨φ_m(t) φ_n(t')⟩`.
pub fn two_point(cov: &GaussianCovariance, modes: &NormalModes, t: f64, tp: f64) -> DMatrix<Complex64> {
    to_ion_basis(&mode_two_point(cov, modes, t, tp), modes)
}

/// Time-ordered two-point matrix `⟨T{φ_m(t) φ_n(t')}⟩`.
pub fn two_point_ordered(cov: &GaussianCovariance, modes: &NormalModes, t: f64, tp: f64) -> DMatrix<Complex64> {
    let ups = two_point(cov, modes, t, tp);
    if t >= tp {
        ups
    } else {
        ups.map(|z| z.conj())
    }
}

/// `K(t, t') = ⟨[a(t) + ã(t)][a(t') + ã(t')]ᵀ⟩` in the mode basis.
pub fn mode_two_point(cov: &GaussianCovariance, modes: &NormalModes, t: f64, tp: f64) -> DMatrix<Complex64> {
    let nu = &modes.frequencies;
    let anti = cov.antinormal();
    let n = modes.n();
    DMatrix::from_fn(n, n, |r, s| {
        let e = |sr: f64, ss: f64| Complex64::from_polar(1.0, -(sr * nu[r] * t + ss * nu[s] * tp));
        cov.aa[(r, s)] * e(1.0, 1.0)
            + anti[(r, s)] * e(1.0, -1.0)
            + cov.na[(r, s)] * e(-1.0, 1.0)
            + cov.aa[(r, s)].conj() * e(-1.0, -1.0)
    })
}

fn to_ion_basis(k: &DMatrix<Complex64>, modes: &NormalModes) -> DMatrix<Complex64> {
    let n = modes.n();
    let left = DMatrix::from_fn(n, n, |r, m| {
        Complex64::new(modes.mode_matrix[(r, m)] * modes.eigenvalues[r].powf(-0.25), 0.0)
    });
    left.transpose() * k * left
}

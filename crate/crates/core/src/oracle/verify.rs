use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{normal_modes, ChainSpec, NormalModes};
use crate::correlators::{pair_probability, single_ion_probability, ProbePlan};
use crate::error::{Error, Result};
use crate::gaussian::{mean_occupation, squeezed_uniform, thermal_with_target, GaussianCovariance};

use super::moments::{four_point_ordered, ten_term_expansion, three_term_wick};
use super::quadrature::{integrate_pm, integrate_pmn, Rule};
use super::space::FockSpace;
use super::state::{suggested_cutoff, FockState, StateKind};
use super::wick::{double_factorial_odd, wick_pairings};

/// Settings for the oracle verification suite. The chain always has two ions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub window: f64,
    pub gt: f64,
    /// Target occupation of mode 1 (thermal) and of every mode (squeezed).
    pub nbar: f64,
    /// Fixed Fock cutoff; chosen from `tail_target` when absent.
    pub cutoff: Option<usize>,
    pub tail_target: f64,
    /// Time samples per axis of the randomized Wick grid.
    pub grid: usize,
    pub seed: u64,
    /// Also compare the covariance path against a single-phonon state, which
    /// is expected to fail.
    pub non_gaussian: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            window: 20.0,
            gt: 0.05,
            nbar: 0.5,
            cutoff: None,
            tail_target: 1e-13,
            grid: 3,
            seed: 7,
            non_gaussian: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    /// `true` when the check wants `value > tolerance`.
    pub exceeds: bool,
    pub passed: bool,
}

impl Check {
    fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, exceeds: false, passed: value < tolerance }
    }

    fn above(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, exceeds: true, passed: value > tolerance }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub cutoffs: Vec<usize>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn wick_residual<F>(state: &FockState, chain: &NormalModes, times: &[[f64; 4]], other: F) -> Result<f64>
where
    F: Fn(&FockState, &NormalModes, usize, usize, [f64; 4]) -> Result<num_complex::Complex64>,
{
    let mut worst: f64 = 0.0;
    for &t in times {
        let direct = four_point_ordered(state, chain, 0, 1, t)?;
        worst = worst.max((direct - other(state, chain, 0, 1, t)?).norm());
    }
    Ok(worst)
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn equivalence(
    label: &str,
    state: &FockState,
    cov: &GaussianCovariance,
    chain: &NormalModes,
    plan: &ProbePlan,
    checks: &mut Vec<Check>,
) -> Result<()> {
    let rule = Rule::gauss_legendre_for(plan, chain);
    let pm = integrate_pm(state, chain, plan, rule)?;
    let pmn = integrate_pmn(state, chain, plan, rule)?;
    let fast_pm = single_ion_probability(plan.ions.0, plan, cov, chain)?;
    let fast_pmn = pair_probability(plan, cov, chain)?.p_mn;
    checks.push(Check::below(&format!("{label}_pm_relative"), relative(pm.value, fast_pm), 1e-4));
    checks.push(Check::below(&format!("{label}_pmn_relative"), relative(pmn.value, fast_pmn), 1e-4));
    checks.push(Check::below(&format!("{label}_pmn_halving"), pmn.halving_error / pmn.value, 1e-4));
    Ok(())
}

/// Runs the oracle checks: pairing counts, Wick identities on a randomized
/// time grid, and finite-window agreement of the covariance path with direct
/// quadrature in the truncated Fock space.
pub fn run_verification(config: &VerifyConfig) -> Result<VerifyReport> {
    if config.grid == 0 || !(config.window > 0.0) || !(config.nbar > 0.0) {
        return Err(Error::InvalidInput("grid, window and nbar must be positive".into()));
    }
    let chain = normal_modes(&ChainSpec::dimensionless(2)?)?;
    let plan = ProbePlan::new(chain.frequencies[0], config.gt, config.window, (1, 2));
    plan.check(2)?;
    let mut checks = Vec::new();

    for n in 1..=3 {
        let count = wick_pairings(2 * n)?.len();
        let expect = double_factorial_odd(n);
        checks.push(Check::below(&format!("pairings_{}", 2 * n), (count as f64 - expect as f64).abs(), 0.5));
    }

    let th_cov = thermal_with_target(&chain, 0, config.nbar)?;
    let th_nbar = mean_occupation(&th_cov)?;
    let sq_cov = squeezed_uniform(2, config.nbar)?;
    let sq_nbar = vec![config.nbar; 2];
    let th_cut = match config.cutoff {
        Some(c) => c,
        None => suggested_cutoff(&th_nbar, StateKind::Thermal, config.tail_target)?,
    };
    let sq_cut = match config.cutoff {
        Some(c) => c,
        None => suggested_cutoff(&sq_nbar, StateKind::Squeezed, config.tail_target)?,
    };
    let thermal = FockState::thermal(&FockSpace::for_chain(&chain, th_cut)?, &th_nbar)?;
    let squeezed = FockState::squeezed(&FockSpace::for_chain(&chain, sq_cut)?, &sq_nbar)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let half = config.window / 2.0;
    let axes: Vec<Vec<f64>> =
        (0..4).map(|_| (0..config.grid).map(|_| rng.random_range(-half..half)).collect()).collect();
    let mut times = Vec::new();
    for &a in &axes[0] {
        for &b in &axes[1] {
            for &c in &axes[2] {
                for &d in &axes[3] {
                    times.push([a, b, c, d]);
                }
            }
        }
    }
    checks.push(Check::below("wick_thermal", wick_residual(&thermal, &chain, &times, three_term_wick)?, 1e-6));
    checks.push(Check::below("wick_squeezed", wick_residual(&squeezed, &chain, &times, three_term_wick)?, 1e-6));

    let phonon = FockState::number(&FockSpace::for_chain(&chain, 4)?, &[1, 0])?;
    checks.push(Check::above("wick_single_phonon_violation", wick_residual(&phonon, &chain, &times, three_term_wick)?, 1e-3));
    checks.push(Check::below("ten_term_single_phonon", wick_residual(&phonon, &chain, &times, ten_term_expansion)?, 1e-9));

    equivalence("thermal", &thermal, &th_cov, &chain, &plan, &mut checks)?;
    equivalence("squeezed", &squeezed, &sq_cov, &chain, &plan, &mut checks)?;

    let gl = integrate_pmn(&thermal, &chain, &plan, Rule::gauss_legendre_for(&plan, &chain))?;
    let trap = integrate_pmn(&thermal, &chain, &plan, Rule::Trapezoid { intervals: 40000 })?;
    checks.push(Check::below("rules_agree", relative(trap.value, gl.value), 1e-6));

    if config.non_gaussian {
        let phonon = FockState::number(&FockSpace::for_chain(&chain, 6)?, &[1, 0])?;
        let cov = phonon.covariance()?;
        equivalence("single_phonon", &phonon, &cov, &chain, &plan, &mut checks)?;
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { config: config.clone(), cutoffs: vec![th_cut, sq_cut], checks, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cutoff_is_an_error() {
        let cfg = VerifyConfig { cutoff: Some(4), ..VerifyConfig::default() };
        assert!(matches!(run_verification(&cfg), Err(Error::CutoffTooSmall { .. })));
    }
}

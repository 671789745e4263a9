//! Direct quadrature of the first- and second-order probability integrals in
//! the truncated Fock space.
//!
//! Because `φ_m(t)` is linear in the ladder operators, the tensor-product
//! quadrature sum over the time grid collapses onto one scalar weight per
//! ladder operator (first order) or per ordered ladder pair and triangle
//! (second order). The operator sums are then applied to the state exactly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::chain::NormalModes;
use crate::correlators::ProbePlan;
use crate::error::{Error, Result};

use super::space::{ladder_weights, FockSpace};
use super::state::FockState;

/// Minimum grid points per period of the fastest phase.
pub const MIN_POINTS_PER_PERIOD: f64 = 8.0;

const GL_X: [f64; 4] = [0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363];
const GL_W: [f64; 4] = [0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Composite 8-point Gauss-Legendre; triangles use a nested inner rule.
    GaussLegendre { panels: usize },
    /// Uniform trapezoid; the diagonal of the square is split evenly between
    /// the two triangles.
    Trapezoid { intervals: usize },
}

impl Rule {
    fn halved(self) -> Self {
        match self {
            Rule::GaussLegendre { panels } => Rule::GaussLegendre { panels: (panels / 2).max(1) },
            Rule::Trapezoid { intervals } => Rule::Trapezoid { intervals: (intervals / 2).max(1) },
        }
    }

    fn points(self) -> usize {
        match self {
            Rule::GaussLegendre { panels } => 8 * panels,
            Rule::Trapezoid { intervals } => intervals + 1,
        }
    }

    /// Gauss-Legendre panels keeping the phase advance per panel below 2 rad.
    pub fn gauss_legendre_for(plan: &ProbePlan, chain: &NormalModes) -> Self {
        let panels = (plan.window * fastest_phase(plan, chain) / 2.0).ceil() as usize;
        Rule::GaussLegendre { panels: panels.max(2) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadratureEstimate {
    pub value: f64,
    /// `|value − value on the grid with half the resolution|`.
    pub halving_error: f64,
    pub rule: Rule,
}

/// Composite 8-point Gauss-Legendre nodes and weights on `[lo, hi]`.
pub fn gauss_legendre_panels(lo: f64, hi: f64, panels: usize) -> Vec<(f64, f64)> {
    let h = (hi - lo) / panels as f64;
    let mut out = Vec::with_capacity(8 * panels);
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * h;
        for k in 0..4 {
            out.push((mid - GL_X[k] * h / 2.0, GL_W[k] * h / 2.0));
            out.push((mid + GL_X[k] * h / 2.0, GL_W[k] * h / 2.0));
        }
    }
    out
}

fn trapezoid_nodes(lo: f64, hi: f64, intervals: usize) -> Vec<(f64, f64)> {
    let h = (hi - lo) / intervals as f64;
    (0..=intervals)
        .map(|j| {
            let w = if j == 0 || j == intervals { 0.5 * h } else { h };
            (lo + j as f64 * h, w)
        })
        .collect()
}

fn line_nodes(rule: Rule, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    match rule {
        Rule::GaussLegendre { panels } => gauss_legendre_panels(lo, hi, panels),
        Rule::Trapezoid { intervals } => trapezoid_nodes(lo, hi, intervals),
    }
}

fn fastest_phase(plan: &ProbePlan, chain: &NormalModes) -> f64 {
    plan.detuning.abs() + chain.frequencies.iter().copied().fold(0.0, f64::max)
}

fn check_resolution(rule: Rule, plan: &ProbePlan, chain: &NormalModes) -> Result<()> {
    let omega = fastest_phase(plan, chain);
    if omega == 0.0 {
        return Ok(());
    }
    let per_period = rule.points() as f64 / plan.window * (2.0 * std::f64::consts::PI / omega);
    if per_period < MIN_POINTS_PER_PERIOD {
        return Err(Error::Resolution(format!(
            "{per_period:.1} points per period of the fastest phase, need {MIN_POINTS_PER_PERIOD}"
        )));
    }
    Ok(())
}

/// `∫ e^{iωt} dt` over the window for each `ω`.
fn line_integrals(rule: Rule, window: f64, omegas: &[f64]) -> Vec<Complex64> {
    let nodes = line_nodes(rule, -window / 2.0, window / 2.0);
    omegas
        .iter()
        .map(|&w| nodes.iter().map(|&(t, wt)| Complex64::from_polar(wt, w * t)).sum())
        .collect()
}

/// `upper[(k, l)] = ∫∫_{t>t'} e^{i(a_k t + a_l t')}` and the `t<t'` half,
/// for a common list of frequencies.
fn triangle_integrals(rule: Rule, window: f64, freqs: &[f64]) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let h = window / 2.0;
    let n = freqs.len();
    let mut upper = DMatrix::zeros(n, n);
    let mut lower = DMatrix::zeros(n, n);
    match rule {
        Rule::GaussLegendre { panels } => {
            // inner[l] at outer node t: ∫_{−h}^{t} e^{i a_l t'} dt'
            for (t, wt) in gauss_legendre_panels(-h, h, panels) {
                let inner: Vec<Complex64> = {
                    let nodes = gauss_legendre_panels(-h, t, panels);
                    freqs
                        .iter()
                        .map(|&b| nodes.iter().map(|&(s, ws)| Complex64::from_polar(ws, b * s)).sum())
                        .collect()
                };
                for k in 0..n {
                    let outer = Complex64::from_polar(wt, freqs[k] * t);
                    for l in 0..n {
                        // t > t': a_k on t; t < t': a_k on the inner variable
                        upper[(k, l)] += outer * inner[l];
                        lower[(l, k)] += outer * inner[l];
                    }
                }
            }
        }
        Rule::Trapezoid { intervals } => {
            let nodes = trapezoid_nodes(-h, h, intervals);
            let mut prefix = vec![Complex64::new(0.0, 0.0); n];
            for &(t, wt) in &nodes {
                let here: Vec<Complex64> = freqs.iter().map(|&b| Complex64::from_polar(wt, b * t)).collect();
                for k in 0..n {
                    for l in 0..n {
                        let diag = here[k] * here[l] * 0.5;
                        upper[(k, l)] += here[k] * prefix[l] + diag;
                        lower[(k, l)] += prefix[k] * here[l] + diag;
                    }
                }
                for l in 0..n {
                    prefix[l] += here[l];
                }
            }
        }
    }
    (upper, lower)
}

fn check_inputs(state: &FockState, chain: &NormalModes, plan: &ProbePlan) -> Result<()> {
    plan.check(chain.n())?;
    if state.space.n_modes() != chain.n() {
        return Err(Error::InvalidInput(format!(
            "state has {} modes but chain has {}",
            state.space.n_modes(),
            chain.n()
        )));
    }
    Ok(())
}

fn first_order(state: &FockState, chain: &NormalModes, plan: &ProbePlan, m: usize, rule: Rule) -> f64 {
    let (coeff, freq) = ladder_weights(chain, m);
    let omegas: Vec<f64> = freq.iter().map(|w| plan.detuning + w).collect();
    let f = line_integrals(rule, plan.window, &omegas);
    let x: Vec<Complex64> = coeff.iter().zip(&f).map(|(c, f)| f * *c).collect();
    let g = plan.coupling();
    let norm: f64 = state
        .members
        .iter()
        .map(|(w, v)| w * state.space.apply_linear(&x, v).norm_squared())
        .sum();
    g * g * norm
}

fn second_order(state: &FockState, chain: &NormalModes, plan: &ProbePlan, rule: Rule) -> f64 {
    let (m, n) = (plan.ions.0 - 1, plan.ions.1 - 1);
    let (cm, freq) = ladder_weights(chain, m);
    let (cn, _) = ladder_weights(chain, n);
    let omegas: Vec<f64> = freq.iter().map(|w| plan.detuning + w).collect();
    let (upper, lower) = triangle_integrals(rule, plan.window, &omegas);
    let space: &FockSpace = &state.space;
    let ladders = space.ladders();
    let k_count = ladders.len();

    // R = Σ_kl c_mk c_nl (U_kl L_k L_l + V_kl L_l L_k), φ_m on t₃ and φ_n on t₄
    let g = plan.coupling();
    let mut total = 0.0;
    for (w, v) in &state.members {
        let singles: Vec<DVector<Complex64>> = ladders.iter().map(|&op| space.apply(op, v)).collect();
        let mut r = DVector::zeros(space.dim());
        for k in 0..k_count {
            for l in 0..k_count {
                let amp = cm[k] * cn[l];
                if amp == 0.0 {
                    continue;
                }
                r += space.apply(ladders[k], &singles[l]) * (upper[(k, l)] * amp);
                r += space.apply(ladders[l], &singles[k]) * (lower[(k, l)] * amp);
            }
        }
        total += w * r.norm_squared();
    }
    g.powi(4) * total
}

/// Single-ion probability of `plan.ions.0` from the double time integral of
/// `e^{−iΔ(t₁−t₂)} ⟨φ_m(t₁) φ_m(t₂)⟩`.
pub fn integrate_pm(state: &FockState, chain: &NormalModes, plan: &ProbePlan, rule: Rule) -> Result<QuadratureEstimate> {
    check_inputs(state, chain, plan)?;
    check_resolution(rule, plan, chain)?;
    let m = plan.ions.0 - 1;
    let value = first_order(state, chain, plan, m, rule);
    let coarse = first_order(state, chain, plan, m, rule.halved());
    Ok(QuadratureEstimate { value, halving_error: (value - coarse).abs(), rule })
}

/// Joint probability from the quadruple time integral of
/// `e^{−iΔ(t₁+t₂−t₃−t₄)} ⟨T̄{φ_m(t₂)φ_n(t₁)} T{φ_m(t₃)φ_n(t₄)}⟩`.
/// Coincident ions return the single-ion probability.
pub fn integrate_pmn(state: &FockState, chain: &NormalModes, plan: &ProbePlan, rule: Rule) -> Result<QuadratureEstimate> {
    check_inputs(state, chain, plan)?;
    if plan.ions.0 == plan.ions.1 {
        return integrate_pm(state, chain, plan, rule);
    }
    check_resolution(rule, plan, chain)?;
    let value = second_order(state, chain, plan, rule);
    let coarse = second_order(state, chain, plan, rule.halved());
    Ok(QuadratureEstimate { value, halving_error: (value - coarse).abs(), rule })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{normal_modes, ChainSpec};
    use crate::correlators::{integrals, pair_probability, single_ion_probability};
    use crate::gaussian::mean_occupation;
    use crate::gaussian::thermal_with_target;

    fn chain(n: usize) -> NormalModes {
        normal_modes(&ChainSpec::dimensionless(n).unwrap()).unwrap()
    }

    #[test]
    fn line_rules_integrate_exponentials() {
        for rule in [Rule::GaussLegendre { panels: 20 }, Rule::Trapezoid { intervals: 20000 }] {
            let z = line_integrals(rule, 20.0, &[0.0, 1.3])[1];
            let exact = 20.0 * integrals::sinc(1.3 * 10.0);
            assert!((z - exact).norm() < 1e-6, "{rule:?}");
        }
    }

    #[test]
    fn triangle_rules_match_closed_form() {
        let freqs = [0.7, -1.1, 2.0];
        let window = 12.0;
        for rule in [Rule::GaussLegendre { panels: 16 }, Rule::Trapezoid { intervals: 20000 }] {
            let (upper, lower) = triangle_integrals(rule, window, &freqs);
            for k in 0..3 {
                for l in 0..3 {
                    let w2 = window * window;
                    let u = integrals::upper_triangle(freqs[k], freqs[l], window) * w2;
                    let v = integrals::lower_triangle(freqs[k], freqs[l], window) * w2;
                    assert!((upper[(k, l)] - u).norm() < 1e-5 * w2, "{rule:?} U {k}{l}");
                    assert!((lower[(k, l)] - v).norm() < 1e-5 * w2, "{rule:?} V {k}{l}");
                }
            }
        }
    }

    #[test]
    fn trapezoid_is_second_order() {
        let freqs = [1.0, -0.4];
        let exact = integrals::upper_triangle(1.0, -0.4, 10.0) * 100.0;
        let err = |n| (triangle_integrals(Rule::Trapezoid { intervals: n }, 10.0, &freqs).0[(0, 1)] - exact).norm();
        let ratio = err(200) / err(400);
        assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
    }

    #[test]
    fn resolution_guard() {
        let c = chain(2);
        let space = FockSpace::for_chain(&c, 4).unwrap();
        let vac = FockState::vacuum(&space).unwrap();
        let plan = ProbePlan::new(1.0, 0.05, 20.0, (1, 2));
        assert!(matches!(
            integrate_pmn(&vac, &c, &plan, Rule::Trapezoid { intervals: 32 }),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn vacuum_red_sideband_near_zero() {
        let c = chain(2);
        let space = FockSpace::for_chain(&c, 4).unwrap();
        let vac = FockState::vacuum(&space).unwrap();
        let plan = ProbePlan::new(1.0, 0.05, 20.0, (1, 2));
        let rule = Rule::gauss_legendre_for(&plan, &c);
        let p = integrate_pm(&vac, &c, &plan, rule).unwrap();
        let cov = vac.covariance().unwrap();
        let reference = single_ion_probability(1, &plan, &cov, &c).unwrap();
        assert!(p.value < 1e-2 * plan.gt * plan.gt);
        assert!((p.value - reference).abs() < 1e-12);
    }

    #[test]
    fn thermal_two_ion_oracle_agreement() {
        let c = chain(2);
        let cov = thermal_with_target(&c, 0, 0.5).unwrap();
        let nbar = mean_occupation(&cov).unwrap();
        let space = FockSpace::for_chain(&c, 30).unwrap();
        let state = FockState::thermal(&space, &nbar).unwrap();
        let plan = ProbePlan::new(c.frequencies[0], 0.05, 20.0, (1, 2));
        let rule = Rule::gauss_legendre_for(&plan, &c);
        let oracle = integrate_pmn(&state, &c, &plan, rule).unwrap();
        let fast = pair_probability(&plan, &cov, &c).unwrap();
        let rel = (oracle.value - fast.p_mn).abs() / fast.p_mn;
        assert!(rel < 1e-4, "{} vs {} ({rel:e})", oracle.value, fast.p_mn);
        assert!(oracle.halving_error < 1e-4 * oracle.value);

        let trap = integrate_pmn(&state, &c, &plan, Rule::Trapezoid { intervals: 40000 }).unwrap();
        assert!((trap.value - oracle.value).abs() < 1e-6 * oracle.value, "{} vs {}", trap.value, oracle.value);
    }

    #[test]
    fn coincident_ions_use_first_order() {
        let c = chain(2);
        let space = FockSpace::for_chain(&c, 20).unwrap();
        let state = FockState::thermal(&space, &[0.3, 0.1]).unwrap();
        let plan = ProbePlan::new(1.0, 0.05, 20.0, (2, 2));
        let rule = Rule::gauss_legendre_for(&plan, &c);
        assert_eq!(
            integrate_pmn(&state, &c, &plan, rule).unwrap().value,
            integrate_pm(&state, &c, &plan.with_ions(2, 1), rule).unwrap().value
        );
    }
}

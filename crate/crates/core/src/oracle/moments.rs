use nalgebra::DVector;
use num_complex::Complex64;

use crate::chain::NormalModes;
use crate::error::{Error, Result};

use super::space::phi_coefficients;
use super::state::FockState;
use super::wick::wick_pairings;

/// `φ_ion(time)`, ion zero-based.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Insertion {
    pub ion: usize,
    pub time: f64,
}

impl Insertion {
    pub fn new(ion: usize, time: f64) -> Self {
        Self { ion, time }
    }
}

fn check(state: &FockState, chain: &NormalModes, ions: &[usize]) -> Result<()> {
    if state.space.n_modes() != chain.n() {
        return Err(Error::InvalidInput(format!(
            "state has {} modes but chain has {}",
            state.space.n_modes(),
            chain.n()
        )));
    }
    if let Some(&bad) = ions.iter().find(|&&m| m >= chain.n()) {
        return Err(Error::InvalidInput(format!("ion {} outside 1..={}", bad + 1, chain.n())));
    }
    Ok(())
}

/// Applies `ops[0] ops[1] … ops[k−1]` to `v`, rightmost first.
fn apply_product(
    state: &FockState,
    chain: &NormalModes,
    ops: &[Insertion],
    v: &DVector<Complex64>,
) -> DVector<Complex64> {
    ops.iter().rev().fold(v.clone(), |acc, op| {
        state.space.apply_linear(&phi_coefficients(chain, op.ion, op.time), &acc)
    })
}

/// `⟨ops[0] ops[1] … ops[k−1]⟩` in the given operator order.
pub fn product_expectation(state: &FockState, chain: &NormalModes, ops: &[Insertion]) -> Result<Complex64> {
    check(state, chain, &ops.iter().map(|o| o.ion).collect::<Vec<_>>())?;
    // φ is Hermitian, so the left half acts on the bra reversed
    let split = ops.len() / 2;
    let left: Vec<Insertion> = ops[..split].iter().rev().copied().collect();
    let right = &ops[split..];
    Ok(state.overlap(|v| apply_product(state, chain, &left, v), |v| apply_product(state, chain, right, v)))
}

/// `⟨φ_m(t) φ_n(t')⟩`.
pub fn two_point(state: &FockState, chain: &NormalModes, m: usize, n: usize, t: f64, tp: f64) -> Result<Complex64> {
    product_expectation(state, chain, &[Insertion::new(m, t), Insertion::new(n, tp)])
}

/// Later time on the left. Equal times keep the given order; fields on
/// different ions commute at equal times.
pub fn time_ordered(a: Insertion, b: Insertion) -> [Insertion; 2] {
    if b.time > a.time {
        [b, a]
    } else {
        [a, b]
    }
}

/// Earlier time on the left.
pub fn anti_time_ordered(a: Insertion, b: Insertion) -> [Insertion; 2] {
    if b.time < a.time {
        [b, a]
    } else {
        [a, b]
    }
}

/// Operator string of `T̄{φ_m(t₂) φ_n(t₁)} T{φ_m(t₃) φ_n(t₄)}`, with
/// `times = [t₁, t₂, t₃, t₄]`.
pub fn ordered_string(m: usize, n: usize, times: [f64; 4]) -> [Insertion; 4] {
    let [t1, t2, t3, t4] = times;
    let left = anti_time_ordered(Insertion::new(m, t2), Insertion::new(n, t1));
    let right = time_ordered(Insertion::new(m, t3), Insertion::new(n, t4));
    [left[0], left[1], right[0], right[1]]
}

/// `⟨T̄{φ_m(t₂) φ_n(t₁)} T{φ_m(t₃) φ_n(t₄)}⟩` by direct operator products.
pub fn four_point_ordered(
    state: &FockState,
    chain: &NormalModes,
    m: usize,
    n: usize,
    times: [f64; 4],
) -> Result<Complex64> {
    product_expectation(state, chain, &ordered_string(m, n, times))
}

/// The Gaussian reduction
/// `⟨φ_m(t₂)φ_m(t₃)⟩⟨φ_n(t₁)φ_n(t₄)⟩ + ⟨φ_m(t₂)φ_n(t₄)⟩⟨φ_n(t₁)φ_m(t₃)⟩
///  + ⟨T̄{φ_m(t₂)φ_n(t₁)}⟩⟨T{φ_m(t₃)φ_n(t₄)}⟩`, from two-point functions of the
/// truncated state.
pub fn three_term_wick(
    state: &FockState,
    chain: &NormalModes,
    m: usize,
    n: usize,
    times: [f64; 4],
) -> Result<Complex64> {
    let [t1, t2, t3, t4] = times;
    let s = ordered_string(m, n, times);
    let direct = two_point(state, chain, m, m, t2, t3)? * two_point(state, chain, n, n, t1, t4)?;
    let crossed = two_point(state, chain, m, n, t2, t4)? * two_point(state, chain, n, m, t1, t3)?;
    let ordered = product_expectation(state, chain, &s[..2])? * product_expectation(state, chain, &s[2..])?;
    Ok(direct + crossed + ordered)
}

/// `⟨0|φ_a φ_b|0⟩ = Σ_p c_ap c_bp e^{−iν_p(t_a − t_b)}`, the c-number left
/// when `φ_a φ_b` is normal ordered.
pub fn vacuum_contraction(chain: &NormalModes, a: Insertion, b: Insertion) -> Complex64 {
    let wa = chain.ion_weights(a.ion);
    let wb = chain.ion_weights(b.ion);
    (0..chain.n())
        .map(|p| Complex64::from_polar(wa[p] * wb[p], -chain.frequencies[p] * (a.time - b.time)))
        .sum()
}

/// Annihilation part `φ⁻ = Σ_p c_p e^{−iν_p t} a_p` as ladder coefficients.
fn annihilation_part(chain: &NormalModes, op: Insertion) -> Vec<Complex64> {
    let mut c = phi_coefficients(chain, op.ion, op.time);
    c.iter_mut().skip(1).step_by(2).for_each(|z| *z = Complex64::new(0.0, 0.0));
    c
}

/// `⟨:ops:⟩`, the normal-ordered expectation, evaluated by splitting every
/// field into its creation and annihilation parts.
pub fn normal_ordered(state: &FockState, chain: &NormalModes, ops: &[Insertion]) -> Result<Complex64> {
    check(state, chain, &ops.iter().map(|o| o.ion).collect::<Vec<_>>())?;
    let parts: Vec<Vec<Complex64>> = ops.iter().map(|&o| annihilation_part(chain, o)).collect();
    let mut total = Complex64::new(0.0, 0.0);
    for mask in 0u32..(1 << ops.len()) {
        // bit set: the creation part of that field, moved to the left
        let (creators, annihilators): (Vec<usize>, Vec<usize>) =
            (0..ops.len()).partition(|&i| mask & (1 << i) != 0);
        let chain_apply = |list: &[usize], v: &DVector<Complex64>| {
            list.iter().fold(v.clone(), |acc, &i| state.space.apply_linear(&parts[i], &acc))
        };
        // ⟨ψ| C… A… |ψ⟩ = ⟨(C…)†ψ | A…ψ⟩ and (φ⁺)† = φ⁻
        total += state.overlap(|v| chain_apply(&creators, v), |v| chain_apply(&annihilators, v));
    }
    Ok(total)
}

/// Four-point function rebuilt from the full Wick expansion: the fully
/// normal-ordered term, six single contractions times a normal-ordered pair,
/// and three double contractions. Holds for any state.
pub fn ten_term_expansion(
    state: &FockState,
    chain: &NormalModes,
    m: usize,
    n: usize,
    times: [f64; 4],
) -> Result<Complex64> {
    let s = ordered_string(m, n, times);
    let c = |i: usize, j: usize| vacuum_contraction(chain, s[i], s[j]);
    let mut total = normal_ordered(state, chain, &s)?;
    for i in 0..4 {
        for j in (i + 1)..4 {
            let rest: Vec<Insertion> = (0..4).filter(|&k| k != i && k != j).map(|k| s[k]).collect();
            total += c(i, j) * normal_ordered(state, chain, &rest)?;
        }
    }
    for pairing in wick_pairings(4)? {
        total += pairing.iter().map(|&(i, j)| c(i, j)).product::<Complex64>();
    }
    Ok(total)
}

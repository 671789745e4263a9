use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::GaussianCovariance;

use super::space::{FockSpace, Ladder};
use super::{MAX_CUTOFF, MAX_DENSE_DIM, TAIL_LIMIT};

/// Members lighter than this fraction of the heaviest are dropped from a
/// thermal mixture before renormalizing.
const PRUNE: f64 = 1e-20;

/// Mixed state stored as a weighted ensemble of normalized pure states,
/// `ρ = Σ_j w_j |ψ_j⟩⟨ψ_j|`.
///
/// Thermal states are mixtures of number states and squeezed vacua are pure,
/// so neither needs a dense density matrix.
#[derive(Clone, Debug)]
pub struct FockState {
    pub space: FockSpace,
    pub members: Vec<(f64, DVector<Complex64>)>,
    /// Largest population found in any mode's top two levels.
    pub tail_mass: f64,
    pub tag: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateKind {
    Thermal,
    Squeezed,
}

/// Truncated, renormalized geometric distribution with mean `nbar` before
/// truncation.
pub fn thermal_populations(nbar: f64, n_max: usize) -> Vec<f64> {
    let x = nbar / (nbar + 1.0);
    let mut p: Vec<f64> = (0..=n_max).map(|k| x.powi(k as i32)).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

/// Squeezed-vacuum amplitudes `(−tanh r)^k √((2k)!) / (2^k k!) / √(cosh r)` on
/// `|2k⟩` with `sinh² r = nbar`, renormalized after truncation.
pub fn squeezed_amplitudes(nbar: f64, n_max: usize) -> Vec<f64> {
    let r = nbar.sqrt().asinh();
    let t = -r.tanh();
    let mut c = vec![0.0; n_max + 1];
    c[0] = 1.0 / r.cosh().sqrt();
    let mut k = 1;
    while 2 * k <= n_max {
        // ratio of consecutive terms: t √((2k)(2k−1)) / (2k)
        let kf = k as f64;
        c[2 * k] = c[2 * k - 2] * t * ((2.0 * kf) * (2.0 * kf - 1.0)).sqrt() / (2.0 * kf);
        k += 1;
    }
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    c.iter_mut().for_each(|v| *v /= norm);
    c
}

fn top_two(pops: &[f64]) -> f64 {
    pops.iter().rev().take(2).sum()
}

fn check_occupations(nbar: &[f64]) -> Result<()> {
    if let Some(bad) = nbar.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidState(format!("mean occupation must be finite and ≥ 0, got {bad}")));
    }
    Ok(())
}

/// Smallest cutoff whose top-two-level population stays below `target` for
/// every listed occupation.
pub fn suggested_cutoff(nbar: &[f64], kind: StateKind, target: f64) -> Result<usize> {
    check_occupations(nbar)?;
    for n_max in 2..=MAX_CUTOFF {
        let tail = nbar
            .iter()
            .map(|&n| match kind {
                StateKind::Thermal => top_two(&thermal_populations(n, n_max)),
                StateKind::Squeezed => {
                    top_two(&squeezed_amplitudes(n, n_max).iter().map(|c| c * c).collect::<Vec<_>>())
                }
            })
            .fold(0.0, f64::max);
        if tail < target {
            return Ok(n_max);
        }
    }
    Err(Error::CutoffTooSmall { tail: f64::NAN, limit: target })
}

impl FockState {
    fn accept(self) -> Result<Self> {
        if self.tail_mass >= TAIL_LIMIT {
            return Err(Error::CutoffTooSmall { tail: self.tail_mass, limit: TAIL_LIMIT });
        }
        Ok(self)
    }

    /// Pure number state `|k_0, k_1, …⟩`. Its tail mass is not checked.
    pub fn number(space: &FockSpace, occupations: &[usize]) -> Result<Self> {
        for (p, &k) in occupations.iter().enumerate() {
            if p < space.n_modes() && k > space.modes[p].n_max {
                return Err(Error::InvalidInput(format!("occupation {k} above cutoff of mode {}", p + 1)));
            }
        }
        let idx = space.index(occupations)?;
        let mut v = DVector::zeros(space.dim());
        v[idx] = Complex64::new(1.0, 0.0);
        let tail = (0..space.n_modes())
            .map(|p| if occupations[p] + 1 >= space.modes[p].n_max { 1.0 } else { 0.0 })
            .fold(0.0, f64::max);
        let tag = format!("number{occupations:?}");
        Ok(Self { space: space.clone(), members: vec![(1.0, v)], tail_mass: tail, tag })
    }

    pub fn vacuum(space: &FockSpace) -> Result<Self> {
        let mut s = Self::number(space, &vec![0; space.n_modes()])?;
        s.tag = "vacuum".into();
        Ok(s)
    }

    /// Product of thermal states with the given mean occupations.
    pub fn thermal(space: &FockSpace, nbar: &[f64]) -> Result<Self> {
        if nbar.len() != space.n_modes() {
            return Err(Error::InvalidInput("one occupation per mode required".into()));
        }
        check_occupations(nbar)?;
        let pops: Vec<Vec<f64>> =
            nbar.iter().zip(&space.modes).map(|(&n, m)| thermal_populations(n, m.n_max)).collect();
        let tail = pops.iter().map(|p| top_two(p)).fold(0.0, f64::max);

        let weights: Vec<f64> = (0..space.dim())
            .map(|idx| (0..space.n_modes()).map(|p| pops[p][space.occupation(idx, p)]).product())
            .collect();
        let heaviest = weights.iter().copied().fold(0.0, f64::max);
        let mut members = Vec::new();
        for (idx, &w) in weights.iter().enumerate() {
            if w > PRUNE * heaviest {
                let mut v = DVector::zeros(space.dim());
                v[idx] = Complex64::new(1.0, 0.0);
                members.push((w, v));
            }
        }
        let total: f64 = members.iter().map(|(w, _)| w).sum();
        members.iter_mut().for_each(|(w, _)| *w /= total);
        Self { space: space.clone(), members, tail_mass: tail, tag: "thermal".into() }.accept()
    }

    /// Product of single-mode squeezed vacua with `⟨a_p a_p⟩ = −√(n̄_p(n̄_p+1))`.
    pub fn squeezed(space: &FockSpace, nbar: &[f64]) -> Result<Self> {
        if nbar.len() != space.n_modes() {
            return Err(Error::InvalidInput("one occupation per mode required".into()));
        }
        check_occupations(nbar)?;
        let amps: Vec<Vec<f64>> =
            nbar.iter().zip(&space.modes).map(|(&n, m)| squeezed_amplitudes(n, m.n_max)).collect();
        let tail = amps
            .iter()
            .map(|a| top_two(&a.iter().map(|c| c * c).collect::<Vec<_>>()))
            .fold(0.0, f64::max);
        let v = DVector::from_fn(space.dim(), |idx, _| {
            let amp: f64 = (0..space.n_modes()).map(|p| amps[p][space.occupation(idx, p)]).product();
            Complex64::new(amp, 0.0)
        });
        let tag = if nbar.iter().all(|&n| n == 0.0) { "vacuum" } else { "squeezed" };
        Self { space: space.clone(), members: vec![(1.0, v)], tail_mass: tail, tag: tag.into() }.accept()
    }

    pub fn trace(&self) -> f64 {
        self.members.iter().map(|(w, v)| w * v.norm_squared()).sum()
    }

    /// `Σ_j w_j ⟨left(ψ_j) | right(ψ_j)⟩`.
    pub fn overlap<L, R>(&self, left: L, right: R) -> Complex64
    where
        L: Fn(&DVector<Complex64>) -> DVector<Complex64>,
        R: Fn(&DVector<Complex64>) -> DVector<Complex64>,
    {
        self.members.iter().map(|(w, v)| left(v).dotc(&right(v)) * *w).sum()
    }

    /// `⟨L1 L2⟩` for two ladder operators.
    pub fn pair(&self, first: Ladder, second: Ladder) -> Complex64 {
        let adjoint = Ladder { mode: first.mode, dagger: !first.dagger };
        self.overlap(|v| self.space.apply(adjoint, v), |v| self.space.apply(second, v))
    }

    /// Second moments `⟨a aᵀ⟩` and `⟨a†_r a_s⟩` read off the truncated state.
    pub fn covariance(&self) -> Result<GaussianCovariance> {
        let n = self.space.n_modes();
        let a = |p| Ladder { mode: p, dagger: false };
        let ad = |p| Ladder { mode: p, dagger: true };
        let aa = DMatrix::from_fn(n, n, |r, s| self.pair(a(r), a(s)));
        let na = DMatrix::from_fn(n, n, |r, s| self.pair(ad(r), a(s)));
        GaussianCovariance::new(aa, na, &self.tag)
    }

    /// Diagonal of `ρ` in the number basis.
    pub fn populations(&self) -> Vec<f64> {
        let mut pops = vec![0.0; self.space.dim()];
        for (w, v) in &self.members {
            for (p, z) in pops.iter_mut().zip(v.iter()) {
                *p += w * z.norm_sqr();
            }
        }
        pops
    }

    /// Dense density matrix; only for small spaces.
    pub fn density_matrix(&self) -> Result<DMatrix<Complex64>> {
        let d = self.space.dim();
        if d > MAX_DENSE_DIM {
            return Err(Error::InvalidInput(format!("dense ρ limited to dimension {MAX_DENSE_DIM}")));
        }
        let mut rho = DMatrix::zeros(d, d);
        for (w, v) in &self.members {
            rho += v * v.adjoint() * Complex64::new(*w, 0.0);
        }
        Ok(rho)
    }
}

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::chain::NormalModes;
use crate::error::{Error, Result};

use super::{MAX_CUTOFF, MAX_DENSE_DIM, MAX_MODES};

/// One oscillator truncated to occupations `0..=n_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedMode {
    pub n_max: usize,
    pub frequency: f64,
}

impl TruncatedMode {
    pub fn new(n_max: usize, frequency: f64) -> Result<Self> {
        if n_max == 0 || n_max > MAX_CUTOFF {
            return Err(Error::InvalidInput(format!("cutoff {n_max} outside 1..={MAX_CUTOFF}")));
        }
        Ok(Self { n_max, frequency })
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// Dense `a` with `⟨k|a|k+1⟩ = √(k+1)`.
    pub fn lowering(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |r, c| {
            if c == r + 1 {
                Complex64::new((c as f64).sqrt(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }
}

/// A ladder operator `a_p` or `a†_p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ladder {
    pub mode: usize,
    pub dagger: bool,
}

/// Tensor product of truncated modes, mode 0 varying slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct FockSpace {
    pub modes: Vec<TruncatedMode>,
    strides: Vec<usize>,
    dim: usize,
}

impl FockSpace {
    pub fn new(modes: Vec<TruncatedMode>) -> Result<Self> {
        if modes.is_empty() || modes.len() > MAX_MODES {
            return Err(Error::InvalidInput(format!(
                "oracle handles 1..={MAX_MODES} modes, got {}",
                modes.len()
            )));
        }
        let mut strides = vec![1; modes.len()];
        for p in (0..modes.len() - 1).rev() {
            strides[p] = strides[p + 1] * modes[p + 1].dim();
        }
        let dim = strides[0] * modes[0].dim();
        Ok(Self { modes, strides, dim })
    }

    /// Same cutoff on every mode of a chain.
    pub fn for_chain(chain: &NormalModes, n_max: usize) -> Result<Self> {
        let modes = chain
            .frequencies
            .iter()
            .map(|&nu| TruncatedMode::new(n_max, nu))
            .collect::<Result<Vec<_>>>()?;
        Self::new(modes)
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Occupation of mode `p` in basis state `index`.
    pub fn occupation(&self, index: usize, p: usize) -> usize {
        (index / self.strides[p]) % self.modes[p].dim()
    }

    pub fn index(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.n_modes() {
            return Err(Error::InvalidInput("occupation list does not match mode count".into()));
        }
        let mut idx = 0;
        for (p, &k) in occupations.iter().enumerate() {
            if k > self.modes[p].n_max {
                return Err(Error::InvalidInput(format!("occupation {k} above cutoff of mode {}", p + 1)));
            }
            idx += k * self.strides[p];
        }
        Ok(idx)
    }

    /// `op |v⟩`, dropping amplitude pushed above the cutoff.
    pub fn apply(&self, op: Ladder, v: &DVector<Complex64>) -> DVector<Complex64> {
        let stride = self.strides[op.mode];
        let n_max = self.modes[op.mode].n_max;
        let mut out = DVector::zeros(self.dim);
        for (idx, &amp) in v.iter().enumerate() {
            if amp == Complex64::new(0.0, 0.0) {
                continue;
            }
            let k = self.occupation(idx, op.mode);
            if op.dagger {
                if k < n_max {
                    out[idx + stride] += amp * ((k + 1) as f64).sqrt();
                }
            } else if k > 0 {
                out[idx - stride] += amp * (k as f64).sqrt();
            }
        }
        out
    }

    /// Applies `Σ_l coeffs[l] L_l` with ladders enumerated by [`Self::ladders`].
    pub fn apply_linear(&self, coeffs: &[Complex64], v: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = DVector::zeros(self.dim);
        for (c, op) in coeffs.iter().zip(self.ladders()) {
            if c.norm() != 0.0 {
                out += self.apply(op, v) * *c;
            }
        }
        out
    }

    /// `a_0, a†_0, a_1, a†_1, …`.
    pub fn ladders(&self) -> Vec<Ladder> {
        (0..self.n_modes())
            .flat_map(|p| [Ladder { mode: p, dagger: false }, Ladder { mode: p, dagger: true }])
            .collect()
    }

    /// Dense matrix of a single ladder operator on the full space.
    pub fn dense(&self, op: Ladder) -> Result<DMatrix<Complex64>> {
        if self.dim > MAX_DENSE_DIM {
            return Err(Error::InvalidInput(format!(
                "dense operators limited to dimension {MAX_DENSE_DIM}, space has {}",
                self.dim
            )));
        }
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for col in 0..self.dim {
            let mut e = DVector::zeros(self.dim);
            e[col] = Complex64::new(1.0, 0.0);
            m.set_column(col, &self.apply(op, &e));
        }
        Ok(m)
    }
}

/// Ladder coefficients of `φ_m(t) = Σ_p b_m^(p) μ_p^{-1/4} (e^{-iν_p t} a_p + e^{iν_p t} a†_p)`,
/// in the order of [`FockSpace::ladders`]. Ion `m` is zero-based.
pub fn phi_coefficients(chain: &NormalModes, m: usize, t: f64) -> Vec<Complex64> {
    let w = chain.ion_weights(m);
    (0..chain.n())
        .flat_map(|p| {
            let phase = Complex64::from_polar(1.0, -chain.frequencies[p] * t);
            [phase * w[p], phase.conj() * w[p]]
        })
        .collect()
}

/// Time-independent ladder weights `c_mp` and the frequency attached to each
/// ladder: `−ν_p` for `a_p` and `+ν_p` for `a†_p`.
pub fn ladder_weights(chain: &NormalModes, m: usize) -> (Vec<f64>, Vec<f64>) {
    let w = chain.ion_weights(m);
    let mut coeff = Vec::with_capacity(2 * chain.n());
    let mut freq = Vec::with_capacity(2 * chain.n());
    for p in 0..chain.n() {
        coeff.extend([w[p], w[p]]);
        freq.extend([-chain.frequencies[p], chain.frequencies[p]]);
    }
    (coeff, freq)
}

/// Dense `φ_m(t)`; only for small spaces.
pub fn phi_operator(space: &FockSpace, chain: &NormalModes, m: usize, t: f64) -> Result<DMatrix<Complex64>> {
    if space.n_modes() != chain.n() {
        return Err(Error::InvalidInput(format!(
            "space has {} modes but chain has {}",
            space.n_modes(),
            chain.n()
        )));
    }
    let coeffs = phi_coefficients(chain, m, t);
    let mut out = DMatrix::zeros(space.dim(), space.dim());
    for (c, op) in coeffs.iter().zip(space.ladders()) {
        out += space.dense(op)? * *c;
    }
    Ok(out)
}

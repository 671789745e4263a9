use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{normalized_correlation, report_from_kernel, ProbeKernel, ProbePlan};
use crate::chain::NormalModes;
use crate::error::{Error, Result};
use crate::gaussian::GaussianCovariance;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub delta: f64,
    pub p_m: f64,
    pub p_n: f64,
    pub p_mn: f64,
    pub f_mn: Option<f64>,
}

impl ScanRow {
    pub const CSV_HEADER: &'static str = "delta,Pm,Pn,Pmn,fmn";

    pub fn csv_row(&self) -> String {
        let f = self.f_mn.map(|f| format!("{f:.12e}")).unwrap_or_else(|| "nan".into());
        format!("{},{:.12e},{:.12e},{:.12e},{}", self.delta, self.p_m, self.p_n, self.p_mn, f)
    }
}

/// Evaluates the plan at every detuning in `grid`. Rows come back in grid
/// order regardless of how the work is split across threads.
pub fn detuning_scan(
    plan: &ProbePlan,
    grid: &[f64],
    cov: &GaussianCovariance,
    modes: &NormalModes,
) -> Result<Vec<ScanRow>> {
    plan.check(modes.n())?;
    grid.par_iter()
        .map(|&delta| {
            let local = plan.with_detuning(delta);
            let kernel = ProbeKernel::new(delta, plan.window, cov, modes)?;
            // scans are allowed to wander past the warning threshold
            let report = report_from_kernel(&kernel, &local, &cov.tag, &mut Vec::new())?;
            Ok(ScanRow {
                delta,
                p_m: report.p_m,
                p_n: report.p_n,
                p_mn: report.p_mn,
                f_mn: report.f_mn,
            })
        })
        .collect()
}

/// All-pairs correlation map at the resonance of one mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrMap {
    /// 1-based mode index.
    pub mode: usize,
    pub detuning: f64,
    /// `P_mn` off the diagonal, `P_m` on it.
    pub probabilities: DMatrix<f64>,
    /// `f_mn` off the diagonal; the diagonal is left at zero.
    pub normalized: DMatrix<f64>,
    /// Largest and smallest off-diagonal entry, for colour scaling.
    pub max: Option<f64>,
    pub min: Option<f64>,
}

impl CorrMap {
    /// Off-diagonal entries rescaled to `[0, 1]`; the diagonal is zero.
    pub fn scaled(&self) -> DMatrix<f64> {
        let n = self.probabilities.nrows();
        match (self.max, self.min) {
            (Some(hi), Some(lo)) if hi > lo => DMatrix::from_fn(n, n, |m, k| {
                if m == k {
                    0.0
                } else {
                    (self.probabilities[(m, k)] - lo) / (hi - lo)
                }
            }),
            _ => DMatrix::from_fn(n, n, |m, k| if m == k { 0.0 } else { 1.0 }),
        }
    }

    /// Off-diagonal pair with the largest `P_mn`, 1-based with `m < n`.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let n = self.probabilities.nrows();
        let mut best: Option<((usize, usize), f64)> = None;
        for m in 0..n {
            for k in (m + 1)..n {
                let v = self.probabilities[(m, k)];
                if best.map_or(true, |(_, b)| v > b) {
                    best = Some(((m + 1, k + 1), v));
                }
            }
        }
        best.map(|(pair, _)| pair)
    }
}

/// Correlation map with the probe tuned to the red sideband of 1-based mode
/// `p`. The plan's own detuning and ion selection are ignored.
pub fn corr_map(
    p: usize,
    plan: &ProbePlan,
    cov: &GaussianCovariance,
    modes: &NormalModes,
) -> Result<CorrMap> {
    let n = modes.n();
    if p == 0 || p > n {
        return Err(Error::InvalidInput(format!("mode {p} outside 1..={n}")));
    }
    let detuning = modes.frequencies[p - 1];
    let base = plan.with_detuning(detuning).with_ions(1, 1);
    base.check(n)?;
    let kernel = ProbeKernel::new(detuning, plan.window, cov, modes)?;

    let pairs: Vec<(usize, usize)> = (1..=n).flat_map(|m| (m..=n).map(move |k| (m, k))).collect();
    let reports = pairs
        .par_iter()
        .map(|&(m, k)| report_from_kernel(&kernel, &base.with_ions(m, k), &cov.tag, &mut Vec::new()))
        .collect::<Result<Vec<_>>>()?;

    let mut probabilities = DMatrix::zeros(n, n);
    let mut normalized = DMatrix::zeros(n, n);
    for r in &reports {
        let (m, k) = (r.plan.ions.0 - 1, r.plan.ions.1 - 1);
        probabilities[(m, k)] = r.p_mn;
        probabilities[(k, m)] = r.p_mn;
        if m != k {
            let f = normalized_correlation(r.p_mn, r.p_m, r.p_n).unwrap_or(f64::NAN);
            normalized[(m, k)] = f;
            normalized[(k, m)] = f;
        }
    }
    let off: Vec<f64> = reports.iter().filter(|r| r.plan.ions.0 != r.plan.ions.1).map(|r| r.p_mn).collect();
    let max = off.iter().copied().reduce(f64::max);
    let min = off.iter().copied().reduce(f64::min);
    Ok(CorrMap { mode: p, detuning, probabilities, normalized, max, min })
}

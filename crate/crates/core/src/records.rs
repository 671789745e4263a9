//! Binary measurement records of a two-ion experiment.
//!
//! Each shot reads out whether ion `m` and ion `n` fluoresced. Only the first
//! and second moments of the record are fixed by `P_m`, `P_n` and `P_mn`, which
//! for two ions is exactly enough to pin down the joint law.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shots drawn per independent random stream.
pub const CHUNK: u64 = 1 << 16;
const FEASIBILITY_TOL: f64 = 1e-12;
/// `f̂` is flagged when `Ê[e_m] Ê[e_n]` falls below this many counts over `K`.
pub const UNSTABLE_COUNTS: f64 = 10.0;

/// Probabilities of `(e_m, e_n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl OutcomeDistribution {
    pub fn p_m(&self) -> f64 {
        self.p10 + self.p11
    }

    pub fn p_n(&self) -> f64 {
        self.p01 + self.p11
    }

    /// Outcome for a uniform draw in `[0, 1)`, as `(e_m, e_n)`.
    fn outcome(&self, u: f64) -> (bool, bool) {
        if u < self.p11 {
            (true, true)
        } else if u < self.p11 + self.p10 {
            (true, false)
        } else if u < self.p11 + self.p10 + self.p01 {
            (false, true)
        } else {
            (false, false)
        }
    }
}

/// Joint law from the moments by inclusion-exclusion.
pub fn joint_distribution(p_m: f64, p_n: f64, p_mn: f64) -> Result<OutcomeDistribution> {
    for (name, p) in [("P_m", p_m), ("P_n", p_n), ("P_mn", p_mn)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("{name} = {p} outside [0, 1]")));
        }
    }
    let d = OutcomeDistribution {
        p00: 1.0 - p_m - p_n + p_mn,
        p01: p_n - p_mn,
        p10: p_m - p_mn,
        p11: p_mn,
    };
    for (name, p) in [("p00", d.p00), ("p01", d.p01), ("p10", d.p10)] {
        if p < -FEASIBILITY_TOL {
            return Err(Error::InfeasibleMoments(format!(
                "{name} = {p:.3e} from P_m = {p_m}, P_n = {p_n}, P_mn = {p_mn}"
            )));
        }
    }
    Ok(OutcomeDistribution {
        p00: d.p00.max(0.0),
        p01: d.p01.max(0.0),
        p10: d.p10.max(0.0),
        p11: d.p11,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordBatch {
    pub shots: u64,
    pub seed: u64,
    /// Counts of `00, 01, 10, 11` as `(e_m, e_n)`.
    pub counts: [u64; 4],
    pub count_m: u64,
    pub count_n: u64,
}

fn check_shots(shots: u64) -> Result<()> {
    if shots == 0 {
        return Err(Error::InvalidInput("need at least one shot".into()));
    }
    Ok(())
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn chunk_len(shots: u64, chunk: u64) -> u64 {
    (shots - chunk * CHUNK).min(CHUNK)
}

/// Draws `shots` records and tallies them. Shots are split into fixed chunks
/// with one stream each, so the batch depends only on `(seed, shots)`.
pub fn sample(dist: &OutcomeDistribution, shots: u64, seed: u64) -> Result<RecordBatch> {
    check_shots(shots)?;
    let chunks = shots.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let mut local = [0u64; 4];
            for _ in 0..chunk_len(shots, c) {
                let (em, en) = dist.outcome(rng.random::<f64>());
                local[(usize::from(em) << 1) | usize::from(en)] += 1;
            }
            local
        })
        .reduce(|| [0; 4], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]);
    Ok(RecordBatch {
        shots,
        seed,
        counts,
        count_m: counts[2] + counts[3],
        count_n: counts[1] + counts[3],
    })
}

/// The individual shots behind [`sample`] with the same seed, in order.
pub fn sample_shots(dist: &OutcomeDistribution, shots: u64, seed: u64) -> Result<Vec<(bool, bool)>> {
    check_shots(shots)?;
    let chunks = shots.div_ceil(CHUNK);
    let parts: Vec<Vec<(bool, bool)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            (0..chunk_len(shots, c)).map(|_| dist.outcome(rng.random::<f64>())).collect()
        })
        .collect();
    Ok(parts.concat())
}

/// Plug-in estimates with binomial standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub shots: u64,
    pub e_m: f64,
    pub e_n: f64,
    pub e_mn: f64,
    pub se_m: f64,
    pub se_n: f64,
    pub se_mn: f64,
    /// `Ê[e_m e_n] / (Ê[e_m] Ê[e_n])`, absent when either mean is zero.
    pub f: Option<f64>,
    /// Delta-method standard error of `f`.
    pub se_f: Option<f64>,
    /// Set when `Ê[e_m] Ê[e_n] < 10/K`, i.e. too few counts to trust `f`.
    pub unstable: bool,
}

pub fn estimate(batch: &RecordBatch) -> Result<Estimate> {
    check_shots(batch.shots)?;
    let k = batch.shots as f64;
    let e_m = batch.count_m as f64 / k;
    let e_n = batch.count_n as f64 / k;
    let e_mn = batch.counts[3] as f64 / k;
    let se = |p: f64| (p * (1.0 - p) / k).sqrt();
    let denom = e_m * e_n;
    let f = (denom > 0.0).then(|| e_mn / denom);
    let se_f = f.map(|f| {
        // gradient of p11/(pm pn) and the multinomial covariances of the three means
        let (g11, gm, gn) = (1.0 / denom, -f / e_m, -f / e_n);
        let var11 = e_mn * (1.0 - e_mn) / k;
        let var_m = e_m * (1.0 - e_m) / k;
        let var_n = e_n * (1.0 - e_n) / k;
        let cov_11m = (e_mn - e_mn * e_m) / k;
        let cov_11n = (e_mn - e_mn * e_n) / k;
        let cov_mn = (e_mn - e_m * e_n) / k;
        let var = g11 * g11 * var11 + gm * gm * var_m + gn * gn * var_n
            + 2.0 * (g11 * gm * cov_11m + g11 * gn * cov_11n + gm * gn * cov_mn);
        var.max(0.0).sqrt()
    });
    Ok(Estimate {
        shots: batch.shots,
        e_m,
        e_n,
        e_mn,
        se_m: se(e_m),
        se_n: se(e_n),
        se_mn: se(e_mn),
        f,
        se_f,
        unstable: denom < UNSTABLE_COUNTS / k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn inclusion_exclusion() {
        let d = joint_distribution(0.0, 0.0, 0.0).unwrap();
        assert_eq!(d.p00, 1.0);
        let d = joint_distribution(0.01, 0.01, 2e-4).unwrap();
        assert_abs_diff_eq!(d.p11, 2e-4);
        assert_abs_diff_eq!(d.p10, 9.8e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(d.p01, 9.8e-3, epsilon = 1e-15);
        assert_abs_diff_eq!(d.p00 + d.p01 + d.p10 + d.p11, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.p_m(), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn infeasible_moments() {
        assert!(matches!(joint_distribution(0.01, 0.2, 0.02), Err(Error::InfeasibleMoments(_))));
        assert!(matches!(joint_distribution(0.9, 0.9, 0.7), Err(Error::InfeasibleMoments(_))));
        assert!(joint_distribution(1.2, 0.1, 0.0).is_err());
    }

    #[test]
    fn point_mass_and_empty_estimate() {
        let d = joint_distribution(0.0, 0.0, 0.0).unwrap();
        let b = sample(&d, 1000, 3).unwrap();
        assert_eq!(b.counts, [1000, 0, 0, 0]);
        let e = estimate(&b).unwrap();
        assert_eq!((e.e_m, e.e_n, e.e_mn), (0.0, 0.0, 0.0));
        assert_eq!(e.f, None);
        assert!(e.unstable);
        assert!(sample(&d, 0, 3).is_err());
    }

    #[test]
    fn rare_outcome_count() {
        let d = joint_distribution(0.01, 0.01, 2e-4).unwrap();
        let k = 1_000_000u64;
        let b = sample(&d, k, 42).unwrap();
        assert_eq!(b.counts.iter().sum::<u64>(), k);
        let sigma = (k as f64 * 2e-4 * (1.0 - 2e-4)).sqrt();
        assert!((b.counts[3] as f64 - 200.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let d = joint_distribution(0.05, 0.03, 0.004).unwrap();
        let k = 3 * CHUNK + 17;
        let a = sample(&d, k, 9).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = one.install(|| sample(&d, k, 9).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, sample(&d, k, 10).unwrap());

        let shots = sample_shots(&d, k, 9).unwrap();
        let mut counts = [0u64; 4];
        for (em, en) in shots {
            counts[(usize::from(em) << 1) | usize::from(en)] += 1;
        }
        assert_eq!(counts, a.counts);
    }

    #[test]
    fn correlation_round_trip() {
        let (p, f) = (0.01, 2.0);
        let d = joint_distribution(p, p, f * p * p).unwrap();
        let e = estimate(&sample(&d, 1_000_000, 1).unwrap()).unwrap();
        assert!(!e.unstable);
        assert!((e.f.unwrap() - f).abs() < 3.0 * e.se_f.unwrap());
    }

    #[test]
    fn delta_method_matches_seed_spread() {
        let d = joint_distribution(0.05, 0.05, 0.005).unwrap();
        let fs: Vec<f64> = (0..200).map(|s| estimate(&sample(&d, 20_000, s).unwrap()).unwrap().f.unwrap()).collect();
        let mean = fs.iter().sum::<f64>() / fs.len() as f64;
        let spread = (fs.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (fs.len() - 1) as f64).sqrt();
        let predicted = estimate(&sample(&d, 20_000, 0).unwrap()).unwrap().se_f.unwrap();
        assert!((spread / predicted - 1.0).abs() < 0.2, "{spread} vs {predicted}");
    }

    #[test]
    fn error_shrinks_with_shots() {
        let d = joint_distribution(0.05, 0.05, 0.005).unwrap();
        let rms = |k: u64| {
            let sq: f64 = (0..20).map(|s| (estimate(&sample(&d, k, s).unwrap()).unwrap().f.unwrap() - 2.0).powi(2)).sum();
            (sq / 20.0).sqrt()
        };
        let (a, b, c) = (rms(10_000), rms(100_000), rms(1_000_000));
        assert!(a > b && b > c, "{a} {b} {c}");
    }

    #[test]
    fn moments_recovered_for_most_seeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let trials = 200;
        let mut ok = [0usize; 3];
        for seed in 0..trials {
            let pm: f64 = rng.random_range(0.01..0.3);
            let pn: f64 = rng.random_range(0.01..0.3);
            let pmn = rng.random_range(0.0..pm.min(pn));
            let d = joint_distribution(pm, pn, pmn).unwrap();
            let e = estimate(&sample(&d, 20_000, seed).unwrap()).unwrap();
            ok[0] += usize::from((e.e_m - pm).abs() < 3.0 * e.se_m);
            ok[1] += usize::from((e.e_n - pn).abs() < 3.0 * e.se_n);
            ok[2] += usize::from((e.e_mn - pmn).abs() < 3.0 * e.se_mn.max(1.0 / 20_000.0));
        }
        for hits in ok {
            assert!(hits as f64 >= 0.99 * trials as f64, "{ok:?}/{trials}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn joint_law_is_valid(pm in 0.0..1.0f64, pn in 0.0..1.0f64, t in 0.0..1.0f64) {
            let lo = (pm + pn - 1.0).max(0.0);
            let pmn = lo + t * (pm.min(pn) - lo);
            let d = joint_distribution(pm, pn, pmn).unwrap();
            let all = [d.p00, d.p01, d.p10, d.p11];
            prop_assert!(all.iter().all(|p| (0.0..=1.0).contains(p)));
            prop_assert!((all.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!((d.p_m() - pm).abs() < 1e-12 && (d.p_n() - pn).abs() < 1e-12);
        }

        #[test]
        fn counts_sum_to_shots(k in 1u64..5000, seed in any::<u64>()) {
            let d = joint_distribution(0.2, 0.3, 0.1).unwrap();
            let b = sample(&d, k, seed).unwrap();
            prop_assert_eq!(b.counts.iter().sum::<u64>(), k);
        }
    }
}

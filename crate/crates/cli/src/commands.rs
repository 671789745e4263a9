use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ioncorr::correlators::{corr_map, detuning_scan, pair_probability, CorrMap, ScanRow};
use ioncorr::gaussian::StateDescription;
use ioncorr::oracle::run_verification;
use ioncorr::records::{estimate, joint_distribution, sample as sample_records, sample_shots, Estimate, OutcomeDistribution, RecordBatch};
use ioncorr::{CorrelationReport, NormalModes};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

/// Output of `modes`. Matrices are row-major nested arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesReport {
    pub n_ions: usize,
    pub trap_frequency_hz: Option<f64>,
    /// Equilibrium positions in units of the length scale `(e²/4πε₀Mν²)^{1/3}`.
    pub positions: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// `√μ_p` in units of ν.
    pub frequencies: Vec<f64>,
    pub frequencies_hz: Option<Vec<f64>>,
    /// `mode_vectors[p][m] = b_m^(p)`.
    pub mode_vectors: Vec<Vec<f64>>,
    /// The configured vibrational state.
    pub state: StateDescription,
}

#[derive(Clone, Debug, Serialize)]
struct CorrMapOutput {
    mode: usize,
    detuning: f64,
    probabilities: Vec<Vec<f64>>,
    /// `f_mn`; null on the diagonal and where undefined.
    normalized: Vec<Vec<Option<f64>>>,
    /// Off-diagonal extremes of `probabilities`, the per-grid normalization.
    max: Option<f64>,
    min: Option<f64>,
    /// 1-based ion pair with the largest off-diagonal probability.
    argmax: Option<(usize, usize)>,
}

#[derive(Clone, Debug, Serialize)]
struct SampleSummary {
    report: CorrelationReport,
    distribution: OutcomeDistribution,
    batch: RecordBatch,
    estimate: Estimate,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn write_lines(path: &Path, header: &str, lines: impl IntoIterator<Item = String>) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Config(format!("cannot write {}: {e}", path.display()));
    let mut out = create(path)?;
    writeln!(out, "{header}").map_err(io)?;
    for line in lines {
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Config(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "undefined".into())
}

pub fn modes_report(cfg: &RunConfig, modes: &NormalModes) -> Result<ModesReport, CliError> {
    let hz = cfg.chain.trap_frequency_hz;
    Ok(ModesReport {
        n_ions: modes.n(),
        trap_frequency_hz: hz,
        positions: modes.positions.iter().copied().collect(),
        eigenvalues: modes.eigenvalues.iter().copied().collect(),
        frequencies: modes.frequencies.iter().copied().collect(),
        frequencies_hz: hz.map(|h| modes.frequencies.iter().map(|f| f * h).collect()),
        mode_vectors: rows(&modes.mode_matrix),
        state: cfg.state(modes)?.into(),
    })
}

pub fn modes(cfg: &RunConfig) -> Result<(), CliError> {
    let modes = cfg.modes()?;
    let report = modes_report(cfg, &modes)?;
    if let Some(path) = &cfg.output.csv {
        let n = report.n_ions;
        let header = std::iter::once("mode,mu,nu".to_string())
            .chain((1..=n).map(|m| format!("b{m}")))
            .collect::<Vec<_>>()
            .join(",");
        let lines = (0..n).map(|p| {
            let mut cols = vec![(p + 1).to_string(), format!("{:.15e}", report.eigenvalues[p]), format!("{:.15e}", report.frequencies[p])];
            cols.extend(report.mode_vectors[p].iter().map(|b| format!("{b:.15e}")));
            cols.join(",")
        });
        write_lines(path, &header, lines)?;
    }
    if cfg.output.json {
        return print_json(&report);
    }
    println!("ions {}", report.n_ions);
    println!("positions {:?}", report.positions);
    for p in 0..report.n_ions {
        let b: Vec<String> = report.mode_vectors[p].iter().map(|b| format!("{b:+.6}")).collect();
        println!("mode {:>2}  mu {:>12.6}  nu {:>10.6}  b [{}]", p + 1, report.eigenvalues[p], report.frequencies[p], b.join(", "));
    }
    Ok(())
}

pub fn probe_report(cfg: &RunConfig) -> Result<CorrelationReport, CliError> {
    let modes = cfg.modes()?;
    let cov = cfg.state(&modes)?;
    Ok(pair_probability(&cfg.plan(&modes), &cov, &modes)?)
}

pub fn probe(cfg: &RunConfig) -> Result<(), CliError> {
    let report = probe_report(cfg)?;
    warn_all(&report.warnings);
    if let Some(path) = &cfg.output.csv {
        write_lines(path, CorrelationReport::CSV_HEADER, [report.csv_row()])?;
    }
    if cfg.output.json {
        return print_json(&report);
    }
    let (m, n) = report.plan.ions;
    println!("ions ({m}, {n})  delta {}  gT {}  Tnu {}  state {}", report.plan.detuning, report.plan.gt, report.plan.window, report.state_tag);
    println!("P_m   {:.6e}", report.p_m);
    println!("P_n   {:.6e}", report.p_n);
    println!("P_mn  {:.6e}  (terms {:.6e} {:.6e} {:.6e})", report.p_mn, report.term1, report.term2, report.term3);
    println!("f_mn  {}", fmt_opt(report.f_mn));
    Ok(())
}

fn corrmap_output(map: &CorrMap) -> CorrMapOutput {
    let n = map.normalized.nrows();
    let normalized = (0..n)
        .map(|r| (0..n).map(|c| Some(map.normalized[(r, c)]).filter(|v| r != c && v.is_finite())).collect())
        .collect();
    CorrMapOutput {
        mode: map.mode,
        detuning: map.detuning,
        probabilities: rows(&map.probabilities),
        normalized,
        max: map.max,
        min: map.min,
        argmax: map.argmax(),
    }
}

/// `out.csv` becomes `out_mode3.csv` for mode 3.
fn mode_path(base: &Path, p: usize) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "corrmap".into());
    let ext = base.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    base.with_file_name(format!("{stem}_mode{p}.{ext}"))
}

pub fn corrmap(cfg: &RunConfig) -> Result<(), CliError> {
    let modes = cfg.modes()?;
    let cov = cfg.state(&modes)?;
    let plan = cfg.plan(&modes);
    let n = modes.n();
    if n < 2 {
        return Err(CliError::Config("corrmap needs at least two ions".into()));
    }
    let selected = cfg.corrmap.modes.clone().unwrap_or_else(|| (1..=n).collect());
    let maps = selected
        .iter()
        .map(|&p| corr_map(p, &plan, &cov, &modes))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(base) = &cfg.output.csv {
        let header = std::iter::once("ion".to_string()).chain((1..=n).map(|c| c.to_string())).collect::<Vec<_>>().join(",");
        for map in &maps {
            let lines = (0..n).map(|r| {
                let mut cols = vec![(r + 1).to_string()];
                cols.extend((0..n).map(|c| format!("{:.12e}", map.probabilities[(r, c)])));
                cols.join(",")
            });
            write_lines(&mode_path(base, map.mode), &header, lines)?;
        }
    }
    let out: Vec<CorrMapOutput> = maps.iter().map(corrmap_output).collect();
    if cfg.output.json {
        return print_json(&out);
    }
    for map in &out {
        let best = map.argmax.map(|(a, b)| format!("({a}, {b})")).unwrap_or_else(|| "none".into());
        println!("mode {:>2}  delta {:.6}  max {}  min {}  best pair {best}", map.mode, map.detuning, fmt_opt(map.max), fmt_opt(map.min));
    }
    Ok(())
}

pub fn scan_rows(cfg: &RunConfig) -> Result<Vec<ScanRow>, CliError> {
    let modes = cfg.modes()?;
    let cov = cfg.state(&modes)?;
    let s = &cfg.scan;
    let step = (s.stop - s.start) / (s.points - 1) as f64;
    let grid: Vec<f64> = (0..s.points).map(|i| s.start + step * i as f64).collect();
    Ok(detuning_scan(&cfg.plan(&modes), &grid, &cov, &modes)?)
}

pub fn scan(cfg: &RunConfig) -> Result<(), CliError> {
    let rows = scan_rows(cfg)?;
    if let Some(path) = &cfg.output.csv {
        write_lines(path, ScanRow::CSV_HEADER, rows.iter().map(ScanRow::csv_row))?;
    }
    if cfg.output.json {
        return print_json(&rows);
    }
    if cfg.output.csv.is_none() {
        println!("{}", ScanRow::CSV_HEADER);
        for row in &rows {
            println!("{}", row.csv_row());
        }
    }
    Ok(())
}

pub fn sample(cfg: &RunConfig) -> Result<(), CliError> {
    let report = probe_report(cfg)?;
    warn_all(&report.warnings);
    let distribution = joint_distribution(report.p_m, report.p_n, report.p_mn)?;
    let (shots, seed) = (cfg.sample.shots, cfg.sample.seed);
    let batch = sample_records(&distribution, shots, seed)?;
    let estimate = estimate(&batch)?;
    if let Some(path) = &cfg.output.csv {
        let records = sample_shots(&distribution, shots, seed)?;
        let lines = records.iter().enumerate().map(|(i, &(a, b))| format!("{i},{},{}", a as u8, b as u8));
        write_lines(path, "shot,e_m,e_n", lines)?;
    }
    if estimate.unstable {
        eprintln!("warning: too few joint counts for a stable f estimate");
    }
    let summary = SampleSummary { report, distribution, batch, estimate };
    if cfg.output.json {
        return print_json(&summary);
    }
    let e = &summary.estimate;
    println!("shots {}  seed {}  counts 00/01/10/11 {:?}", shots, seed, summary.batch.counts);
    println!("E_m   {:.6e} ± {:.2e}  (P_m {:.6e})", e.e_m, e.se_m, summary.report.p_m);
    println!("E_n   {:.6e} ± {:.2e}  (P_n {:.6e})", e.e_n, e.se_n, summary.report.p_n);
    println!("E_mn  {:.6e} ± {:.2e}  (P_mn {:.6e})", e.e_mn, e.se_mn, summary.report.p_mn);
    let se = e.se_f.map(|s| format!(" ± {s:.2e}")).unwrap_or_default();
    println!("f     {}{se}  (f_mn {})", fmt_opt(e.f), fmt_opt(summary.report.f_mn));
    Ok(())
}

pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let report = run_verification(&cfg.verify)?;
    if cfg.output.json {
        print_json(&report)?;
    } else {
        println!("cutoffs thermal {} squeezed {}", report.cutoffs[0], report.cutoffs[1]);
        for c in &report.checks {
            let op = if c.exceeds { ">" } else { "<" };
            let tag = if c.passed { "PASS" } else { "FAIL" };
            println!("{tag} {:<32} {:.3e} {op} {:.0e}", c.name, c.value, c.tolerance);
        }
    }
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(CliError::Verification(failed.join(", ")))
    }
}

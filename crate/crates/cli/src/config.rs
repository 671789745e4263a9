use std::path::{Path, PathBuf};

use ioncorr::chain::{normal_modes, ChainSpec, NormalModes};
use ioncorr::gaussian::{squeezed_uniform, thermal, thermal_with_target, vacuum, GaussianCovariance};
use ioncorr::oracle::VerifyConfig;
use ioncorr::ProbePlan;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub chain: ChainConfig,
    pub state: StateConfig,
    pub probe: ProbeConfig,
    pub scan: ScanConfig,
    pub corrmap: CorrmapConfig,
    pub sample: SampleConfig,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    pub n_ions: usize,
    /// Axial trap frequency in Hz. Only annotates outputs.
    pub trap_frequency_hz: Option<f64>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { n_ions: 2, trap_frequency_hz: None }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Vacuum,
    #[default]
    Thermal,
    Squeezed,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StateConfig {
    pub kind: StateKind,
    /// Thermal: occupation of the probed mode. Squeezed: occupation of every mode.
    pub nbar: Option<f64>,
    /// Thermal only: inverse temperature in units of `1/ħν`.
    pub beta: Option<f64>,
}

pub const DEFAULT_NBAR: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// 1-based mode; sets `Δ = ν_mode` unless `delta` is given.
    pub mode: Option<usize>,
    pub delta: Option<f64>,
    pub gt: f64,
    pub tnu: f64,
    /// 1-based addressed ions; `[1, 2]` by default (`[1, 1]` for a single ion).
    pub ions: Option<[usize; 2]>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { mode: None, delta: None, gt: 0.05, tnu: 400.0, ions: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { start: 0.5, stop: 2.0, points: 301 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrmapConfig {
    /// 1-based modes; all modes when absent.
    pub modes: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    pub shots: u64,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { shots: 1_000_000, seed: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub json: bool,
    pub csv: Option<PathBuf>,
}

/// Splits `--section.key value` pairs out of the argument list.
pub fn extract_dotted(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), CliError> {
    let mut rest = Vec::new();
    let mut dotted = Vec::new();
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let Some(name) = arg.strip_prefix("--").filter(|n| n.contains('.')) else {
            rest.push(arg);
            continue;
        };
        let (key, value) = match name.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = iter.next().ok_or_else(|| CliError::Config(format!("--{name} needs a value")))?;
                (name.to_string(), v)
            }
        };
        dotted.push((key, value));
    }
    Ok((rest, dotted))
}

/// Reads a bare value as TOML, falling back to a string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

pub fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("malformed key '{key}'")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("'{part}' in '{key}' is not a section")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn set_dotted_raw(table: &mut Table, key: &str, raw: &str) -> Result<(), CliError> {
    set_dotted(table, key, parse_value(raw))
}

pub fn read_table(path: Option<&Path>) -> Result<Table, CliError> {
    let Some(path) = path else {
        return Ok(Table::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    text.parse::<Table>().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn finish(table: Table) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let n = self.chain.n_ions;
        if n == 0 {
            return bad("chain.n_ions must be at least 1".into());
        }
        if let Some(hz) = self.chain.trap_frequency_hz {
            if !(hz > 0.0) || !hz.is_finite() {
                return bad(format!("chain.trap_frequency_hz must be positive, got {hz}"));
            }
        }
        if let Some(p) = self.probe.mode {
            if p == 0 || p > n {
                return bad(format!("probe.mode {p} outside 1..={n}"));
            }
        }
        match self.state.kind {
            StateKind::Vacuum => {
                if self.state.nbar.is_some() || self.state.beta.is_some() {
                    return bad("vacuum state takes neither nbar nor beta".into());
                }
            }
            StateKind::Thermal => {
                if self.state.nbar.is_some() && self.state.beta.is_some() {
                    return bad("thermal state takes nbar or beta, not both".into());
                }
                if let Some(b) = self.state.beta {
                    if !(b > 0.0) || !b.is_finite() {
                        return bad(format!("state.beta must be positive, got {b}"));
                    }
                }
            }
            StateKind::Squeezed => {
                if self.state.beta.is_some() {
                    return bad("squeezed state takes nbar, not beta".into());
                }
            }
        }
        if let Some(nb) = self.state.nbar {
            if !(nb >= 0.0) || !nb.is_finite() {
                return bad(format!("state.nbar must be finite and ≥ 0, got {nb}"));
            }
            if nb == 0.0 && self.state.kind == StateKind::Thermal {
                return bad("thermal nbar must be positive; use kind = \"vacuum\"".into());
            }
        }
        if self.scan.points < 2 || !(self.scan.stop > self.scan.start) {
            return bad("scan needs points ≥ 2 and stop > start".into());
        }
        if let Some(modes) = &self.corrmap.modes {
            if modes.is_empty() || modes.iter().any(|&p| p == 0 || p > n) {
                return bad(format!("corrmap.modes must lie in 1..={n}"));
            }
        }
        if self.sample.shots == 0 {
            return bad("sample.shots must be at least 1".into());
        }
        let plan = self.plan_with_delta(0.0);
        plan.check(n).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn probe_mode(&self) -> usize {
        self.probe.mode.unwrap_or(1)
    }

    fn plan_with_delta(&self, delta: f64) -> ProbePlan {
        let [m, n] = self.probe.ions.unwrap_or([1, self.chain.n_ions.min(2)]);
        ProbePlan::new(self.probe.delta.unwrap_or(delta), self.probe.gt, self.probe.tnu, (m, n))
    }

    pub fn modes(&self) -> Result<NormalModes, CliError> {
        let hz = self.chain.trap_frequency_hz.unwrap_or(1.0);
        let spec = ChainSpec::new(self.chain.n_ions, hz).map_err(|e| CliError::Config(e.to_string()))?;
        normal_modes(&spec).map_err(CliError::from)
    }

    pub fn plan(&self, modes: &NormalModes) -> ProbePlan {
        self.plan_with_delta(modes.frequencies[self.probe_mode() - 1])
    }

    pub fn state(&self, modes: &NormalModes) -> Result<GaussianCovariance, CliError> {
        let n = modes.n();
        let cov = match self.state.kind {
            StateKind::Vacuum => vacuum(n),
            StateKind::Thermal => match self.state.beta {
                Some(beta) => thermal(modes, beta),
                None => thermal_with_target(modes, self.probe_mode() - 1, self.state.nbar.unwrap_or(DEFAULT_NBAR)),
            },
            StateKind::Squeezed => squeezed_uniform(n, self.state.nbar.unwrap_or(DEFAULT_NBAR)),
        };
        cov.map_err(CliError::from)
    }
}

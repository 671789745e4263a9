//! `ioncorr`: excitation probabilities and spatial correlations of a
//! trapped-ion chain probed on a motional sideband.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ioncorr::Error;

use config::{extract_dotted, finish, read_table, set_dotted, set_dotted_raw};

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or inputs rejected before computing.
    Config(String),
    /// The computation itself failed a validity check.
    Numerical(Error),
    /// The oracle suite ran and some check failed.
    Verification(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Numerical(e) => write!(f, "numerical error: {e}"),
            CliError::Verification(msg) => write!(f, "verification failed: {msg}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::Domain(_) | Error::Perturbative(_) | Error::OffResonance { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "ioncorr", version, about = "Spatial excitation correlations of a trapped-ion chain")]
#[command(after_help = "Any config key can also be set as --section.key VALUE, e.g. --probe.gt 0.02")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Write CSV output to this path.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    shots: Option<u64>,
    /// Number of ions.
    #[arg(long = "n", global = true)]
    n_ions: Option<usize>,
    /// Probed mode, 1-based; sets Δ to its frequency.
    #[arg(long, global = true)]
    mode: Option<usize>,
    /// Detuning Δ in units of ν.
    #[arg(long, global = true, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Probe area gT.
    #[arg(long = "gT", global = true)]
    gt: Option<f64>,
    /// Window length Tν.
    #[arg(long = "Tnu", global = true)]
    tnu: Option<f64>,
    /// Addressed ions as M,N.
    #[arg(long, global = true, value_parser = parse_ions)]
    ions: Option<[usize; 2]>,
    /// vacuum, thermal or squeezed.
    #[arg(long, global = true)]
    state: Option<String>,
    #[arg(long, global = true)]
    nbar: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Equilibrium positions and normal modes.
    Modes,
    /// P_m, P_n, P_mn and f_mn for one ion pair.
    Probe,
    /// All-pairs correlation grids at each mode resonance.
    Corrmap,
    /// Probabilities across a detuning grid.
    Scan,
    /// Simulated binary measurement records.
    Sample,
    /// Cross-check against the truncated Fock-space oracle.
    Verify,
}

fn parse_ions(s: &str) -> Result<[usize; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [m, n] => Ok([
            m.parse().map_err(|e| format!("bad ion '{m}': {e}"))?,
            n.parse().map_err(|e| format!("bad ion '{n}': {e}"))?,
        ]),
        _ => Err("expected M,N".into()),
    }
}

fn build_config(cli: &Cli, dotted: &[(String, String)]) -> Result<config::RunConfig, CliError> {
    use toml::Value;
    let mut table = read_table(cli.config.as_deref())?;
    for (key, raw) in dotted {
        set_dotted_raw(&mut table, key, raw)?;
    }
    let float = |x: f64| Value::Float(x);
    let int = |x: u64| -> Result<Value, CliError> {
        i64::try_from(x).map(Value::Integer).map_err(|_| CliError::Config(format!("{x} too large")))
    };
    if let Some(n) = cli.n_ions {
        set_dotted(&mut table, "chain.n_ions", int(n as u64)?)?;
    }
    if let Some(p) = cli.mode {
        set_dotted(&mut table, "probe.mode", int(p as u64)?)?;
    }
    if let Some(d) = cli.delta {
        set_dotted(&mut table, "probe.delta", float(d))?;
    }
    if let Some(g) = cli.gt {
        set_dotted(&mut table, "probe.gt", float(g))?;
    }
    if let Some(t) = cli.tnu {
        set_dotted(&mut table, "probe.tnu", float(t))?;
    }
    if let Some([m, n]) = cli.ions {
        set_dotted(&mut table, "probe.ions", Value::Array(vec![int(m as u64)?, int(n as u64)?]))?;
    }
    if let Some(kind) = &cli.state {
        set_dotted(&mut table, "state.kind", Value::String(kind.clone()))?;
    }
    if let Some(nb) = cli.nbar {
        set_dotted(&mut table, "state.nbar", float(nb))?;
    }
    if let Some(b) = cli.beta {
        set_dotted(&mut table, "state.beta", float(b))?;
    }
    if let Some(s) = cli.seed {
        set_dotted(&mut table, "sample.seed", int(s)?)?;
        set_dotted(&mut table, "verify.seed", int(s)?)?;
    }
    if let Some(k) = cli.shots {
        set_dotted(&mut table, "sample.shots", int(k)?)?;
    }
    if cli.json {
        set_dotted(&mut table, "output.json", Value::Boolean(true))?;
    }
    if let Some(path) = &cli.csv {
        set_dotted(&mut table, "output.csv", Value::String(path.display().to_string()))?;
    }
    finish(table)
}

fn run() -> Result<(), CliError> {
    let (args, dotted) = extract_dotted(std::env::args().collect())?;
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Config(e.to_string().trim_end().to_string())),
    };
    let cfg = build_config(&cli, &dotted)?;
    match cli.command {
        Command::Modes => commands::modes(&cfg),
        Command::Probe => commands::probe(&cfg),
        Command::Corrmap => commands::corrmap(&cfg),
        Command::Scan => commands::scan(&cfg),
        Command::Sample => commands::sample(&cfg),
        Command::Verify => commands::verify(&cfg),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ioncorr: {e}");
            ExitCode::from(e.code())
        }
    }
}

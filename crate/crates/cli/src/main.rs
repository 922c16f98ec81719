mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde::Serialize;

use strichartz::ascent::StepPolicy;
use strichartz::verify::SupportMode;

use config::{Command, DataConfig, FamilyName, GridConfig, RunConfig, TimeConfig, ToleranceRecord};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] strichartz::Error),
    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "strichartz", version, about = "Checks sharp bilinear Strichartz estimates numerically")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Tabulate the closed-form sharp constants and their consistency checks.
    Constants(Common),
    /// Compare both sides of an estimate on one data pair.
    Verify(Common),
    /// Check the one-dimensional identities.
    Identity1d(Common),
    /// Gaussian and random-data benchmarks at the known sharp exponents.
    Benchmarks(Common),
    /// Deficit along the heat flow and its finite differences.
    Heatflow(Common),
    /// Closed-form interaction masses against quadrature or Monte Carlo.
    LemmaMass(Common),
    /// Functional-equation residual on sampled collisions.
    Mb(Common),
    /// Collision maps: conservation and Gaussian product invariance.
    Pq(Common),
    /// Maximise the estimate ratio from a starting datum.
    Ascend(Common),
    /// Behaviour of the critical functional along a Gaussian family.
    Critical(Common),
}

impl Sub {
    fn split(self) -> (Command, Common) {
        match self {
            Sub::Constants(c) => (Command::Constants, c),
            Sub::Verify(c) => (Command::Verify, c),
            Sub::Identity1d(c) => (Command::Identity1d, c),
            Sub::Benchmarks(c) => (Command::Benchmarks, c),
            Sub::Heatflow(c) => (Command::Heatflow, c),
            Sub::LemmaMass(c) => (Command::LemmaMass, c),
            Sub::Mb(c) => (Command::Mb, c),
            Sub::Pq(c) => (Command::Pq, c),
            Sub::Ascend(c) => (Command::Ascend, c),
            Sub::Critical(c) => (Command::Critical, c),
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum DataKind {
    Gaussian,
    Random,
    File,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SupportName {
    Symmetrized,
    Separated,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum PolicyName {
    Power,
    Backtracking,
}

/// Flags shared by every subcommand. Each overrides the matching field of
/// `--config`.
#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol_rel: Option<f64>,
    #[arg(long)]
    tol_abs: Option<f64>,
    /// Directory for report.json and CSV tables. Without it the report goes
    /// to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dimension: `2`, a range `2..6`, or a list `2,3`.
    #[arg(long)]
    d: Option<String>,
    #[arg(long, value_enum)]
    family: Option<FamilyName>,
    #[arg(long, conflicts_with = "beta")]
    sigma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum)]
    data: Option<DataKind>,
    /// Gaussian quadratic coefficient, `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    /// Gaussian drift, `re,im;re,im;...`.
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long)]
    file: Option<PathBuf>,
    /// Grid points per axis.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long)]
    n_t: Option<usize>,
    #[arg(long)]
    window: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Comma-separated radii.
    #[arg(long)]
    radii: Option<String>,
    #[arg(long)]
    rho_max: Option<f64>,
    #[arg(long)]
    rho_nodes: Option<usize>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, value_enum)]
    policy: Option<PolicyName>,
    #[arg(long, value_enum)]
    support: Option<SupportName>,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| CliError::Config(format!("bad {what}: {s:?}"))))
        .collect()
}

fn parse_dims(s: &str) -> Result<Vec<usize>, CliError> {
    if let Some((lo, hi)) = s.split_once("..") {
        let (lo, hi): (usize, usize) = (
            lo.trim().parse().map_err(|_| CliError::Config(format!("bad dimension range {s:?}")))?,
            hi.trim().parse().map_err(|_| CliError::Config(format!("bad dimension range {s:?}")))?,
        );
        if lo > hi {
            return Err(CliError::Config(format!("empty dimension range {s:?}")));
        }
        return Ok((lo..=hi).collect());
    }
    parse_list(s, "dimension")
}

fn parse_complex(s: &str) -> Result<C64, CliError> {
    let parts: Vec<f64> = parse_list(s, "complex number")?;
    match parts[..] {
        [re] => Ok(C64::new(re, 0.0)),
        [re, im] => Ok(C64::new(re, im)),
        _ => Err(CliError::Config(format!("bad complex number {s:?}"))),
    }
}

/// Folds the flags into the config.
fn apply(flags: &Common, config: &mut RunConfig) -> Result<(), CliError> {
    if let Some(s) = flags.seed {
        config.seed = Some(s);
    }
    if let Some(d) = &flags.d {
        let dims = parse_dims(d)?;
        if let [one] = dims[..] {
            config.d = Some(one);
        }
        config.dims = Some(dims);
    }
    if let Some(f) = flags.family {
        config.family = Some(f);
    }
    if let Some(s) = flags.sigma {
        config.family.get_or_insert(FamilyName::Conjugate);
        config.exponent = Some(s);
    }
    if let Some(b) = flags.beta {
        config.family.get_or_insert(FamilyName::Plain);
        config.exponent = Some(b);
    }
    match flags.data {
        Some(DataKind::Gaussian) => {
            let a = parse_complex(flags.a.as_deref().unwrap_or("-1,0"))?;
            let b = match &flags.b {
                Some(b) => b.split(';').map(parse_complex).collect::<Result<_, _>>()?,
                None => vec![C64::new(0.0, 0.0); config.d.unwrap_or(2)],
            };
            config.data = Some(DataConfig::Gaussian {
                a,
                b,
                c: C64::new(0.0, 0.0),
            });
        }
        Some(DataKind::Random) => {
            config.data = Some(DataConfig::Random {
                seed: None,
                recipe: config.recipe.unwrap_or_default(),
            });
        }
        Some(DataKind::File) => {
            let path = flags.file.clone().ok_or_else(|| CliError::Config("--data file needs --file".into()))?;
            config.data = Some(DataConfig::File { path });
        }
        None if flags.a.is_some() || flags.b.is_some() || flags.file.is_some() => {
            return Err(CliError::Config("--a, --b and --file need a matching --data".into()));
        }
        None => {}
    }
    if let (Some(n), Some(h)) = (flags.n, flags.half_width) {
        config.grid = Some(GridConfig { n, half_width: h });
    } else if flags.n.is_some() || flags.half_width.is_some() {
        return Err(CliError::Config("--n and --half-width go together".into()));
    }
    if flags.n_t.is_some() || flags.window.is_some() {
        let t = config.time.get_or_insert(TimeConfig::default());
        t.n_t = flags.n_t.or(t.n_t);
        t.window = flags.window.or(t.window);
    }
    macro_rules! copy {
        ($($f:ident),*) => { $(if let Some(v) = flags.$f { config.$f = Some(v); })* };
    }
    copy!(trials, samples, rho_max, rho_nodes, scale, amplitude, max_steps);
    if let Some(s) = flags.support {
        config.support = Some(match s {
            SupportName::Symmetrized => SupportMode::Symmetrized,
            SupportName::Separated => SupportMode::Separated,
        });
    }
    if let Some(r) = &flags.radii {
        config.radii = Some(parse_list(r, "radius")?);
    }
    if let Some(p) = flags.policy {
        config.policy = Some(match p {
            PolicyName::Power => StepPolicy::PowerIteration,
            PolicyName::Backtracking => StepPolicy::Backtracking {
                initial_step: 0.5,
                min_step: 1e-6,
            },
        });
    }
    if let Some(o) = &flags.out {
        config.out = Some(o.clone());
    }
    Ok(())
}

#[derive(Serialize)]
struct Versions {
    cli: &'static str,
    core: &'static str,
}

#[derive(Serialize)]
struct Report<'a> {
    tool: &'static str,
    versions: Versions,
    command: Command,
    config: &'a RunConfig,
    config_hash: String,
    tolerances: ToleranceRecord,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    result: serde_json::Value,
}

fn execute(command: Command, flags: Common) -> Result<u8, CliError> {
    let mut config = match &flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if config.command.is_some_and(|c| c != command) {
        return Err(CliError::Config("config names a different command".into()));
    }
    config.command = Some(command);
    apply(&flags, &mut config)?;
    let default = commands::default_tolerances(command, &config);
    let tolerances = config::resolve_tolerances(&mut config, flags.tol_rel, flags.tol_abs, default);
    let outcome = commands::run(command, &mut config)?;
    let report = Report {
        tool: "strichartz",
        versions: Versions {
            cli: env!("CARGO_PKG_VERSION"),
            core: strichartz::VERSION,
        },
        command,
        config_hash: config.hash(),
        config: &config,
        tolerances,
        pass: outcome.pass,
        error: outcome.numerical_failure.clone(),
        result: outcome.result,
    };
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Output(e.to_string()))?;
    json.push('\n');
    match &config.out {
        Some(dir) => {
            let io = |e: std::io::Error| CliError::Output(format!("{}: {e}", dir.display()));
            std::fs::create_dir_all(dir).map_err(io)?;
            std::fs::write(dir.join("report.json"), &json).map_err(io)?;
            for (name, body) in &outcome.tables {
                std::fs::write(dir.join(name), body).map_err(io)?;
            }
        }
        None => print!("{json}"),
    }
    Ok(match (outcome.numerical_failure, outcome.pass) {
        (Some(e), _) => {
            eprintln!("strichartz: numerical failure: {e}");
            3
        }
        (None, true) => 0,
        (None, false) => 1,
    })
}

fn main() -> ExitCode {
    let (command, flags) = Cli::parse().command.split();
    match execute(command, flags) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("strichartz: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

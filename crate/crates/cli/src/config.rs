//! Run configuration: one JSON document, overridden by command-line flags.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use strichartz::ascent::StepPolicy;
use strichartz::datum::RandomData;
use strichartz::mb::CriticalSampling;
use strichartz::verify::{SupportMode, Tolerances};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "kebab-case")]
pub enum Command {
    Constants,
    Verify,
    Identity1d,
    Benchmarks,
    Heatflow,
    LemmaMass,
    Mb,
    Pq,
    Ascend,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Conjugate,
    Plain,
}

/// Where a datum comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    /// `exp(a|eta|^2 + b.eta + c)` on the frequency side.
    Gaussian {
        a: C64,
        b: Vec<C64>,
        #[serde(default)]
        c: C64,
    },
    /// Seeded random Gaussian bumps. A missing seed is taken from the run
    /// seed (plus one for the second datum of a pair).
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default)]
        recipe: RandomData,
    },
    /// A field saved with `GridField::save`.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_t: Option<usize>,
    /// Half-length of the directly integrated time window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive: Option<bool>,
}

/// Everything a run can be told. Each command reads the fields it needs and
/// fills in defaults; the filled-in copy is what reports embed and hash.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Dimensions for table-valued commands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyName>,
    /// `sigma` for the conjugate family, `beta` for the plain one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    /// Second datum of a pair; defaults to a fresh random datum or a copy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data2: Option<DataConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipe: Option<RandomData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<SupportMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    /// Relative size of the `cos` perturbation in `mb`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_re: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_re: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<CriticalSampling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<StepPolicy>,
}

/// Where the tolerances in a report came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Default,
    Config,
    Flag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceRecord {
    pub rel: f64,
    pub abs: f64,
    pub rel_source: Provenance,
    pub abs_source: Provenance,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("configs always serialise");
        hex::encode(Sha256::digest(bytes))
    }

}

/// Tolerances with their provenance: flag over config over the command's
/// default.
pub fn resolve_tolerances(
    config: &mut RunConfig,
    flag_rel: Option<f64>,
    flag_abs: Option<f64>,
    default: Tolerances,
) -> ToleranceRecord {
    let from_config = config.tolerances;
    let pick = |flag: Option<f64>, conf: Option<f64>, def: f64| match (flag, conf) {
        (Some(v), _) => (v, Provenance::Flag),
        (None, Some(v)) => (v, Provenance::Config),
        (None, None) => (def, Provenance::Default),
    };
    let (rel, rel_source) = pick(flag_rel, from_config.map(|t| t.rel), default.rel);
    let (abs, abs_source) = pick(flag_abs, from_config.map(|t| t.abs), default.abs);
    config.tolerances = Some(Tolerances { rel, abs });
    ToleranceRecord {
        rel,
        abs,
        rel_source,
        abs_source,
    }
}

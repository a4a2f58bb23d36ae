//! TOML configuration: one table per subcommand, keys named like the long
//! flags with `-` replaced by `_`. Values resolve as flags, then config,
//! then built-in defaults.
//!
//! ```toml
//! [simulate]
//! algo = "ema"
//! alpha_ramp = [0.9, 1.0]
//!
//! [montecarlo]
//! trials = 1000
//! rho_range = [0.0, 3.0]
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::args::{EquilibriaArgs, MonteCarloArgs, SimulateArgs, StabilityArgs, VerifyArgs};
use crate::error::{io_error, CliError, CliResult};
use linssl::AlphaSchedule;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub simulate: SimulateArgs,
    pub equilibria: EquilibriaArgs,
    pub stability: StabilityArgs,
    pub montecarlo: MonteCarloArgs,
    pub verify: VerifyArgs,
    #[serde(skip)]
    pub path: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        cfg.path = Some(path.to_owned());
        Ok(cfg)
    }
}

/// Fills every `None` field of `self` from `base`.
pub trait Overlay {
    fn overlay(self, base: Self) -> Self;
}

macro_rules! overlay {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl crate::config::Overlay for $ty {
            fn overlay(self, base: Self) -> Self {
                Self { $($field: self.$field.or(base.$field)),* }
            }
        }
    };
}
pub(crate) use overlay;

/// Two comma-separated numbers, `lo,hi` on the command line or `[lo, hi]`
/// in TOML.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Pair(pub [f64; 2]);

impl From<[f64; 2]> for Pair {
    fn from(v: [f64; 2]) -> Self {
        Self(v)
    }
}

impl From<Pair> for [f64; 2] {
    fn from(p: Pair) -> Self {
        p.0
    }
}

impl FromStr for Pair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [lo, hi] = parts[..] else {
            return Err(format!("expected two comma-separated numbers, got '{s}'"));
        };
        let num = |x: &str| x.parse::<f64>().map_err(|e| format!("'{x}': {e}"));
        Ok(Self([num(lo)?, num(hi)?]))
    }
}

/// Resolves the α schedule: a flag beats the config file, and within one
/// source a constant and a ramp are mutually exclusive.
pub fn resolve_alpha(
    flag: (Option<f64>, Option<Pair>),
    config: (Option<f64>, Option<Pair>),
    default: AlphaSchedule,
) -> CliResult<AlphaSchedule> {
    let pick = |(c, r): (Option<f64>, Option<Pair>), source: &str| match (c, r) {
        (Some(_), Some(_)) => Err(CliError::Usage(format!(
            "alpha and alpha_ramp are mutually exclusive ({source})"
        ))),
        (Some(a), None) => Ok(Some(AlphaSchedule::constant(a))),
        (None, Some(Pair([a, b]))) => Ok(Some(AlphaSchedule::ramp(a, b))),
        (None, None) => Ok(None),
    };
    Ok(pick(flag, "flags")?.or(pick(config, "config")?).unwrap_or(default))
}

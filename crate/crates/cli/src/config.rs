//! The JSON configuration file and the defaults it falls back to.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ztf::modulation::WindowSpec;
use ztf::verify::{default_suite, lookup, CheckSpec, EnsembleKind};
use ztf::young::YoungFunction;
use ztf::{Error, LatticeSpec, Result, TorusGrid};

pub const DEFAULT_SEED: u64 = 20240601;
pub const DEFAULT_OUTPUT: &str = "report.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Absent means `n = 1, K = 8`; signal and field files carry their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeConfig>,
    #[serde(default)]
    pub torus: TorusConfig,
    #[serde(default)]
    pub window: WindowSpec,
    #[serde(default)]
    pub young: YoungConfig,
    /// Empty runs every registered check with its defaults.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusConfig {
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YoungConfig {
    #[serde(default = "YoungFunction::eq5")]
    pub phi: YoungFunction,
    /// Absent means `Ψ = Φ` for the two-function spaces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<YoungFunction>,
}

impl Default for YoungConfig {
    fn default() -> Self {
        YoungConfig { phi: YoungFunction::eq5(), psi: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckOverride {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: DEFAULT_SEED,
            lattice: None,
            torus: TorusConfig::default(),
            window: WindowSpec::default(),
            young: YoungConfig::default(),
            checks: Vec::new(),
            output: None,
            threads: None,
        }
    }
}

impl Config {
    /// Reads and validates a config file. The name `default` with no such
    /// file on disk gives the built-in defaults.
    pub fn load(path: &Path) -> Result<Config> {
        if path == Path::new("default") && !path.exists() {
            return Ok(Config::default());
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Config> {
        let config: Config = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Everything that can be checked without computing.
    pub fn validate(&self) -> Result<()> {
        let spec = self.lattice_spec()?;
        self.torus_grid(spec)?;
        self.young.phi.validate()?;
        if let Some(psi) = &self.young.psi {
            psi.validate()?;
        }
        if self.threads == Some(0) {
            return Err(Error::Format("threads must be at least 1".into()));
        }
        for c in &self.checks {
            if lookup(&c.id).is_none() {
                return Err(Error::Usage(format!("unknown check id {:?}", c.id)));
            }
            if c.trials == Some(0) {
                return Err(Error::Format(format!("check {} needs at least one trial", c.id)));
            }
            if c.tolerance.is_some_and(|t| !(t.is_finite() && t >= 0.0)) {
                return Err(Error::Format(format!("check {} has an invalid tolerance", c.id)));
            }
        }
        Ok(())
    }

    pub fn lattice_spec(&self) -> Result<LatticeSpec> {
        match self.lattice {
            Some(l) => LatticeSpec::new(l.n, l.k, l.c.unwrap_or(3 * l.k)),
            None => LatticeSpec::with_default_radius(1, 8),
        }
    }

    pub fn torus_grid(&self, spec: LatticeSpec) -> Result<TorusGrid> {
        TorusGrid::new(spec.dim(), self.torus.m.unwrap_or(6 * spec.support_radius() + 1))
    }

    /// The checks to run: the overrides merged over the registered defaults,
    /// or the whole registry when there are none.
    pub fn check_specs(&self) -> Result<Vec<CheckSpec>> {
        if self.checks.is_empty() {
            return Ok(default_suite(self.seed));
        }
        self.checks
            .iter()
            .map(|o| {
                let mut spec = CheckSpec::new(&o.id, o.seed.unwrap_or(self.seed))?;
                if let Some(t) = o.trials {
                    spec.trials = t;
                }
                if let Some(t) = o.tolerance {
                    spec.tolerance = t;
                }
                spec.ensemble = o.ensemble;
                Ok(spec)
            })
            .collect()
    }
}

//! The randomized inequality harness: registered checks over seeded
//! ensembles, margin aggregation, and JSON-Lines reports.
//!
//! Each trial yields a margin: `(RHS - LHS)/RHS` for an inequality, minus the
//! deviation over its natural scale for an identity. A trial violates its
//! check when the margin falls below `-tolerance`.

mod checks;
pub mod ensemble;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::ser_f64;
use crate::lattice::{LatticeSpec, Signal, TorusGrid};
use crate::modulation::WindowSpec;

pub use checks::{lookup, registry, CheckDef};
pub use ensemble::{generate_ensemble, EnsembleKind, Sample};

/// The lattice, torus grid and analysis window shared by all checks.
#[derive(Debug, Clone)]
pub struct Environment {
    pub spec: LatticeSpec,
    pub torus: TorusGrid,
    pub window: WindowSpec,
    g: Signal,
}

impl Environment {
    /// Refuses tori coarser than `M = 6K + 1`, the grid on which every
    /// registered check is exact.
    pub fn new(spec: LatticeSpec, torus: TorusGrid, window: WindowSpec) -> Result<Self> {
        if torus.dim() != spec.dim() {
            return Err(Error::Shape("torus and lattice dimensions differ".into()));
        }
        let needed = 6 * spec.support_radius() + 1;
        if torus.samples() < needed {
            return Err(Error::Precision(format!(
                "the check suites need M ≥ 6K+1 = {needed}, got M={}",
                torus.samples()
            )));
        }
        let g = window.build(spec)?;
        Ok(Environment { spec, torus, window, g })
    }

    /// Default torus and the unit Gaussian window.
    pub fn with_defaults(spec: LatticeSpec) -> Result<Self> {
        Self::new(spec, spec.default_torus(), WindowSpec::default())
    }

    pub fn window_signal(&self) -> &Signal {
        &self.g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSpec {
    pub id: String,
    pub trials: usize,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleKind>,
    pub seed: u64,
}

impl CheckSpec {
    /// The registered defaults for `id`.
    pub fn new(id: &str, seed: u64) -> Result<Self> {
        let def = lookup(id).ok_or_else(|| unknown(id))?;
        Ok(CheckSpec { id: def.id.into(), trials: def.trials, tolerance: def.tolerance, ensemble: None, seed })
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_ensemble(mut self, kind: EnsembleKind) -> Self {
        self.ensemble = Some(kind);
        self
    }
}

fn unknown(id: &str) -> Error {
    Error::Usage(format!("unknown check id {id:?}"))
}

/// Every registered check with its defaults.
pub fn default_suite(seed: u64) -> Vec<CheckSpec> {
    registry()
        .iter()
        .map(|d| CheckSpec { id: d.id.into(), trials: d.trials, tolerance: d.tolerance, ensemble: None, seed })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub id: String,
    pub trials: usize,
    pub violations: usize,
    #[serde(serialize_with = "ser_f64")]
    pub worst_margin: f64,
    pub seed: u64,
    #[serde(serialize_with = "ser_f64")]
    pub elapsed: f64,
    pub tier: Option<String>,
    /// Per-check statistics (`name.min`, `name.max`, `name.mean`,
    /// `name.cv`). Not part of the report line.
    #[serde(skip)]
    pub diagnostics: BTreeMap<String, f64>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Record wall-clock seconds in `elapsed`. Off by default so that reports
    /// are byte-identical between runs.
    pub timing: bool,
}

pub fn run_suite(specs: &[CheckSpec], env: &Environment) -> Result<Vec<CheckResult>> {
    run_suite_with(specs, env, RunOptions::default())
}

pub fn run_suite_with(specs: &[CheckSpec], env: &Environment, options: RunOptions) -> Result<Vec<CheckResult>> {
    let mut defs = Vec::with_capacity(specs.len());
    for spec in specs {
        let def = lookup(&spec.id).ok_or_else(|| unknown(&spec.id))?;
        if spec.trials == 0 {
            return Err(Error::Usage(format!("check {:?} needs at least one trial", spec.id)));
        }
        if !(spec.tolerance >= 0.0 && spec.tolerance.is_finite()) {
            return Err(Error::Usage(format!("check {:?} has tolerance {}", spec.id, spec.tolerance)));
        }
        if let Some(kind) = spec.ensemble {
            if !def.ensembles.contains(&kind) {
                return Err(Error::Usage(format!(
                    "check {:?} cannot draw from the {} ensemble",
                    spec.id,
                    kind.name()
                )));
            }
        }
        defs.push(def);
    }
    specs.iter().zip(defs).map(|(spec, def)| run_check(spec, def, env, options)).collect()
}

fn run_check(spec: &CheckSpec, def: &CheckDef, env: &Environment, options: RunOptions) -> Result<CheckResult> {
    let start = Instant::now();
    let ctx = checks::Ctx::new(env, spec.ensemble.or(def.ensembles.first().copied()));
    let trials: Vec<checks::Trial> = (0..spec.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ensemble::trial_rng(spec.seed, &spec.id, t as u64);
            (def.run)(&ctx, &mut rng, t)
        })
        .collect::<Result<_>>()
        .map_err(|e| e.in_check(&spec.id))?;
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    let mut tiers = Vec::new();
    let mut notes: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for trial in &trials {
        let margin = if trial.margin.is_nan() { -f64::MAX } else { trial.margin };
        worst = worst.min(margin);
        if margin < -spec.tolerance {
            violations += 1;
        }
        if let Some(t) = trial.tier {
            if !tiers.contains(&t) {
                tiers.push(t);
            }
        }
        for (k, v) in &trial.notes {
            notes.entry(k).or_default().push(*v);
        }
    }
    tiers.sort_unstable();
    let elapsed = if options.timing { start.elapsed().as_secs_f64() } else { 0.0 };
    Ok(CheckResult {
        id: spec.id.clone(),
        trials: spec.trials,
        violations,
        worst_margin: worst.clamp(-f64::MAX, f64::MAX),
        seed: spec.seed,
        elapsed,
        tier: (!tiers.is_empty()).then(|| tiers.join(",")),
        diagnostics: summarize(&notes),
    })
}

fn summarize(notes: &BTreeMap<&str, Vec<f64>>) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (key, values) in notes {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        out.insert(format!("{key}.min"), values.iter().copied().fold(f64::INFINITY, f64::min));
        out.insert(format!("{key}.max"), values.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        out.insert(format!("{key}.mean"), mean);
        if mean != 0.0 {
            out.insert(format!("{key}.cv"), var.sqrt() / mean.abs());
        }
    }
    out
}

/// One JSON object per line, in input order.
pub fn report_jsonl(results: &[CheckResult]) -> Result<String> {
    let mut out = String::new();
    for r in results {
        out.push_str(&r.to_json()?);
        out.push('\n');
    }
    Ok(out)
}

/// The diagnostics of every result as one JSON object keyed by check id.
pub fn diagnostics_json(results: &[CheckResult]) -> Result<String> {
    let map: BTreeMap<&str, BTreeMap<&str, serde_json::Value>> = results
        .iter()
        .map(|r| {
            let inner = r
                .diagnostics
                .iter()
                .map(|(k, v)| {
                    let v = if v.is_finite() {
                        serde_json::from_str(&crate::io::format_f64(*v)).expect("formatted float parses")
                    } else {
                        serde_json::Value::String(format!("{v}"))
                    };
                    (k.as_str(), v)
                })
                .collect();
            (r.id.as_str(), inner)
        })
        .collect();
    Ok(serde_json::to_string_pretty(&map)?)
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(CheckResult::passed)
}

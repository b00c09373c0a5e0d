//! Seeded random signals and symbols for the check suites.

use std::f64::consts::FRAC_1_SQRT_2;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Environment;
use crate::error::{Error, Result};
use crate::lattice::{Cube, PhaseSpaceField, Signal};
use crate::stft::stft_on;

pub type TrialRng = ChaCha20Rng;

/// 64-bit FNV-1a.
pub fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf29ce484222325, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

/// The stream for trial `index` of the check or ensemble `label`. The key
/// mixes the master seed with the label hash and the stream number is the
/// trial index, so trials can be drawn in any order.
pub fn trial_rng(seed: u64, label: &str, index: u64) -> TrialRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a(label).to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    GaussianSignal,
    TrigSymbol,
    IndicatorSymbol,
    RankOneSymbol,
}

impl EnsembleKind {
    pub const ALL: [EnsembleKind; 4] = [
        EnsembleKind::GaussianSignal,
        EnsembleKind::TrigSymbol,
        EnsembleKind::IndicatorSymbol,
        EnsembleKind::RankOneSymbol,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnsembleKind::GaussianSignal => "gaussian-signal",
            EnsembleKind::TrigSymbol => "trig-symbol",
            EnsembleKind::IndicatorSymbol => "indicator-symbol",
            EnsembleKind::RankOneSymbol => "rank-one-symbol",
        }
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnsembleKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown ensemble {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Signal(Signal),
    Field(PhaseSpaceField),
}

impl Sample {
    pub fn into_signal(self) -> Option<Signal> {
        match self {
            Sample::Signal(s) => Some(s),
            Sample::Field(_) => None,
        }
    }

    pub fn into_field(self) -> Option<PhaseSpaceField> {
        match self {
            Sample::Field(f) => Some(f),
            Sample::Signal(_) => None,
        }
    }
}

/// One draw of `kind`, reproducible from `seed`.
pub fn generate_ensemble(kind: EnsembleKind, env: &Environment, seed: u64) -> Result<Sample> {
    let mut rng = trial_rng(seed, kind.name(), 0);
    draw(kind, env, &mut rng)
}

pub fn draw(kind: EnsembleKind, env: &Environment, rng: &mut TrialRng) -> Result<Sample> {
    Ok(match kind {
        EnsembleKind::GaussianSignal => Sample::Signal(gaussian_signal(env, rng)),
        EnsembleKind::TrigSymbol => Sample::Field(trig_symbol(env, rng, false)?),
        EnsembleKind::IndicatorSymbol => Sample::Field(indicator_symbol(env, rng)?),
        EnsembleKind::RankOneSymbol => {
            let u = gaussian_signal(env, rng);
            let v = gaussian_signal(env, rng);
            Sample::Field(rank_one_symbol(env, &u, &v)?)
        }
    })
}

/// Standard complex normal: real and imaginary parts `N(0, 1/2)`.
pub fn complex_normal(rng: &mut TrialRng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// i.i.d. standard complex normal entries on `[-K, K]ⁿ`.
pub fn gaussian_signal(env: &Environment, rng: &mut TrialRng) -> Signal {
    Signal::from_support_fn(env.spec, |_| complex_normal(rng))
}

/// [`gaussian_signal`] scaled to unit `ℓ²` norm.
pub fn unit_signal(env: &Environment, rng: &mut TrialRng) -> Signal {
    let f = gaussian_signal(env, rng);
    let norm = f.norm2();
    f.scale(Complex64::new(1.0 / norm, 0.0))
}

/// On each slice `|m|∞ ≤ 2K` an independent trigonometric polynomial
/// `Σ_{|d|∞ ≤ K} c_d e^{2πi d·w}` with complex normal coefficients of
/// variance `(2K+1)⁻ⁿ`, so values are of unit size. `real` keeps the real
/// part only.
pub fn trig_symbol(env: &Environment, rng: &mut TrialRng, real: bool) -> Result<PhaseSpaceField> {
    let spec = env.spec;
    let k = spec.support_radius();
    let freqs = Cube::new(spec.dim(), k).points();
    let scale = 1.0 / (freqs.len() as f64).sqrt();
    let m_cube = Cube::new(spec.dim(), spec.max_shift());
    let coeffs: Vec<Vec<Complex64>> =
        (0..m_cube.len()).map(|_| freqs.iter().map(|_| complex_normal(rng) * scale).collect()).collect();
    let torus = &env.torus;
    let mut values = Vec::with_capacity(m_cube.len() * torus.len());
    let nodes = torus.multi_indices();
    for row in &coeffs {
        for j in &nodes {
            let z: Complex64 = row.iter().zip(&freqs).map(|(c, d)| c * torus.character(d, j)).sum();
            values.push(if real { Complex64::new(z.re, 0.0) } else { z });
        }
    }
    PhaseSpaceField::new(spec, torus.clone(), spec.max_shift(), k, values)
}

/// Indicator of a random lattice box inside `[-2K, 2K]ⁿ` times the Fejér
/// kernel of degree `K` in every torus direction. Real and nonnegative.
pub fn indicator_symbol(env: &Environment, rng: &mut TrialRng) -> Result<PhaseSpaceField> {
    let spec = env.spec;
    let r = spec.max_shift() as i64;
    let k = spec.support_radius();
    let bounds: Vec<(i64, i64)> = (0..spec.dim())
        .map(|_| {
            let a = rng.random_range(-r..=r);
            let b = rng.random_range(-r..=r);
            (a.min(b), a.max(b))
        })
        .collect();
    let m_samples = env.torus.samples();
    let fejer: Vec<f64> = (0..m_samples).map(|j| fejer(k, j as f64 / m_samples as f64)).collect();
    let torus = env.torus.clone();
    let nodes = torus.multi_indices();
    let m_cube = Cube::new(spec.dim(), spec.max_shift());
    let mut values = Vec::with_capacity(m_cube.len() * torus.len());
    for m in m_cube.points() {
        let inside = m.iter().zip(&bounds).all(|(x, (a, b))| a <= x && x <= b);
        for j in &nodes {
            let v = if inside { j.iter().map(|&i| fejer[i as usize]).product() } else { 0.0 };
            values.push(Complex64::new(v, 0.0));
        }
    }
    PhaseSpaceField::new(spec, torus, spec.max_shift(), k, values)
}

/// `Σ_{|d| ≤ L} (1 - |d|/(L+1)) cos(2π d w)`, clamped at zero against
/// rounding near its zeros.
pub fn fejer(degree: usize, w: f64) -> f64 {
    let l = degree as i64;
    let s: f64 = (-l..=l)
        .map(|d| (1.0 - d.unsigned_abs() as f64 / (l + 1) as f64) * (2.0 * std::f64::consts::PI * d as f64 * w).cos())
        .sum();
    s.max(0.0)
}

/// `V_g u · conj(V_g v)` on `|m|∞ ≤ 2K` with the environment window; degree
/// `2K`, and `|V_g u|² ≥ 0` when `u = v`.
pub fn rank_one_symbol(env: &Environment, u: &Signal, v: &Signal) -> Result<PhaseSpaceField> {
    let g = env.window_signal();
    let r = env.spec.max_shift();
    let a = stft_on(u, g, &env.torus, r)?;
    let b = stft_on(v, g, &env.torus, r)?;
    a.mul(&b.conj())
}

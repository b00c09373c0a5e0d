//! Modulation-space norms of signals and symbols, analysis windows, and the
//! grid certificates for the Young-function embedding condition.

use std::f64::consts::PI;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, PhaseSpaceField, Signal, TorusGrid};
use crate::orlicz::{mixed_norm, mixed_norm_swapped, product_norm};
use crate::stft::{stft, stft_symbol_norm};
use crate::young::YoungFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WindowKind {
    /// `e^{-π|k|²/s}` on `[-K, K]ⁿ`; `s` defaults to `K/2`.
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        width: Option<f64>,
    },
    /// `δ₀`.
    Kronecker,
    /// A signal file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// ℓ²-unit.
    #[default]
    Unit,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    #[serde(flatten)]
    pub kind: WindowKind,
    #[serde(default)]
    pub normalization: Normalization,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec::gaussian()
    }
}

impl WindowSpec {
    pub fn gaussian() -> Self {
        WindowSpec { kind: WindowKind::Gaussian { width: None }, normalization: Normalization::Unit }
    }

    pub fn gaussian_width(width: f64) -> Self {
        WindowSpec { kind: WindowKind::Gaussian { width: Some(width) }, normalization: Normalization::Unit }
    }

    pub fn kronecker() -> Self {
        WindowSpec { kind: WindowKind::Kronecker, normalization: Normalization::Unit }
    }

    /// A short identifier for reports.
    pub fn id(&self) -> String {
        match &self.kind {
            WindowKind::Gaussian { width: None } => "gaussian".into(),
            WindowKind::Gaussian { width: Some(s) } => format!("gaussian({s})"),
            WindowKind::Kronecker => "kronecker".into(),
            WindowKind::File { path } => format!("file({})", path.display()),
        }
    }

    pub fn build(&self, spec: LatticeSpec) -> Result<Signal> {
        let raw = match &self.kind {
            WindowKind::Gaussian { width } => {
                let k = spec.support_radius();
                if k == 0 {
                    Signal::delta(spec, &vec![0; spec.dim()])?
                } else {
                    let s = width.unwrap_or(k as f64 / 2.0);
                    if !(s > 0.0 && s.is_finite()) {
                        return Err(Error::Domain(format!("gaussian width {s} must be positive")));
                    }
                    Signal::from_support_fn(spec, |p| {
                        let r2: f64 = p.iter().map(|&x| (x * x) as f64).sum();
                        Complex64::new((-PI * r2 / s).exp(), 0.0)
                    })
                }
            }
            WindowKind::Kronecker => Signal::delta(spec, &vec![0; spec.dim()])?,
            WindowKind::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Format(format!("cannot read window {}: {e}", path.display())))?;
                let g = Signal::from_json(&text)?;
                if *g.spec() != spec {
                    return Err(Error::Shape("window file lives on a different lattice".into()));
                }
                g
            }
        };
        raw.require_admissible("window")?;
        if raw.is_zero() {
            return Err(Error::Domain("window must be non-zero".into()));
        }
        match self.normalization {
            Normalization::Unit => raw.normalized(),
            Normalization::None => Ok(raw),
        }
    }
}

/// `‖V_g f‖_{L^p}` on the quadrature grid; the grid maximum for `p = ∞`.
pub fn modulation_norm(f: &Signal, g: &Signal, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(stft(f, g)?.norm_p(p))
}

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("exponent p={p} must lie in [1, ∞]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrliczVariant {
    /// `‖V_g f‖_{L^Φ}` over the product measure.
    #[serde(rename = "M^Phi")]
    Single,
    /// `‖V_g f‖_{L^{Φ,Ψ}}`.
    #[serde(rename = "M^{Phi,Psi}")]
    Mixed,
    /// `‖V_g f‖_{L_*^{Φ,Ψ}}`.
    #[serde(rename = "W^{Phi,Psi}")]
    Wiener,
}

/// `M^Φ`, `M^{Φ,Ψ}` or `W^{Φ,Ψ}` norm of `f`; a missing `Ψ` means `Ψ = Φ`.
pub fn orlicz_modulation_norm(
    f: &Signal,
    g: &Signal,
    phi: &YoungFunction,
    psi: Option<&YoungFunction>,
    variant: OrliczVariant,
) -> Result<f64> {
    let v = stft(f, g)?;
    let psi = psi.unwrap_or(phi);
    match variant {
        OrliczVariant::Single => product_norm(&v, phi),
        OrliczVariant::Mixed => mixed_norm(&v, phi, psi),
        OrliczVariant::Wiener => mixed_norm_swapped(&v, phi, psi),
    }
}

/// Window for symbol norms: the default lattice Gaussian times the Fejér
/// kernel of degree `⌊M/4⌋` in each torus direction, normalized to unit
/// `L²` on phase space.
pub fn symbol_window(spec: LatticeSpec, torus: &TorusGrid) -> Result<PhaseSpaceField> {
    let g = WindowSpec::gaussian().build(spec)?;
    let degree = torus.samples() / 4;
    let fejer: Vec<f64> = (0..torus.samples())
        .map(|j| {
            let w = j as f64 / torus.samples() as f64;
            (-(degree as i64)..=degree as i64)
                .map(|d| (1.0 - d.unsigned_abs() as f64 / (degree + 1) as f64) * (2.0 * PI * d as f64 * w).cos())
                .sum()
        })
        .collect();
    let field = PhaseSpaceField::from_fn(spec, torus.clone(), spec.support_radius(), degree, |m, _| g.get(m))?;
    let t = torus.len();
    let values: Vec<Complex64> = field
        .values()
        .iter()
        .enumerate()
        .map(|(i, z)| z * torus.multi_index(i % t).iter().map(|&j| fejer[j as usize]).product::<f64>())
        .collect();
    let field = PhaseSpaceField::new(spec, torus.clone(), spec.support_radius(), degree, values)?;
    let norm = field.norm_l2();
    Ok(field.scale(Complex64::new(1.0 / norm, 0.0)))
}

/// `‖V_G σ‖_{L^p}` on `(Zⁿ × Tⁿ) × (Zⁿ × Tⁿ)^`.
pub fn symbol_modulation_norm(sigma: &PhaseSpaceField, window: &PhaseSpaceField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    stft_symbol_norm(sigma, window, p)
}

/// Outcome of [`embedding_condition`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmbeddingCertificate {
    pub holds: bool,
    /// Smallest `C` with `Ψᵢ ≤ C Φᵢ` on the whole grid; meaningful when
    /// `holds`.
    pub constant: f64,
}

/// Grid certificate for `Ψᵢ(x) ≤ C Φᵢ(x)` on `(0, x₀]`, `i = 1, 2`.
///
/// The grid is `points` log-spaced values over `[x₀·10⁻¹², x₀]`. The
/// condition is declared to fail when `Φᵢ` vanishes where `Ψᵢ` does not, or
/// when the ratio `Ψᵢ/Φᵢ` peaks at the smallest grid point and still grows
/// by more than 0.1% over the last decade there.
pub fn embedding_condition(
    phi: (&YoungFunction, &YoungFunction),
    psi: (&YoungFunction, &YoungFunction),
    x0: f64,
    points: usize,
) -> Result<EmbeddingCertificate> {
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(Error::Domain(format!("x0={x0} must be positive")));
    }
    if points < 16 {
        return Err(Error::Domain(format!("embedding grid needs at least 16 points, got {points}")));
    }
    let grid: Vec<f64> = (0..points)
        .map(|i| x0 * 10f64.powf(-12.0 * (1.0 - i as f64 / (points - 1) as f64)))
        .collect();
    let per_decade = ((points - 1) as f64 / 12.0).round().max(1.0) as usize;
    let mut constant = 0.0f64;
    let mut holds = true;
    for (a, b) in [(phi.0, psi.0), (phi.1, psi.1)] {
        let mut ratios = Vec::with_capacity(points);
        for &x in &grid {
            let (f, g) = (a.value(x), b.value(x));
            if f == 0.0 {
                if g > 0.0 {
                    holds = false;
                }
                ratios.push(0.0);
                continue;
            }
            ratios.push(g / f);
        }
        let max = ratios.iter().copied().fold(0.0, f64::max);
        constant = constant.max(max);
        let growing = ratios[0] > ratios[per_decade] * (1.0 + 1e-3);
        if ratios[0] >= max && growing {
            holds = false;
        }
    }
    Ok(EmbeddingCertificate { holds, constant })
}

/// Ids of the registered checks that exercise this module.
pub const INVARIANTS: &[&str] = &[
    "m2_identity",
    "tf_shift_invariance",
    "embedding_certificates",
    "window_robustness",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::translate;
    use crate::lattice::modulate;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn spec() -> LatticeSpec {
        LatticeSpec::with_default_radius(1, 8).unwrap()
    }

    fn sample(seed: u64) -> Signal {
        let mut state = seed.wrapping_add(17);
        Signal::from_support_fn(spec(), |_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            c(a, 1.0 - a * a)
        })
    }

    #[test]
    fn windows() {
        let g = WindowSpec::gaussian().build(spec()).unwrap();
        assert!((g.norm2() - 1.0).abs() < 1e-15);
        assert!(g.is_admissible());
        // truncated Gaussian c·e^{-πk²/4} with K = 8
        let ratio = g.get(&[1]).re / g.get(&[0]).re;
        assert!(rel(ratio, (-PI / 4.0).exp()) < 1e-14);
        let d = WindowSpec::kronecker().build(spec()).unwrap();
        assert_eq!(d, Signal::delta(spec(), &[0]).unwrap());
        let k0 = LatticeSpec::with_default_radius(1, 0).unwrap();
        assert_eq!(WindowSpec::gaussian().build(k0).unwrap(), Signal::delta(k0, &[0]).unwrap());
        let text = serde_json::to_string(&WindowSpec::gaussian_width(2.0)).unwrap();
        assert_eq!(text, r#"{"kind":"gaussian","width":2.0,"normalization":"unit"}"#);
        let back: WindowSpec = serde_json::from_str(r#"{"kind":"kronecker"}"#).unwrap();
        assert_eq!(back, WindowSpec::kronecker());
    }

    #[test]
    fn m2_is_l2() {
        let g = WindowSpec::gaussian().build(spec()).unwrap();
        let f = sample(1);
        let f = f.scale(c(5.0 / f.norm2(), 0.0));
        assert!((modulation_norm(&f, &g, 2.0).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn kronecker_window_collapses() {
        let d = WindowSpec::kronecker().build(spec()).unwrap();
        let d0 = Signal::delta(spec(), &[0]).unwrap();
        assert_eq!(modulation_norm(&d0, &d, f64::INFINITY).unwrap(), 1.0);
        let f = d0.scale(c(0.6, 0.0)).add(&Signal::delta(spec(), &[1]).unwrap().scale(c(0.0, -1.3)));
        for p in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
            assert!(rel(modulation_norm(&f, &d, p).unwrap(), f.norm_p(p)) < 1e-14, "p={p}");
        }
    }

    #[test]
    fn orlicz_variants_reduce_to_power() {
        let g = WindowSpec::gaussian().build(spec()).unwrap();
        let f = sample(4);
        for p in [1.0, 2.0, 3.0] {
            let phi = YoungFunction::power(p).unwrap();
            let want = modulation_norm(&f, &g, p).unwrap();
            for v in [OrliczVariant::Single, OrliczVariant::Mixed, OrliczVariant::Wiener] {
                let got = orlicz_modulation_norm(&f, &g, &phi, None, v).unwrap();
                assert!(rel(got, want) < 1e-9, "{v:?} p={p}");
            }
        }
        let zero = Signal::zeros(spec());
        let e = YoungFunction::eq5();
        assert_eq!(orlicz_modulation_norm(&zero, &g, &e, None, OrliczVariant::Single).unwrap(), 0.0);
    }

    #[test]
    fn time_frequency_shifts_keep_norms() {
        let s = spec();
        let g = WindowSpec::gaussian().build(s).unwrap();
        let f = Signal::from_support_fn(s, |p| if p[0].abs() <= 4 { c(p[0] as f64, 0.5) } else { c(0.0, 0.0) });
        let moved = modulate(&translate(&f, &[3]).unwrap(), &[7.0 / 49.0]).unwrap();
        for p in [1.0, 2.0, f64::INFINITY] {
            assert!(rel(modulation_norm(&moved, &g, p).unwrap(), modulation_norm(&f, &g, p).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn symbol_window_shape() {
        let s = spec();
        let torus = s.default_torus();
        let w = symbol_window(s, &torus).unwrap();
        assert_eq!(w.degree_bound(), 12);
        assert!((w.norm_l2() - 1.0).abs() < 1e-14);
        assert!(w.is_nonnegative());
    }

    #[test]
    fn symbol_norms() {
        // a small grid keeps the direct four-loop oracle cheap
        let s = LatticeSpec::with_default_radius(1, 1).unwrap();
        let torus = TorusGrid::new(1, 13).unwrap();
        let window = symbol_window(s, &torus).unwrap();
        let zero = PhaseSpaceField::zeros(s, torus.clone(), 2, 1).unwrap();
        assert_eq!(symbol_modulation_norm(&zero, &window, 2.0).unwrap(), 0.0);
        let sigma = PhaseSpaceField::from_fn(s, torus.clone(), 2, 0, |m, _| {
            if m[0] == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) }
        })
        .unwrap();
        let got = symbol_modulation_norm(&sigma, &window, 2.0).unwrap();
        assert!(rel(got, sigma.norm_l2() * window.norm_l2()) < 1e-12);
        // brute force over (m, ω, ξ, k) for p = 1
        let d = window.degree_bound() as i64;
        let mm = 13usize;
        let mut total = 0.0;
        for m in -2i64..=2 {
            for o in 0..mm {
                for x in 0..mm {
                    for k in -d..=d {
                        let mut v = c(0.0, 0.0);
                        for j in -2i64..=2 {
                            for t in 0..mm {
                                let phase = -2.0 * PI * (j as f64 * x as f64 + t as f64 * k as f64) / mm as f64;
                                let g = window.get(&[j - m], (t + mm - o) % mm);
                                v += Complex64::from_polar(1.0, phase) * sigma.get(&[j], t) * g.conj() / mm as f64;
                            }
                        }
                        total += v.norm() / (mm * mm) as f64;
                    }
                }
            }
        }
        assert!(rel(symbol_modulation_norm(&sigma, &window, 1.0).unwrap(), total) < 1e-12);
    }

    #[test]
    fn embedding_examples() {
        let p = YoungFunction::power(1.5).unwrap();
        let q = YoungFunction::power(3.0).unwrap();
        let cert = embedding_condition((&p, &p), (&q, &q), 1.0, 256).unwrap();
        assert!(cert.holds && cert.constant == 1.0);
        let e = YoungFunction::eq5();
        let sq = YoungFunction::power(2.0).unwrap();
        let cert = embedding_condition((&e, &e), (&sq, &sq), (-2.0f64).exp(), 256).unwrap();
        assert!(cert.holds && cert.constant <= 0.5 + 1e-15, "{cert:?}");
        let cert = embedding_condition((&sq, &sq), (&e, &e), 0.01, 256).unwrap();
        assert!(!cert.holds);
        let cert = embedding_condition((&p, &p), (&e, &e), 0.1, 256).unwrap();
        assert!(cert.holds);
    }
}

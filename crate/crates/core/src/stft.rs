//! The short-time Fourier transform on `Zⁿ`, its adjoint and inversion, and
//! the second-level transform of phase-space fields used for symbol norms.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{sup_norm, Cube, LatticeSpec, PhaseSpaceField, Signal, TorusGrid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `|⟨h, g⟩| ≤ INVERSION_THRESHOLD · ‖h‖‖g‖` refuses to invert.
pub const INVERSION_THRESHOLD: f64 = 1e-12;

/// `V_g f(m, w) = Σ_k f(k) conj(g(k - m)) e^{-2πi w·k}` for `|m|∞ ≤ 2K`.
pub fn stft(f: &Signal, g: &Signal) -> Result<PhaseSpaceField> {
    let torus = f.spec().default_torus();
    stft_on(f, g, &torus, f.spec().max_shift())
}

/// [`stft`] on an explicit torus grid and phase-space radius `≤ 2K`.
pub fn stft_on(f: &Signal, g: &Signal, torus: &TorusGrid, m_radius: usize) -> Result<PhaseSpaceField> {
    let (spec, f_entries) = prepare(f, g, torus, m_radius)?;
    let m_cube = Cube::new(spec.dim(), m_radius);
    let t = torus.len();
    let nodes = torus.multi_indices();
    let mut values = vec![ZERO; m_cube.len() * t];
    values.par_chunks_mut(t).enumerate().for_each(|(mi, slice)| {
        let m = m_cube.point(mi);
        let products = slice_products(&m, &f_entries, g);
        for (j, out) in nodes.iter().zip(slice.iter_mut()) {
            *out = products
                .iter()
                .map(|(k, p)| p * torus.character(k, j).conj())
                .sum();
        }
    });
    PhaseSpaceField::new(spec, torus.clone(), m_radius, spec.support_radius(), values)
}

/// Same values as [`stft_on`], one n-dimensional FFT per lattice slice.
#[cfg(test)]
pub(crate) fn stft_fast(f: &Signal, g: &Signal, torus: &TorusGrid, m_radius: usize) -> Result<PhaseSpaceField> {
    let (spec, f_entries) = prepare(f, g, torus, m_radius)?;
    let m_cube = Cube::new(spec.dim(), m_radius);
    let t = torus.len();
    let mut values = vec![ZERO; m_cube.len() * t];
    values.par_chunks_mut(t).enumerate().for_each(|(mi, slice)| {
        let m = m_cube.point(mi);
        // e^{-2πi w_j·k} only sees k mod M, so folding the products is exact
        for (k, p) in slice_products(&m, &f_entries, g) {
            slice[torus.flat_index(&k)] += p;
        }
        torus.dft(slice);
    });
    PhaseSpaceField::new(spec, torus.clone(), m_radius, spec.support_radius(), values)
}

/// The STFT by folding and one FFT per slice, for any signal on the lattice, admissible or not; the
/// degree bound is the largest `|k|∞` in the support of `h`.
pub(crate) fn stft_unrestricted(h: &Signal, g: &Signal, torus: &TorusGrid, m_radius: usize) -> Result<PhaseSpaceField> {
    let spec = *h.spec();
    if *g.spec() != spec || torus.dim() != spec.dim() {
        return Err(Error::Shape("signal, window and torus disagree".into()));
    }
    let entries = h.support_entries();
    let degree = entries.iter().map(|(k, _)| sup_norm(k) as usize).max().unwrap_or(0);
    let m_cube = Cube::new(spec.dim(), m_radius);
    let t = torus.len();
    let mut values = vec![ZERO; m_cube.len() * t];
    values.par_chunks_mut(t).enumerate().for_each(|(mi, slice)| {
        let m = m_cube.point(mi);
        for (k, p) in slice_products(&m, &entries, g) {
            slice[torus.flat_index(&k)] += p;
        }
        torus.dft(slice);
    });
    PhaseSpaceField::new(spec, torus.clone(), m_radius, degree, values)
}

/// `V_g f` over the whole box `|m|∞ ≤ C` for any signal on the lattice,
/// admissible or not. Used for norms of operator outputs, whose support
/// reaches past `[-K, K]ⁿ`.
pub fn stft_box(f: &Signal, g: &Signal, torus: &TorusGrid) -> Result<PhaseSpaceField> {
    g.require_admissible("window")?;
    if g.is_zero() {
        return Err(Error::Domain("window must be non-zero".into()));
    }
    stft_unrestricted(f, g, torus, f.spec().radius())
}

type Entries = Vec<(Vec<i64>, Complex64)>;

fn prepare(f: &Signal, g: &Signal, torus: &TorusGrid, m_radius: usize) -> Result<(LatticeSpec, Entries)> {
    let spec = *f.spec();
    if *g.spec() != spec {
        return Err(Error::Shape("signal and window live on different lattices".into()));
    }
    if torus.dim() != spec.dim() {
        return Err(Error::Shape("torus and lattice dimensions differ".into()));
    }
    f.require_admissible("signal")?;
    g.require_admissible("window")?;
    if g.is_zero() {
        return Err(Error::Domain("window must be non-zero".into()));
    }
    if m_radius > spec.max_shift() {
        return Err(Error::Range(format!(
            "phase-space radius {m_radius} exceeds 2K={}",
            spec.max_shift()
        )));
    }
    Ok((spec, f.support_entries()))
}

/// `(k, f(k) conj(g(k - m)))` over the support of `f`.
fn slice_products(m: &[i64], f_entries: &Entries, g: &Signal) -> Entries {
    let mut shifted = vec![0i64; m.len()];
    f_entries
        .iter()
        .filter_map(|(k, fk)| {
            for ((s, a), b) in shifted.iter_mut().zip(k).zip(m) {
                *s = a - b;
            }
            let gv = g.get(&shifted);
            (gv != ZERO).then(|| (k.clone(), fk * gv.conj()))
        })
        .collect()
}

/// `V_g* F (k) = Σ_m M⁻ⁿ Σ_j F(m, w_j) e^{2πi w_j·k} g(k - m)`.
///
/// The synthesis integrand at a lattice point `k` with `|k|∞ ≤ R + K` has
/// torus degree at most `degree_bound + R + K`; the call refuses unless the
/// grid integrates that exactly.
pub fn stft_adjoint(field: &PhaseSpaceField, g: &Signal) -> Result<Signal> {
    let spec = *field.spec();
    if *g.spec() != spec {
        return Err(Error::Shape("field and window live on different lattices".into()));
    }
    g.require_admissible("window")?;
    let torus = field.torus();
    let r = field.m_radius();
    if r > spec.max_shift() {
        return Err(Error::Range(format!("phase-space radius {r} exceeds 2K={}", spec.max_shift())));
    }
    let needed = field.degree_bound() + r + spec.support_radius();
    if needed > torus.samples() - 1 {
        return Err(Error::Precision(format!(
            "synthesis needs exact quadrature to degree {needed}, but M={} only reaches {}",
            torus.samples(),
            torus.samples() - 1
        )));
    }
    let m_cube = field.m_cube();
    let g_entries = g.support_entries();
    let w = torus.weight();
    let contributions: Vec<Entries> = (0..m_cube.len())
        .into_par_iter()
        .map(|mi| {
            let slice = field.slice(mi);
            if slice.iter().all(|z| *z == ZERO) {
                return Vec::new();
            }
            let mut coeffs = slice.to_vec();
            torus.idft(&mut coeffs);
            let m = m_cube.point(mi);
            g_entries
                .iter()
                .map(|(l, gl)| {
                    let k: Vec<i64> = l.iter().zip(&m).map(|(a, b)| a + b).collect();
                    let c = coeffs[torus.flat_index(&k)] * w;
                    (k, c * gl)
                })
                .collect()
        })
        .collect();
    let cube = spec.cube();
    let mut values = vec![ZERO; spec.len()];
    for (k, z) in contributions.into_iter().flatten() {
        values[cube.index(&k).expect("translates of admissible windows stay in range")] += z;
    }
    Signal::new(spec, values)
}

/// Inversion formula `f = ⟨h, g⟩⁻¹ V_h* V_g f`.
pub fn invert(field: &PhaseSpaceField, g: &Signal, h: &Signal) -> Result<Signal> {
    if *g.spec() != *h.spec() {
        return Err(Error::Shape("windows live on different lattices".into()));
    }
    let c = h.inner(g);
    if c.norm() <= INVERSION_THRESHOLD * h.norm2() * g.norm2() {
        return Err(Error::Conditioning(format!(
            "|⟨h, g⟩| = {:e} is too small relative to ‖h‖‖g‖ = {:e}",
            c.norm(),
            h.norm2() * g.norm2()
        )));
    }
    Ok(stft_adjoint(field, h)?.scale(c.inv()))
}

/// The STFT of a phase-space field `F` against a window `G`, both on the
/// same lattice and torus grid:
///
/// `V_G F(m, ω, ξ, k) = Σ_j ∫ e^{-2πi j·ξ} e^{-2πi η·k} F(j, η) conj(G(j - m, η - ω)) dη`.
///
/// `m` runs over `[-(r_F + r_G), r_F + r_G]ⁿ` with `r_F`, `r_G` the lattice
/// support radii actually occupied by the fields, so no nonzero value is
/// dropped. `ω` and `ξ` run over the torus grid and `k` over `[-D, D]ⁿ` with
/// `D = deg F + deg G`, which contains every frequency of the η-integrand.
/// Values are flattened with `m` slowest, then `ω`, `ξ`, `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTransform {
    pub window: String,
    torus: TorusGrid,
    m_radius: usize,
    freq_radius: usize,
    values: Vec<Complex64>,
}

impl SymbolTransform {
    pub fn m_radius(&self) -> usize {
        self.m_radius
    }

    /// `D`.
    pub fn freq_radius(&self) -> usize {
        self.freq_radius
    }

    pub fn torus(&self) -> &TorusGrid {
        &self.torus
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn with_window(mut self, id: impl Into<String>) -> Self {
        self.window = id.into();
        self
    }

    /// Value at lattice point `m`, torus nodes `ω`, `ξ` and frequency `k`.
    pub fn get(&self, m: &[i64], omega: usize, xi: usize, k: &[i64]) -> Complex64 {
        let n = self.torus.dim();
        let (Some(mi), Some(ki)) = (
            Cube::new(n, self.m_radius).index(m),
            Cube::new(n, self.freq_radius).index(k),
        ) else {
            return ZERO;
        };
        let t = self.torus.len();
        let kl = Cube::new(n, self.freq_radius).len();
        self.values[((mi * t + omega) * t + xi) * kl + ki]
    }

    /// Counting measure in `m` and `k`, grid quadrature in `ω` and `ξ`.
    pub fn norm_p(&self, p: f64) -> f64 {
        let w = self.torus.weight();
        crate::lattice::lp_norm(self.values.iter().map(|z| z.norm()), w * w, p)
    }
}

struct SymbolPlan<'a> {
    f: &'a PhaseSpaceField,
    g: &'a PhaseSpaceField,
    m_cube: Cube,
    k_cube: Cube,
    f_slices: Vec<usize>,
    nodes: Vec<Vec<i64>>,
}

impl<'a> SymbolPlan<'a> {
    fn new(f: &'a PhaseSpaceField, g: &'a PhaseSpaceField) -> Result<Self> {
        if f.spec() != g.spec() || f.torus() != g.torus() {
            return Err(Error::Shape("field and symbol window live on different grids".into()));
        }
        let torus = f.torus();
        let d = f.degree_bound() + g.degree_bound();
        if 2 * d > torus.samples() - 1 {
            return Err(Error::Precision(format!(
                "degrees {} + {} need M ≥ {}, got M={}",
                f.degree_bound(),
                g.degree_bound(),
                2 * d + 1,
                torus.samples()
            )));
        }
        let n = f.spec().dim();
        let radius = occupied_radius(f) + occupied_radius(g);
        let f_cube = f.m_cube();
        let f_slices = (0..f_cube.len())
            .filter(|&i| f.slice(i).iter().any(|z| *z != ZERO))
            .collect();
        Ok(SymbolPlan {
            f,
            g,
            m_cube: Cube::new(n, radius),
            k_cube: Cube::new(n, d),
            f_slices,
            nodes: torus.multi_indices(),
        })
    }

    fn block_len(&self) -> usize {
        let t = self.f.torus().len();
        t * t * self.k_cube.len()
    }

    /// All `(ω, ξ, k)` values at the lattice point with flat index `mi`.
    fn block(&self, mi: usize) -> Vec<Complex64> {
        let torus = self.f.torus();
        let t = torus.len();
        let kl = self.k_cube.len();
        let ks: Vec<usize> = self.k_cube.points().iter().map(|k| torus.flat_index(k)).collect();
        let m = self.m_cube.point(mi);
        let f_cube = self.f.m_cube();
        let g_cube = self.g.m_cube();
        let pairs: Vec<(usize, usize, usize)> = self
            .f_slices
            .iter()
            .filter_map(|&fi| {
                let j = f_cube.point(fi);
                let shifted: Vec<i64> = j.iter().zip(&m).map(|(a, b)| a - b).collect();
                let gi = g_cube.index(&shifted)?;
                let gs = self.g.slice(gi);
                gs.iter()
                    .any(|z| *z != ZERO)
                    .then(|| (fi, gi, torus.flat_index(&j)))
            })
            .collect();
        let mut out = vec![ZERO; t * t * kl];
        if pairs.is_empty() {
            return out;
        }
        let w = torus.weight();
        let mut product = vec![ZERO; t];
        let mut folded = vec![ZERO; t * kl];
        let mut line = vec![ZERO; t];
        for (o, omega) in self.nodes.iter().enumerate() {
            folded.iter_mut().for_each(|z| *z = ZERO);
            for &(fi, gi, j_mod) in &pairs {
                let fs = self.f.slice(fi);
                let gs = self.g.slice(gi);
                for (ti, eta) in self.nodes.iter().enumerate() {
                    let rotated: Vec<i64> = eta.iter().zip(omega).map(|(a, b)| a - b).collect();
                    product[ti] = fs[ti] * gs[torus.flat_index(&rotated)].conj();
                }
                torus.dft(&mut product);
                for (ki, &kmod) in ks.iter().enumerate() {
                    folded[j_mod * kl + ki] += product[kmod] * w;
                }
            }
            // the ξ-sum over j only sees j mod M, so it is a DFT of the folded rows
            for ki in 0..kl {
                for (s, slot) in line.iter_mut().enumerate() {
                    *slot = folded[s * kl + ki];
                }
                torus.dft(&mut line);
                for (s, v) in line.iter().enumerate() {
                    out[(o * t + s) * kl + ki] = *v;
                }
            }
        }
        out
    }
}

/// Largest `|m|∞` of a nonzero lattice slice.
fn occupied_radius(f: &PhaseSpaceField) -> usize {
    let cube = f.m_cube();
    (0..cube.len())
        .filter(|&i| f.slice(i).iter().any(|z| *z != ZERO))
        .map(|i| sup_norm(&cube.point(i)) as usize)
        .max()
        .unwrap_or(0)
}

/// Materializes the full second-level transform.
pub fn stft_symbol(f: &PhaseSpaceField, g: &PhaseSpaceField) -> Result<SymbolTransform> {
    let plan = SymbolPlan::new(f, g)?;
    let blocks: Vec<Vec<Complex64>> = (0..plan.m_cube.len()).into_par_iter().map(|mi| plan.block(mi)).collect();
    let mut values = Vec::with_capacity(plan.m_cube.len() * plan.block_len());
    blocks.into_iter().for_each(|b| values.extend(b));
    Ok(SymbolTransform {
        window: "field".into(),
        torus: f.torus().clone(),
        m_radius: plan.m_cube.radius(),
        freq_radius: plan.k_cube.radius(),
        values,
    })
}

/// `‖V_G F‖_{L^p}` computed one lattice block at a time, without holding
/// the whole transform.
pub fn stft_symbol_norm(f: &PhaseSpaceField, g: &PhaseSpaceField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("exponent p={p} must be at least 1")));
    }
    let plan = SymbolPlan::new(f, g)?;
    let w = f.torus().weight();
    let partial: Vec<f64> = (0..plan.m_cube.len())
        .into_par_iter()
        .map(|mi| {
            let block = plan.block(mi);
            if p.is_infinite() {
                block.iter().map(|z| z.norm()).fold(0.0, f64::max)
            } else {
                block.iter().map(|z| z.norm().powf(p)).sum()
            }
        })
        .collect();
    Ok(if p.is_infinite() {
        partial.into_iter().fold(0.0, f64::max)
    } else {
        (partial.into_iter().sum::<f64>() * w * w).powf(1.0 / p)
    })
}

/// Ids of the registered checks that exercise this module.
pub const INVARIANTS: &[&str] = &[
    "plancherel",
    "orthogonality",
    "inversion",
    "covariance",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::modulate;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn spec(k: usize) -> LatticeSpec {
        LatticeSpec::with_default_radius(1, k).unwrap()
    }

    fn cis(x: f64) -> Complex64 {
        c(x.cos(), x.sin())
    }

    /// The defining sum with plain trigonometric evaluation.
    fn oracle(f: &Signal, g: &Signal, m: i64, w: f64) -> Complex64 {
        let r = f.spec().radius() as i64;
        (-r..=r)
            .map(|k| f.get(&[k]) * g.get(&[k - m]).conj() * cis(-TAU * w * k as f64))
            .sum()
    }

    fn pseudo_random(spec: LatticeSpec, seed: u64) -> Signal {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        Signal::from_support_fn(spec, |_| c(next(), next()))
    }

    #[test]
    fn delta_examples() {
        let s = spec(2);
        let d0 = Signal::delta(s, &[0]).unwrap();
        let d1 = Signal::delta(s, &[1]).unwrap();
        let f = stft(&d0, &d0).unwrap();
        let torus = f.torus().clone();
        for m in -4..=4 {
            for j in 0..torus.len() {
                let want = if m == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) };
                assert_eq!(f.get(&[m], j), want);
            }
        }
        let f = stft(&d1, &d0).unwrap();
        for m in -4..=4 {
            for j in 0..torus.len() {
                let w = j as f64 / torus.samples() as f64;
                let want = if m == 1 { cis(-TAU * w) } else { c(0.0, 0.0) };
                assert!((f.get(&[m], j) - want).norm() < 1e-15);
            }
        }
        let g = pseudo_random(s, 3).normalized().unwrap();
        let v = stft(&g, &g).unwrap();
        assert!((v.get(&[0], 0) - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn matches_defining_sum() {
        let s = spec(3);
        let f = pseudo_random(s, 1);
        let g = pseudo_random(s, 2);
        let v = stft(&f, &g).unwrap();
        let torus = v.torus().clone();
        for m in -6..=6 {
            for j in 0..torus.len() {
                let w = j as f64 / torus.samples() as f64;
                assert!((v.get(&[m], j) - oracle(&f, &g, m, w)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn fast_path_agrees() {
        for (n, k) in [(1, 8), (2, 2)] {
            let s = LatticeSpec::with_default_radius(n, k).unwrap();
            let torus = s.default_torus();
            let mut state = 7u64;
            let mut next = move || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            };
            let f = Signal::from_support_fn(s, |_| c(next(), next()));
            let g = Signal::from_support_fn(s, |_| c(next(), next()));
            let a = stft_on(&f, &g, &torus, 2 * k).unwrap();
            let b = stft_fast(&f, &g, &torus, 2 * k).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).norm() <= 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn adjoint_examples() {
        let s = spec(2);
        let d0 = Signal::delta(s, &[0]).unwrap();
        let d1 = Signal::delta(s, &[1]).unwrap();
        let back = stft_adjoint(&stft(&d0, &d0).unwrap(), &d0).unwrap();
        assert!(back.sub(&d0).norm2() < 1e-15);
        let zero = PhaseSpaceField::zeros(s, s.default_torus(), 4, 2).unwrap();
        assert!(stft_adjoint(&zero, &d0).unwrap().is_zero());
        let back = invert(&stft(&d1, &d0).unwrap(), &d0, &d0).unwrap();
        assert!(back.sub(&d1).norm2() < 1e-15);
    }

    #[test]
    fn adjoint_refuses_coarse_grid() {
        let s = spec(4);
        let f = pseudo_random(s, 5);
        let coarse = TorusGrid::new(1, 9).unwrap();
        let v = stft_on(&f, &f, &coarse, 8).unwrap();
        assert!(matches!(stft_adjoint(&v, &f), Err(Error::Precision(_))));
    }

    #[test]
    fn inversion_scales_by_pairing() {
        let s = spec(4);
        let f = pseudo_random(s, 11);
        let g = pseudo_random(s, 12).normalized().unwrap();
        let v = stft(&f, &g).unwrap();
        let same = invert(&v, &g, &g).unwrap();
        assert!(same.sub(&f).norm2() <= 1e-12 * f.norm2());
        let h = g.scale(c(2.0, 0.0));
        assert!((h.inner(&g) - c(2.0, 0.0)).norm() < 1e-14);
        let twice = invert(&v, &g, &h).unwrap();
        assert!(twice.sub(&f).norm2() <= 1e-12 * f.norm2());
        let d0 = Signal::delta(s, &[0]).unwrap();
        let d1 = Signal::delta(s, &[1]).unwrap();
        assert!(matches!(invert(&stft(&f, &d0).unwrap(), &d0, &d1), Err(Error::Conditioning(_))));
    }

    #[test]
    fn covariance_on_grid() {
        let s = spec(6);
        let f = Signal::from_support_fn(s, |p| if p[0].abs() <= 3 { c(p[0] as f64, 1.0) } else { c(0.0, 0.0) });
        let g = pseudo_random(s, 2);
        let torus = s.default_torus();
        let (tau, nu) = (2i64, 5usize);
        let moved = modulate(&crate::lattice::translate(&f, &[tau]).unwrap(), &[nu as f64 / torus.samples() as f64]).unwrap();
        let a = stft(&moved, &g).unwrap();
        let b = stft(&f, &g).unwrap();
        for m in -12..=12i64 {
            for j in 0..torus.len() {
                let lhs = a.get(&[m], j).norm();
                let rhs = b.get(&[m - tau], (j + torus.len() - nu) % torus.len()).norm();
                assert!((lhs - rhs).abs() <= 1e-12);
            }
        }
    }

    fn tiny_field(spec: LatticeSpec, torus: &TorusGrid, radius: usize, degree: usize, seed: u64) -> PhaseSpaceField {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let d = degree as i64;
        let cube = Cube::new(1, radius);
        let coeffs: Vec<Vec<Complex64>> = (0..cube.len())
            .map(|_| (-d..=d).map(|_| c(next(), next())).collect())
            .collect();
        PhaseSpaceField::from_fn(spec, torus.clone(), radius, degree, |m, w| {
            let row = &coeffs[cube.index(m).unwrap()];
            (-d..=d).zip(row).map(|(e, a)| a * cis(TAU * e as f64 * w[0])).sum()
        })
        .unwrap()
    }

    /// Four nested loops over the displayed formula.
    fn symbol_oracle(f: &PhaseSpaceField, g: &PhaseSpaceField, m: i64, omega: f64, xi: f64, k: i64) -> Complex64 {
        let torus = f.torus();
        let r = f.m_radius() as i64;
        let mm = torus.samples();
        let mut total = c(0.0, 0.0);
        for j in -r..=r {
            for t in 0..mm {
                let eta = t as f64 / mm as f64;
                let rot = (t + mm - (omega * mm as f64).round() as usize) % mm;
                let gv = g.get(&[j - m], rot);
                total += cis(-TAU * (j as f64 * xi + eta * k as f64)) * f.get(&[j], t) * gv.conj() / mm as f64;
            }
        }
        total
    }

    #[test]
    fn symbol_transform_matches_direct_sum() {
        let s = spec(2);
        let torus = TorusGrid::new(1, 13).unwrap();
        let f = tiny_field(s, &torus, 2, 2, 1);
        let g = tiny_field(s, &torus, 1, 1, 2);
        let v = stft_symbol(&f, &g).unwrap();
        assert_eq!(v.m_radius(), 3);
        assert_eq!(v.freq_radius(), 3);
        let mm = torus.samples();
        for m in -3..=3 {
            for o in (0..mm).step_by(3) {
                for x in (0..mm).step_by(4) {
                    for k in -3..=3 {
                        let want = symbol_oracle(&f, &g, m, o as f64 / mm as f64, x as f64 / mm as f64, k);
                        assert!((v.get(&[m], o, x, &[k]) - want).norm() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn symbol_transform_examples() {
        let s = spec(2);
        let torus = TorusGrid::new(1, 13).unwrap();
        let zero = PhaseSpaceField::zeros(s, torus.clone(), 2, 2).unwrap();
        let g = tiny_field(s, &torus, 1, 1, 9);
        assert!(stft_symbol(&zero, &g).unwrap().values().iter().all(|z| *z == c(0.0, 0.0)));
        let unit = PhaseSpaceField::from_fn(s, torus.clone(), 2, 0, |m, _| {
            if m[0] == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) }
        })
        .unwrap();
        let v = stft_symbol(&unit, &unit).unwrap();
        for o in 0..13 {
            for x in 0..13 {
                assert!((v.get(&[0], o, x, &[0]) - c(1.0, 0.0)).norm() < 1e-15);
            }
        }
        assert!((v.norm_p(2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symbol_transform_refuses_high_degree() {
        let s = spec(2);
        let torus = TorusGrid::new(1, 13).unwrap();
        let f = tiny_field(s, &torus, 1, 4, 1);
        let g = tiny_field(s, &torus, 1, 3, 2);
        assert!(matches!(stft_symbol(&f, &g), Err(Error::Precision(_))));
    }

    #[test]
    fn streamed_norms_match_materialized() {
        let s = spec(2);
        let torus = TorusGrid::new(1, 13).unwrap();
        let f = tiny_field(s, &torus, 2, 2, 4);
        let g = tiny_field(s, &torus, 1, 1, 5);
        let v = stft_symbol(&f, &g).unwrap();
        for p in [1.0, 2.0, 3.0, f64::INFINITY] {
            let a = v.norm_p(p);
            let b = stft_symbol_norm(&f, &g, p).unwrap();
            assert!((a - b).abs() <= 1e-12 * a);
        }
        let plancherel = f.norm_l2() * g.norm_l2();
        assert!((v.norm_p(2.0) - plancherel).abs() <= 1e-12 * plancherel);
    }

    fn admissible(k: usize) -> impl Strategy<Value = Signal> {
        let s = spec(k);
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2 * k + 1).prop_map(move |v| {
            let mut it = v.into_iter();
            Signal::from_support_fn(s, |_| {
                let (a, b) = it.next().unwrap();
                c(a, b)
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn orthogonality(f1 in admissible(4), f2 in admissible(4), g1 in admissible(4), g2 in admissible(4)) {
            prop_assume!(!g1.is_zero() && !g2.is_zero());
            let lhs = stft(&f1, &g1).unwrap().inner(&stft(&f2, &g2).unwrap()).unwrap();
            let rhs = f1.inner(&f2) * g2.inner(&g1);
            let scale = f1.norm2() * f2.norm2() * g1.norm2() * g2.norm2();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * scale);
        }

        #[test]
        fn plancherel_and_round_trip(f in admissible(4), g in admissible(4)) {
            prop_assume!(g.norm2() > 1e-3);
            let v = stft(&f, &g).unwrap();
            prop_assert!((v.norm_l2() - f.norm2() * g.norm2()).abs() <= 1e-12 * (1.0 + f.norm2() * g.norm2()));
            let back = invert(&v, &g, &g).unwrap();
            prop_assert!(back.sub(&f).norm2() <= 1e-10 * (1.0 + f.norm2()));
        }
    }
}

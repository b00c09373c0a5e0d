//! Luxemburg norms on the lattice, the torus grid and phase space, the two
//! mixed norms, phase-space convolution and the Hölder pairing.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{Cube, PhaseSpaceField, Signal};
use crate::young::YoungFunction;

/// Bisection stops once the bracket is this tight relative to its top.
pub const BISECTION_TOLERANCE: f64 = 1e-14;
const MAX_BISECTIONS: usize = 200;
const MAX_RESCALES: usize = 2100;

/// Uniform weight carried by every entry of a value array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measure {
    /// Weight 1 per lattice point.
    Counting,
    /// Weight `1/nodes` per torus grid node.
    Quadrature { nodes: usize },
    /// Lattice × torus: weight `1/nodes` per `(m, w_j)`.
    Product { nodes: usize },
}

impl Measure {
    pub fn weight(&self) -> f64 {
        match self {
            Measure::Counting => 1.0,
            Measure::Quadrature { nodes } | Measure::Product { nodes } => 1.0 / *nodes as f64,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Measure::Quadrature { nodes: 0 } | Measure::Product { nodes: 0 } => {
                Err(Error::Domain("quadrature measure needs at least one node".into()))
            }
            _ => Ok(()),
        }
    }
}

/// `G(b) = Σ wᵢ Φ(vᵢ / b)`.
pub fn modular(values: &[f64], weight: f64, phi: &YoungFunction, b: f64) -> f64 {
    values.iter().map(|&v| phi.value(v / b)).sum::<f64>() * weight
}

/// `inf{b > 0 : Σ wᵢ Φ(vᵢ/b) ≤ 1}` by bracketed bisection.
///
/// `b_hi` starts at `Σ wᵢvᵢ + max vᵢ` and doubles until `G(b_hi) ≤ 1`;
/// `b_lo` halves down from `b_hi` until `G(b_lo) ≥ 1`. Bisection then runs
/// until the bracket is relatively `1e-14` wide, so the midpoint `b*`
/// satisfies `G(b*(1+1e-12)) ≤ 1 ≤ G(b*(1-1e-12))`.
pub fn luxemburg(values: &[f64], measure: Measure, phi: &YoungFunction) -> Result<f64> {
    measure.validate()?;
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Domain(format!("Luxemburg norm needs finite non-negative values, got {v}")));
    }
    let max = values.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(0.0);
    }
    let w = measure.weight();
    let g = |b: f64| modular(values, w, phi, b);
    let mut hi = values.iter().sum::<f64>() * w + max;
    let mut steps = 0;
    while g(hi) > 1.0 {
        hi *= 2.0;
        steps += 1;
        if steps > MAX_RESCALES || !hi.is_finite() {
            return Err(Error::Unbounded("Luxemburg bracket did not close from above".into()));
        }
    }
    let mut lo = hi;
    steps = 0;
    while g(lo) < 1.0 {
        lo *= 0.5;
        steps += 1;
        if steps > MAX_RESCALES || lo == 0.0 {
            return Err(Error::Unbounded("Luxemburg bracket did not close from below".into()));
        }
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= BISECTION_TOLERANCE * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `‖f‖_{ℓ^Φ}`.
pub fn lattice_norm(f: &Signal, phi: &YoungFunction) -> Result<f64> {
    let v: Vec<f64> = f.values().iter().map(|z| z.norm()).collect();
    luxemburg(&v, Measure::Counting, phi)
}

/// `‖F‖_{L^Φ}` over the product measure on phase space.
pub fn product_norm(field: &PhaseSpaceField, phi: &YoungFunction) -> Result<f64> {
    let v: Vec<f64> = field.values().iter().map(|z| z.norm()).collect();
    luxemburg(&v, Measure::Product { nodes: field.torus().len() }, phi)
}

/// `‖F‖_{L^{Φ₁,Φ₂}}`: the lattice norm with `Φ₁` at every torus node,
/// followed by the torus norm with `Φ₂` of the resulting function.
pub fn mixed_norm(field: &PhaseSpaceField, phi1: &YoungFunction, phi2: &YoungFunction) -> Result<f64> {
    let t = field.torus().len();
    let slices = field.m_cube().len();
    let inner: Vec<f64> = (0..t)
        .into_par_iter()
        .map(|j| {
            let column: Vec<f64> = (0..slices).map(|mi| field.values()[mi * t + j].norm()).collect();
            luxemburg(&column, Measure::Counting, phi1)
        })
        .collect::<Result<_>>()?;
    luxemburg(&inner, Measure::Quadrature { nodes: t }, phi2)
}

/// `‖F‖_{L_*^{Φ₁,Φ₂}} = ‖G‖_{L^{Φ₂,Φ₁}(Tⁿ × Zⁿ)}` with `G(w, m) = F(m, w)`:
/// the torus norm with `Φ₂` of every lattice slice, followed by the
/// lattice norm with `Φ₁`.
pub fn mixed_norm_swapped(field: &PhaseSpaceField, phi1: &YoungFunction, phi2: &YoungFunction) -> Result<f64> {
    let t = field.torus().len();
    let inner: Vec<f64> = (0..field.m_cube().len())
        .into_par_iter()
        .map(|mi| {
            let row: Vec<f64> = field.slice(mi).iter().map(|z| z.norm()).collect();
            luxemburg(&row, Measure::Quadrature { nodes: t }, phi2)
        })
        .collect::<Result<_>>()?;
    luxemburg(&inner, Measure::Counting, phi1)
}

/// `(F * G)(m, w) = Σ_l ∫ F(l, x) G(m - l, w - x) dx` on `Zⁿ × Tⁿ`.
///
/// The torus convolution multiplies the grid Fourier coefficients of the
/// slices, which is exact when each field's degree fits the grid
/// (`2·deg ≤ M - 1`). The result has lattice radius `r_F + r_G` and
/// torus degree `min(deg F, deg G)`.
pub fn convolve_phase_space(f: &PhaseSpaceField, g: &PhaseSpaceField) -> Result<PhaseSpaceField> {
    if f.spec() != g.spec() || f.torus() != g.torus() {
        return Err(Error::Shape("convolution factors live on different grids".into()));
    }
    let torus = f.torus();
    let spec = *f.spec();
    for (name, field) in [("first", f), ("second", g)] {
        if 2 * field.degree_bound() > torus.samples() - 1 {
            return Err(Error::Precision(format!(
                "{name} factor has degree {} but M={} only resolves degree {}",
                field.degree_bound(),
                torus.samples(),
                torus.max_exact_degree()
            )));
        }
    }
    let radius = f.m_radius() + g.m_radius();
    if radius > spec.radius() {
        return Err(Error::Range(format!(
            "convolution support radius {radius} exceeds the computation radius {}",
            spec.radius()
        )));
    }
    let coeffs = |field: &PhaseSpaceField| -> Vec<Vec<Complex64>> {
        (0..field.m_cube().len())
            .into_par_iter()
            .map(|mi| {
                let s = field.slice(mi);
                if s.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
                    Vec::new()
                } else {
                    torus.coefficients(s)
                }
            })
            .collect()
    };
    let (cf, cg) = (coeffs(f), coeffs(g));
    let (f_cube, g_cube) = (f.m_cube(), g.m_cube());
    let out_cube = Cube::new(spec.dim(), radius);
    let t = torus.len();
    let slices: Vec<Vec<Complex64>> = (0..out_cube.len())
        .into_par_iter()
        .map(|oi| {
            let m = out_cube.point(oi);
            let mut acc = vec![Complex64::new(0.0, 0.0); t];
            for (li, a) in cf.iter().enumerate() {
                if a.is_empty() {
                    continue;
                }
                let l = f_cube.point(li);
                let diff: Vec<i64> = m.iter().zip(&l).map(|(x, y)| x - y).collect();
                let Some(gi) = g_cube.index(&diff) else { continue };
                let b = &cg[gi];
                if b.is_empty() {
                    continue;
                }
                for ((s, x), y) in acc.iter_mut().zip(a).zip(b) {
                    *s += x * y;
                }
            }
            torus.synthesize(&acc)
        })
        .collect();
    let values = slices.into_iter().flatten().collect();
    PhaseSpaceField::new(spec, torus.clone(), radius, f.degree_bound().min(g.degree_bound()), values)
}

/// `‖F G‖_{L¹} = Σ_m M⁻ⁿ Σ_j |F(m, w_j) G(m, w_j)|`.
pub fn holder_pairing(f: &PhaseSpaceField, g: &PhaseSpaceField) -> Result<f64> {
    f.require_same_grid(g)?;
    let s: f64 = f.values().iter().zip(g.values()).map(|(a, b)| (a * b).norm()).sum();
    Ok(s * f.torus().weight())
}

/// Ids of the registered checks that exercise this module.
pub const INVARIANTS: &[&str] = &[
    "luxemburg_power",
    "luxemburg_bracket",
    "norm_axioms",
    "holder_single",
    "holder_mixed",
    "convolution_mixed",
    "convolution_product",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeSpec, TorusGrid};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn power(p: f64) -> YoungFunction {
        YoungFunction::power(p).unwrap()
    }

    /// Lehmer-style generator for deterministic test data.
    fn numbers(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed.wrapping_add(0x9E3779B97F4A7C15);
        move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        }
    }

    fn random_field(radius: usize, m: usize, seed: u64) -> PhaseSpaceField {
        let spec = LatticeSpec::with_default_radius(1, 4).unwrap();
        let torus = TorusGrid::new(1, m).unwrap();
        let mut next = numbers(seed);
        PhaseSpaceField::from_fn(spec, torus, radius, 0, |_, _| c(next(), next())).unwrap()
    }

    #[test]
    fn luxemburg_examples() {
        let sq = power(2.0);
        assert_eq!(luxemburg(&[0.0, 0.0], Measure::Counting, &sq).unwrap(), 0.0);
        assert!(rel(luxemburg(&[3.0, 4.0], Measure::Counting, &sq).unwrap(), 5.0) < 1e-13);
        // one atom: 1/b with Φ(1/b) = 1 on the quadratic tail
        let want = 1.0 / (1.0 - 0.5 * (-3.0f64).exp()).sqrt();
        let got = luxemburg(&[1.0], Measure::Counting, &YoungFunction::eq5()).unwrap();
        assert!(rel(got, want) < 1e-13);
        assert!((got - 1.01268).abs() < 1e-5);
        assert!(luxemburg(&[f64::NAN], Measure::Counting, &sq).is_err());
        assert!(luxemburg(&[-1.0], Measure::Counting, &sq).is_err());
    }

    #[test]
    fn power_reduction_and_bracket() {
        let mut next = numbers(3);
        let v: Vec<f64> = (0..40).map(|_| next().abs() * 10.0).collect();
        for p in [1.0, 1.5, 2.0, 3.0] {
            for measure in [Measure::Counting, Measure::Quadrature { nodes: 40 }] {
                let w = measure.weight();
                let want = (v.iter().map(|x| x.powf(p)).sum::<f64>() * w).powf(1.0 / p);
                let b = luxemburg(&v, measure, &power(p)).unwrap();
                assert!(rel(b, want) < 1e-12, "p={p}");
                let phi = power(p);
                assert!(modular(&v, w, &phi, b * (1.0 + 1e-12)) <= 1.0);
                assert!(modular(&v, w, &phi, b * (1.0 - 1e-12)) >= 1.0);
            }
        }
    }

    #[test]
    fn mixed_power_norms_match_oracle() {
        let f = random_field(3, 11, 5);
        let t = f.torus().len();
        let slices = f.m_cube().len();
        for (p, q) in [(1.0, 2.0), (2.0, 1.5), (3.0, 3.0)] {
            let inner: Vec<f64> = (0..t)
                .map(|j| (0..slices).map(|mi| f.values()[mi * t + j].norm().powf(p)).sum::<f64>().powf(1.0 / p))
                .collect();
            let want = (inner.iter().map(|x| x.powf(q)).sum::<f64>() / t as f64).powf(1.0 / q);
            assert!(rel(mixed_norm(&f, &power(p), &power(q)).unwrap(), want) < 1e-9);
            let inner: Vec<f64> = (0..slices)
                .map(|mi| (f.slice(mi).iter().map(|z| z.norm().powf(q)).sum::<f64>() / t as f64).powf(1.0 / q))
                .collect();
            let want = inner.iter().map(|x| x.powf(p)).sum::<f64>().powf(1.0 / p);
            assert!(rel(mixed_norm_swapped(&f, &power(p), &power(q)).unwrap(), want) < 1e-9);
        }
    }

    #[test]
    fn separable_fields_factor() {
        let spec = LatticeSpec::with_default_radius(1, 4).unwrap();
        let torus = TorusGrid::new(1, 9).unwrap();
        let a = |m: i64| c(1.0 + m as f64 * 0.3, -0.2 * m as f64);
        let b = |w: f64| 0.5 + (6.0 * w).sin().abs();
        let f = PhaseSpaceField::from_fn(spec, torus.clone(), 2, 0, |m, w| a(m[0]) * b(w[0])).unwrap();
        let e = YoungFunction::eq5();
        let sq = power(2.0);
        let av: Vec<f64> = (-2..=2).map(|m| a(m).norm()).collect();
        let bv: Vec<f64> = (0..9).map(|j| b(j as f64 / 9.0)).collect();
        let na = luxemburg(&av, Measure::Counting, &e).unwrap();
        let nb = luxemburg(&bv, Measure::Quadrature { nodes: 9 }, &sq).unwrap();
        assert!(rel(mixed_norm(&f, &e, &sq).unwrap(), na * nb) < 1e-12);
        assert!(rel(mixed_norm_swapped(&f, &e, &sq).unwrap(), na * nb) < 1e-12);
        let zero = PhaseSpaceField::zeros(spec, torus, 2, 0).unwrap();
        assert_eq!(mixed_norm(&zero, &e, &sq).unwrap(), 0.0);
        assert_eq!(mixed_norm_swapped(&zero, &e, &sq).unwrap(), 0.0);
    }

    #[test]
    fn convolution_examples() {
        let spec = LatticeSpec::with_default_radius(1, 4).unwrap();
        let torus = TorusGrid::new(1, 9).unwrap();
        let mut next = numbers(8);
        let coeffs: Vec<[Complex64; 5]> = (0..5).map(|_| std::array::from_fn(|_| c(next(), next()))).collect();
        let g = PhaseSpaceField::from_fn(spec, torus.clone(), 2, 2, |m, w| {
            let row = &coeffs[(m[0] + 2) as usize];
            (-2..=2)
                .zip(row)
                .map(|(d, a)| a * Complex64::from_polar(1.0, std::f64::consts::TAU * d as f64 * w[0]))
                .sum()
        })
        .unwrap();
        let unit = PhaseSpaceField::from_fn(spec, torus.clone(), 0, 0, |_, _| c(1.0, 0.0)).unwrap();
        let out = convolve_phase_space(&unit, &g).unwrap();
        for mi in 0..5 {
            let mean: Complex64 = g.slice(mi).iter().sum::<Complex64>() / 9.0;
            for z in out.slice(mi) {
                assert!((z - mean).norm() < 1e-14);
            }
        }
        // Dirichlet kernel of degree (M-1)/2 is M at the origin node and 0 elsewhere
        let dirichlet = PhaseSpaceField::from_fn(spec, torus.clone(), 0, 4, |_, w| {
            c((-4..=4).map(|d| (std::f64::consts::TAU * d as f64 * w[0]).cos()).sum(), 0.0)
        })
        .unwrap();
        let out = convolve_phase_space(&dirichlet, &g).unwrap();
        for (x, y) in out.values().iter().zip(g.values()) {
            assert!((x - y).norm() < 1e-13);
        }
        let zero = PhaseSpaceField::zeros(spec, torus.clone(), 1, 0).unwrap();
        assert!(convolve_phase_space(&zero, &zero).unwrap().values().iter().all(|z| z.norm() == 0.0));
        let big = PhaseSpaceField::zeros(spec, torus, 8, 0).unwrap();
        assert!(matches!(convolve_phase_space(&big, &big), Err(Error::Range(_))));
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let f = random_field(1, 7, 1);
        let g = random_field(2, 7, 2);
        let out = convolve_phase_space(&f, &g).unwrap();
        for m in -3..=3i64 {
            for j in 0..7usize {
                let mut want = c(0.0, 0.0);
                for l in -1..=1i64 {
                    for x in 0..7usize {
                        want += f.get(&[l], x) * g.get(&[m - l], (j + 7 - x) % 7) / 7.0;
                    }
                }
                assert!((out.get(&[m], j) - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn holder_pairing_examples() {
        let spec = LatticeSpec::with_default_radius(1, 4).unwrap();
        let torus = TorusGrid::new(1, 9).unwrap();
        let one = PhaseSpaceField::from_fn(spec, torus.clone(), 2, 0, |m, _| {
            if m[0] == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) }
        })
        .unwrap();
        assert!(rel(holder_pairing(&one, &one).unwrap(), 1.0) < 1e-15);
        let zero = PhaseSpaceField::zeros(spec, torus, 2, 0).unwrap();
        assert_eq!(holder_pairing(&one, &zero).unwrap(), 0.0);
        let f = random_field(2, 9, 4);
        let f = f.scale(c(1.0 / f.norm_l2(), 0.0));
        assert!(rel(holder_pairing(&f, &f).unwrap(), 1.0) < 1e-14);
    }

    fn field_strategy() -> impl Strategy<Value = PhaseSpaceField> {
        proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 5 * 7).prop_map(|v| {
            let spec = LatticeSpec::with_default_radius(1, 4).unwrap();
            let torus = TorusGrid::new(1, 7).unwrap();
            let values = v.into_iter().map(|(a, b)| c(a, b)).collect();
            PhaseSpaceField::new(spec, torus, 2, 0, values).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn norm_axioms(f in field_strategy(), g in field_strategy(), s in 0.01f64..10.0) {
            let e = YoungFunction::eq5();
            let sq = power(2.0);
            let norms: [&dyn Fn(&PhaseSpaceField) -> f64; 3] = [
                &|x| product_norm(x, &e).unwrap(),
                &|x| mixed_norm(x, &e, &sq).unwrap(),
                &|x| mixed_norm_swapped(x, &sq, &e).unwrap(),
            ];
            for norm in norms {
                let scaled = norm(&f.scale(c(0.0, -s)));
                prop_assert!((scaled - s * norm(&f)).abs() <= 1e-9 * s * norm(&f));
                prop_assert!(norm(&f.add(&g).unwrap()) <= norm(&f) + norm(&g) + 1e-9);
                let smaller = f.map(|z| z * 0.5);
                prop_assert!(norm(&smaller) <= norm(&f) + 1e-12);
            }
        }
    }
}

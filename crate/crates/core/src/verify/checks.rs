//! The registered checks. Each one draws its inputs from the trial stream and
//! returns a margin; see the module docs of `verify` for the convention.

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;

use super::ensemble::{
    complex_normal, draw, gaussian_signal, indicator_symbol, rank_one_symbol, trig_symbol, unit_signal, EnsembleKind,
    TrialRng,
};
use super::Environment;
use crate::error::{Error, Result};
use crate::lattice::{modulate, translate, Cube, PhaseSpaceField, Signal};
use crate::locop::{
    self, adjoint_kernel, grid_kernel, kernel, schatten_norm, sigma_tilde_with, singular_values, symbol_parts,
};
use crate::modulation::{embedding_condition, modulation_norm, symbol_window, symbol_modulation_norm, WindowSpec};
use crate::orlicz::{
    convolve_phase_space, holder_pairing, lattice_norm, luxemburg, mixed_norm, modular, product_norm, Measure,
};
use crate::stft::{invert, stft_box, stft_on};
use crate::young::{complementary, YoungFunction};

pub(crate) struct Trial {
    pub margin: f64,
    pub tier: Option<&'static str>,
    pub notes: Vec<(&'static str, f64)>,
}

impl Trial {
    fn margin(margin: f64) -> Self {
        Trial { margin, tier: None, notes: Vec::new() }
    }

    fn tier(mut self, tier: &'static str) -> Self {
        self.tier = Some(tier);
        self
    }

    fn note(mut self, key: &'static str, value: f64) -> Self {
        self.notes.push((key, value));
        self
    }
}

type CheckFn = fn(&Ctx, &mut TrialRng, usize) -> Result<Trial>;

/// A registered check: its stable id, owning module, defaults, and the
/// ensembles it accepts (the first is the default).
pub struct CheckDef {
    pub id: &'static str,
    pub module: &'static str,
    pub trials: usize,
    pub tolerance: f64,
    pub ensembles: &'static [EnsembleKind],
    pub(crate) run: CheckFn,
}

pub(crate) struct Ctx<'a> {
    env: &'a Environment,
    ensemble: Option<EnsembleKind>,
    bounds: OnceLock<std::result::Result<WindowNorms, String>>,
}

impl<'a> Ctx<'a> {
    pub(crate) fn new(env: &'a Environment, ensemble: Option<EnsembleKind>) -> Self {
        Ctx { env, ensemble, bounds: OnceLock::new() }
    }

    fn signal(&self, rng: &mut TrialRng) -> Signal {
        gaussian_signal(self.env, rng)
    }

    fn unit(&self, rng: &mut TrialRng) -> Signal {
        unit_signal(self.env, rng)
    }

    /// A symbol from the selected ensemble.
    fn symbol(&self, rng: &mut TrialRng) -> Result<PhaseSpaceField> {
        let kind = self.ensemble.unwrap_or(EnsembleKind::TrigSymbol);
        Ok(draw(kind, self.env, rng)?.into_field().expect("symbol ensembles yield fields"))
    }

    /// A real symbol: the real part of a trigonometric symbol, or a draw
    /// from a nonnegative ensemble when one is selected.
    fn real_symbol(&self, rng: &mut TrialRng) -> Result<PhaseSpaceField> {
        match self.ensemble {
            Some(EnsembleKind::IndicatorSymbol) => indicator_symbol(self.env, rng),
            Some(EnsembleKind::RankOneSymbol) => self.square_symbol(rng),
            _ => trig_symbol(self.env, rng, true),
        }
    }

    /// A nonnegative symbol; without an override, even trials use the
    /// indicator ensemble and odd trials `|V_g u|²`.
    fn positive_symbol(&self, rng: &mut TrialRng, trial: usize) -> Result<PhaseSpaceField> {
        match self.ensemble {
            Some(EnsembleKind::IndicatorSymbol) => indicator_symbol(self.env, rng),
            Some(EnsembleKind::RankOneSymbol) => self.square_symbol(rng),
            _ if trial.is_multiple_of(2) => indicator_symbol(self.env, rng),
            _ => self.square_symbol(rng),
        }
    }

    fn square_symbol(&self, rng: &mut TrialRng) -> Result<PhaseSpaceField> {
        let u = self.unit(rng);
        rank_one_symbol(self.env, &u, &u)
    }

    fn constant(&self, value: Complex64) -> Result<PhaseSpaceField> {
        let spec = self.env.spec;
        PhaseSpaceField::from_fn(spec, self.env.torus.clone(), spec.max_shift(), 0, |_, _| value)
    }

    /// A grid function on `|m|∞ ≤ radius` with i.i.d. complex normal samples.
    fn grid_field(&self, rng: &mut TrialRng, radius: usize) -> Result<PhaseSpaceField> {
        let spec = self.env.spec;
        let torus = &self.env.torus;
        let len = Cube::new(spec.dim(), radius).len() * torus.len();
        let values = (0..len).map(|_| complex_normal(rng)).collect();
        PhaseSpaceField::new(spec, torus.clone(), radius, torus.samples() - 1, values)
    }

    /// A field on `|m|∞ ≤ radius` whose slices are trigonometric polynomials
    /// of degree `K`.
    fn trig_field(&self, rng: &mut TrialRng, radius: usize) -> Result<PhaseSpaceField> {
        let full = trig_symbol(self.env, rng, false)?;
        let spec = self.env.spec;
        let cube = Cube::new(spec.dim(), radius);
        let t = self.env.torus.len();
        let mut values = Vec::with_capacity(cube.len() * t);
        for m in cube.points() {
            values.extend((0..t).map(|j| full.get(&m, j)));
        }
        PhaseSpaceField::new(spec, self.env.torus.clone(), radius, spec.support_radius(), values)
    }

    fn stft(&self, f: &Signal, g: &Signal) -> Result<PhaseSpaceField> {
        stft_on(f, g, &self.env.torus, self.env.spec.max_shift())
    }

    fn window_norms(&self) -> Result<&WindowNorms> {
        self.bounds
            .get_or_init(|| WindowNorms::new(self.env).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::Numeric(e.clone()))
    }
}

/// `(RHS - LHS)/RHS`; for `RHS = 0` zero when `LHS ≤ 0`, else the most
/// negative margin.
fn ineq(lhs: f64, rhs: f64) -> f64 {
    if lhs.is_nan() || rhs.is_nan() {
        -f64::MAX
    } else if rhs > 0.0 {
        (rhs - lhs) / rhs
    } else if lhs <= 0.0 {
        0.0
    } else {
        -f64::MAX
    }
}

/// `-|deviation|/scale`.
fn deviation(diff: f64, scale: f64) -> f64 {
    if !diff.is_finite() || !scale.is_finite() {
        -f64::MAX
    } else if scale > 0.0 {
        -diff.abs() / scale
    } else if diff == 0.0 {
        0.0
    } else {
        -f64::MAX
    }
}

fn worst(margins: impl IntoIterator<Item = f64>) -> f64 {
    margins.into_iter().fold(f64::INFINITY, |a, b| if b.is_nan() { -f64::MAX } else { a.min(b) })
}

fn log_uniform(rng: &mut TrialRng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo..hi))
}

fn power(p: f64) -> YoungFunction {
    YoungFunction::power(p).expect("registered exponents are at least 1")
}

fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

fn scaled(f: &Signal, c: f64) -> Signal {
    f.scale(Complex64::new(c, 0.0))
}

fn abs_values(f: &Signal) -> Vec<f64> {
    f.values().iter().map(|z| z.norm()).collect()
}

const SIGNAL: &[EnsembleKind] = &[EnsembleKind::GaussianSignal];
const SYMBOL: &[EnsembleKind] = &[EnsembleKind::TrigSymbol, EnsembleKind::RankOneSymbol, EnsembleKind::IndicatorSymbol];
const POSITIVE: &[EnsembleKind] = &[EnsembleKind::IndicatorSymbol, EnsembleKind::RankOneSymbol];
const NONE: &[EnsembleKind] = &[];

const fn def(
    id: &'static str,
    module: &'static str,
    trials: usize,
    tolerance: f64,
    ensembles: &'static [EnsembleKind],
    run: CheckFn,
) -> CheckDef {
    CheckDef { id, module, trials, tolerance, ensembles, run }
}

static REGISTRY: [CheckDef; 32] = [
    def("plancherel", "stft", 100, 1e-10, SIGNAL, plancherel),
    def("orthogonality", "stft", 100, 1e-10, SIGNAL, orthogonality),
    def("inversion", "stft", 100, 1e-10, SIGNAL, inversion),
    def("covariance", "stft", 100, 1e-12, SIGNAL, covariance),
    def("young_conjugate_power", "young", 100, 1e-8, NONE, young_conjugate_power),
    def("young_biconjugate", "young", 100, 0.0, NONE, young_biconjugate),
    def("eq5_convexity", "young", 100, 1e-12, NONE, eq5_convexity),
    def("luxemburg_power", "orlicz", 100, 1e-9, SIGNAL, luxemburg_power),
    def("luxemburg_bracket", "orlicz", 100, 0.0, SIGNAL, luxemburg_bracket),
    def("norm_axioms", "orlicz", 100, 1e-12, SIGNAL, norm_axioms),
    def("holder_single", "orlicz", 1000, 1e-9, SIGNAL, holder_single),
    def("holder_mixed", "orlicz", 1000, 1e-9, NONE, holder_mixed),
    def("convolution_mixed", "orlicz", 200, 1e-9, NONE, convolution_mixed),
    def("convolution_product", "orlicz", 200, 1e-9, NONE, convolution_product),
    def("m2_identity", "modulation", 100, 1e-10, SIGNAL, m2_identity),
    def("tf_shift_invariance", "modulation", 100, 1e-10, SIGNAL, tf_shift_invariance),
    def("embedding_certificates", "modulation", 4, 0.0, NONE, embedding_certificates),
    def("window_robustness", "modulation", 100, 0.0, SIGNAL, window_robustness),
    def("kernel_apply_consistency", "locop", 100, 1e-12, SYMBOL, kernel_apply_consistency),
    def("weak_pairing_consistency", "locop", 100, 1e-12, SYMBOL, weak_pairing_consistency),
    def("identity_operator", "locop", 10, 1e-10, NONE, identity_operator),
    def("adjoint_identity", "locop", 50, 1e-12, SYMBOL, adjoint_identity),
    def("trace_identity", "locop", 100, 1e-10, SYMBOL, trace_identity),
    def("hs_consistency", "locop", 100, 1e-10, SYMBOL, hs_consistency),
    def("operator_norm_bound", "locop", 100, 1e-9, SYMBOL, operator_norm_bound),
    def("schur_bound", "locop", 100, 1e-9, SYMBOL, schur_bound),
    def("positive_semidefinite", "locop", 100, 1e-10, POSITIVE, positive_semidefinite),
    def("trace_norm_equals_trace", "locop", 100, 1e-10, POSITIVE, trace_norm_equals_trace),
    def("trace_class_bound", "locop", 100, 1e-9, SYMBOL, trace_class_bound),
    def("lower_symbol_sandwich", "locop", 100, 1e-9, POSITIVE, lower_symbol_sandwich),
    def("schatten_log_convexity", "locop", 100, 1e-9, SYMBOL, schatten_log_convexity),
    def("orlicz_modulation_boundedness", "locop", 100, 1e-9, SYMBOL, orlicz_modulation_boundedness),
];

pub fn registry() -> &'static [CheckDef] {
    &REGISTRY
}

pub fn lookup(id: &str) -> Option<&'static CheckDef> {
    REGISTRY.iter().find(|d| d.id == id)
}

// ---- stft ----

fn plancherel(ctx: &Ctx, rng: &mut TrialRng, _: usize) -> Result<Trial> {
    let f = ctx.signal(rng);
    let g = ctx.signal(rng);
    let lhs = ctx.stft(&f, &g)?.norm_l2();
    let rhs = f.norm2() * g.norm2();
    Ok(Trial::margin(deviation(lhs - rhs, rhs)))
}

fn orthogonality(ctx: &Ctx, rng: &mut TrialRng, _: usize) -> Result<Trial> {
    let [f1, f2, g1, g2] = std::array::from_fn(|_| ctx.signal(rng));
    let lhs = ctx.stft(&f1, &g1)?.inner(&ctx.stft(&f2, &g2)?)?;
    let rhs = f1.inner(&f2) * g2.inner(&g1);
    let scale = f1.norm2() * f2.norm2() * g1.norm2() * g2.norm2();
    Ok(Trial::margin(deviation((lhs - rhs).norm(), scale)))
}

fn inversion(ctx: &Ctx, rng: &mut TrialRng, _: usize) -> Result<Trial> {
    let f = ctx.signal(rng);
    let g = ctx.signal(rng);
    let mut h = ctx.signal(rng);
    let mut tries = 0;
    while h.inner(&g).norm() < 0.1 * h.norm2() * g.norm2() {
        tries += 1;
        h = if tries < 1000 { ctx.signal(rng) } else { g.clone() };
    }
    let back = invert(&ctx.stft(&f, &g)?, &g, &h)?;
    Ok(Trial::margin(deviation(back.sub(&f).norm2(), f.norm2())).note("redraws", tries as f64))
}

/// A signal supported on `[-K/2, K/2]ⁿ` together with a shift `τ` that
/// keeps it admissible and a grid-aligned frequency index `ν`.
fn shifted_pair(ctx: &Ctx, rng: &mut TrialRng) -> Result<(Signal, Signal, Vec<i64>, Vec<i64>)> {
    let spec = ctx.env.spec;
    let half = (spec.support_radius() / 2) as i64;
    let room = spec.support_radius() as i64 - half;
    let f = Signal::from_support_fn(spec, |k| {
        if k.iter().all(|x| x.abs() <= half) {
            complex_normal(rng)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let tau: Vec<i64> = (0..spec.dim()).map(|_| rng.random_range(-room..=room)).collect();
    let m = ctx.env.torus.samples() as i64;
    let nu: Vec<i64> = (0..spec.dim()).map(|_| rng.random_range(0..m)).collect();
    let w: Vec<f64> = nu.iter().map(|&v| v as f64 / m as f64).collect();
    let moved = modulate(&translate(&f, &tau)?, &w)?;
    Ok((f, moved, tau, nu))
}

fn covariance(ctx: &Ctx, rng: &mut TrialRng, _: usize) -> Result<Trial> {
    let (f, moved, tau, nu) = shifted_pair(ctx, rng)?;
    let g = ctx.signal(rng);
    let v0 = ctx.stft(&f, &g)?;
    let v1 = ctx.stft(&moved, &g)?;
    let torus = &ctx.env.torus;
    let mut worst_diff = 0.0f64;
    for (mi, m) in v1.m_cube().points().into_iter().enumerate() {
        let back: Vec<i64> = m.iter().zip(&tau).map(|(a, b)| a - b).collect();
        for j in 0..torus.len() {
            let idx: Vec<i64> = torus.multi_index(j).iter().zip(&nu).map(|(a, b)| a - b).collect();
            let a = v1.slice(mi)[j].norm();
            let b = v0.get(&back, torus.flat_index(&idx)).norm();
            worst_diff = worst_diff.max((a - b).abs());
        }
    }
    Ok(Trial::margin(deviation(worst_diff, f.norm2() * g.norm2())))
}

// ---- young ----

const CONJUGATE_EXPONENTS: [f64; 5] = [1.25, 1.5, 2.0, 3.0, 4.0];

fn young_conjugate_power(_: &Ctx, rng: &mut TrialRng, trial: usize) -> Result<Trial> {
    let p = CONJUGATE_EXPONENTS[trial % CONJUGATE_EXPONENTS.len()];
    let y = log_uniform(rng, -3.0, 3.0);
    let numeric = complementary(&power(p), y)?;
    let exact = (p - 1.0) * (y / p).powf(conjugate_exponent(p));
    Ok(Trial::margin(deviation(numeric - exact, exact)))
}

fn young_biconjugate(_: &Ctx, rng: &mut TrialRng, trial: usize) -> Result<Trial> {
    let phi = match trial % 3 {
        0 => power(1.5),
        1 => power(3.0),
        _ => YoungFunction::eq5(),
    };
    let t = log_uniform(rng, -3.0, 1.0);
    let psi = YoungFunction::complementary_of(phi.clone());
    let twice = complementary(&psi, t)?;
    let rhs = phi.evaluate(t)? * (1.0 + 1e-6) + 1e-9;
    Ok(Trial::margin(ineq(twice, rhs)))
}

fn eq5_convexity(_: &Ctx, rng: &mut TrialRng, _: usize) -> Result<Trial> {
    let phi = YoungFunction::eq5();
    let x = log_uniform(rng, -6.0, 1.0);
    let h = x * log_uniform(rng, -4.0, -1.0);
    let (a, b, c) = (phi.evaluate(x - h)?, phi.evaluate(x)?, phi.evaluate(x + h)?);
    Ok(Trial::margin((a + c - 2.0 * b) / (a + c)))
}

// ---- orlicz ----

const POWER_EXPONENTS: [f64; 4] = [1.0, 1.5, 2.0, 3.0];

fn luxemburg_power(ctx: &Ctx, rng: &mut TrialRng, _: usize) -> Result<Trial> {
    let f = ctx.signal(rng);
    let g = ctx.unit(rng);
    let field = ctx.stft(&f, &g)?;
    let mut margins = Vec::new();
    for p in POWER_EXPONENTS {
        let phi = power(p);
        let a = lattice_norm(&f, &phi)?;
        margins.push(deviation(a - f.norm_p(p), f.norm_p(p)));
        let b = product_norm(&field, &phi)?;
        margins.push(deviation(b - field.norm_p(p), field.norm_p(p)));
    }
    Ok(Trial::margin(worst(margins)))
}

fn luxemburg_bracket(ctx: &Ctx, rng: &mut TrialRng, trial: usize) -> Result<Trial> {
    let phi = match trial % 3 {
        0 => power(1.5),
        1 => YoungFunction::eq5(),
        _ => power(3.0),
    };
    let values: Vec<f64> = abs_values(&scaled(&ctx.signal(rng), log_uniform(rng, -3.0, 3.0)));
    let b = luxemburg(&values, Measure::Counting, &phi)?;
    let eps = 1e-9;
    let above = modular(&values, 1.0, &phi, b * (1.0 + eps));
    let below = modular(&values, 1.0, &phi, b * (1.0 - eps));
    Ok(Trial::margin(worst([1.0 - above, below - 1.0])))
}

fn norm_axioms(ctx: &Ctx, rng: &mut TrialRng, trial: usize) -> Result<Trial> {
    let phi = if trial.is_multiple_of(2) { YoungFunction::eq5() } else { power(1.5) };
    let s = log_uniform(rng, -2.0, 1.0);
    let f = scaled(&ctx.signal(rng), s);
    let g = scaled(&ctx.signal(rng), s);
    let c = complex_normal(rng) * log_uniform(rng, -2.0, 2.0);
    let nf = lattice_norm(&f, &phi)?;
    let ng = lattice_norm(&g, &phi)?;
    let homogeneity = deviation(lattice_norm(&f.scale(c), &phi)? - c.norm() * nf, c.norm() * nf);
    let triangle = ineq(lattice_norm(&f.add(&g), &phi)?, nf + ng);
    let damp: Vec<Complex64> = f.values().iter().map(|z| z * rng.random_range(0.0..=1.0)).collect();
    let smaller = Signal::new(*f.spec(), damp)?;
    let monotone = ineq(lattice_norm(&smaller, &phi)?, nf);
    Ok(Trial::margin(worst([homogeneity, triangle, monotone])))
}

fn holder_single(ctx: &Ctx, rng: &mut TrialRng, trial: usize) -> Result<Trial> {
    let f = scaled(&ctx.signal(rng), log_uniform(rng, -2.0, 1.0));
    let g = scaled(&ctx.signal(rng), log_uniform(rng, -2.0, 1.0));
    let (phi, psi, constant, tier) = match trial % 3 {
        0 => {
            let p = rng.random_range(1.1..4.0);
            (power(p), power(conjugate_exponent(p)), 1.0, "holder-constant-1")
        }
        1 => {
            let e = YoungFunction::eq5();
            (e.clone(), YoungFunction::complementary_of(e), 2.0, "holder-constant-2")
        }
        _ => (power(3.0), YoungFunction::complementary_of(power(3.0)), 2.0, "holder-constant-2"),
    };
    let lhs: f64 = f.values().iter().zip(g.values()).map(|(a, b)| (a * b).norm()).sum();
    let rhs = constant * lattice_norm(&f, &phi)? * lattice_norm(&g, &psi)?;
    Ok(Trial::margin(ineq(lhs, rhs)).tier(tier).note("ratio", lhs / rhs * constant))
}

fn holder_mixed(ctx: &Ctx, rng: &mut TrialRng, trial: usize) -> Result<Trial> {
    let radius = (ctx.env.spec.support_radius() / 2).max(1);
    let f = ctx.grid_field(rng, radius)?;
    let g = ctx.grid_field(rng, radius)?;
    let s = log_uniform(rng, -2.0, 0.0);
    let f = f.scale(Complex64::new(s, 0.0));
    let (phi, psi, constant, tier) = if trial.is_multiple_of(2) {
        let (p1, p2) = (rng.random_range(1.1..4.0), rng.random_range(1.1..4.0));
        (
            (power(p1), power(p2)),
            (power(conjugate_exponent(p1)), power(conjugate_exponent(p2))),
            1.0,
            "holder-constant-1",
        )
    } else {
        let (a, b) = (YoungFunction::eq5(), power(2.0));
        (
            (a.clone(), b.clone()),
            (YoungFunction::complementary_of(a), YoungFunction::complementary_of(b)),
            4.0,
            "holder-constant-4",
        )
    };
    let lhs = holder_pairing(&f, &g)?;
    let rhs = constant * mixed_norm(&f, &phi.0, &phi.1)? * mixed_norm(&g, &psi.0, &psi.1)?;
    Ok(Trial::margin(ineq(lhs, rhs)).tier(tier).note("ratio", lhs / rhs * constant))
}

/// `F` of radius `K` and `G` of radius `2K`, both of torus degree `K`, so
/// that `F * G` fills the computation box exactly.
fn convolution_factors(ctx: &Ctx, rng: &mut TrialRng) -> Result<(PhaseSpaceField, PhaseSpaceField)> {
    let spec = ctx.env.spec;
    let f = ctx.trig_field(rng, spec.support_radius())?;
    let g = ctx.trig_field(rng, spec.max_shift())?;
    let s = log_uniform(rng, -2.0, 0.0);
    Ok((f, g.scale(Complex64::new(s, 0.0))))
}

fn convolution_mixed(ctx: &Ctx, rng: &mut TrialRng, trial: usize) -> Result<Trial> {
    let (f, g) = convolution_factors(ctx, rng)?;
    let (phi1, phi2) = if trial.is_multiple_of(2) {
        (power(rng.random_range(1.0..3.0)), power(rng.random_range(1.0..3.0)))
    } else {
        (YoungFunction::eq5(), power(2.0))
    };
    let lhs = mixed_norm(&convolve_phase_space(&f, &g)?, &phi1, &phi2)?;
    let rhs = f.norm_p(1.0) * mixed_norm(&g, &phi1, &phi2)?;
    Ok(Trial::margin(ineq(lhs, rhs)))
}

fn convolution_product(ctx: &Ctx, rng: &mut TrialRng, trial: usize) -> Result<Trial> {
    let (f, g) = convolution_factors(ctx, rng)?;
    let phi = if trial.is_multiple_of(2) { power(rng.random_range(1.0..3.0)) } else { YoungFunction::eq5() };
    let lhs = product_norm(&convolve_phase_space(&f, &g)?, &phi)?;
    let rhs = f.norm_p(1.0) * product_norm(&g, &phi)?;
    Ok(Trial::margin(ineq(lhs, rhs)))
}

// ---- modulation ----

fn m2_identity(ctx: &Ctx, rng: &mut TrialRng, _: usize) -> Result<Trial> {
    let f = ctx.signal(rng);
    let g = ctx.env.window_signal();
    let lhs = modulation_norm(&f, g, 2.0)?;
    let rhs = f.norm2() * g.norm2();
    Ok(Trial::margin(deviation(lhs - rhs, rhs)))
}

fn tf_shift_invariance(ctx: &Ctx, rng: &mut TrialRng, _: usize) -> Result<Trial> {
    let (f, moved, _, _) = shifted_pair(ctx, rng)?;
    let g = ctx.env.window_signal();
    let mut margins = Vec::new();
    for p in [1.0, 2.0, f64::INFINITY] {
        let a = modulation_norm(&f, g, p)?;
        margins.push(deviation(modulation_norm(&moved, g, p)? - a, a));
    }
    let phi = YoungFunction::eq5();
    let a = product_norm(&ctx.stft(&f, g)?, &phi)?;
    margins.push(deviation(product_norm(&ctx.stft(&moved, g)?, &phi)? - a, a));
    Ok(Trial::margin(worst(margins)))
}

/// `(name, Φ, Ψ, x₀, expected holds, bound on C)`.
pub(crate) fn certificates() -> [(&'static str, YoungFunction, YoungFunction, f64, bool, f64); 4] {
    let e2 = (-2.0f64).exp();
    [
        ("power-1.5 into power-3", power(1.5), power(3.0), 1.0, true, 1.0),
        ("eq5 into power-2", YoungFunction::eq5(), power(2.0), e2, true, 0.5),
        ("power-2 into eq5", power(2.0), YoungFunction::eq5(), 0.01, false, f64::INFINITY),
        ("power-1.5 into eq5", power(1.5), YoungFunction::eq5(), e2, true, 2.0 / std::f64::consts::E),
    ]
}

const CERTIFICATE_GRID: usize = 256;

fn embedding_certificates(_: &Ctx, _: &mut TrialRng, trial: usize) -> Result<Trial> {
    let all = certificates();
    let (_, phi, psi, x0, holds, bound) = &all[trial % all.len()];
    let cert = embedding_condition((phi, phi), (psi, psi), *x0, CERTIFICATE_GRID)?;
    let ok = cert.holds == *holds && (!holds || cert.constant <= bound * (1.0 + 1e-12));
    let trial = Trial::margin(if ok { 0.0 } else { -1.0 });
    Ok(if cert.holds { trial.note("constant", cert.constant) } else { trial })
}

fn window_robustness(ctx: &Ctx, rng: &mut TrialRng, _: usize) -> Result<Trial> {
    let spec = ctx.env.spec;
    let k = spec.support_radius().max(1) as f64;
    let a = WindowSpec::gaussian_width(k / 2.0).build(spec)?;
    let b = WindowSpec::gaussian_width(k / 4.0).build(spec)?;
    let f = ctx.signal(rng);
    let phi = YoungFunction::eq5();
    let ratio = product_norm(&ctx.stft(&f, &a)?, &phi)? / product_norm(&ctx.stft(&f, &b)?, &phi)?;
    let ok = ratio.is_finite() && ratio > 0.0;
    Ok(Trial::margin(if ok { 0.0 } else { -f64::MAX }).note("ratio", ratio))
}

// ---- locop ----

fn kernel_apply_consistency(ctx: &Ctx, rng: &mut TrialRng, _: usize) -> Result<Trial> {
    let sigma = ctx.symbol(rng)?;
    let (g1, g2, f) = (ctx.unit(rng), ctx.unit(rng), ctx.signal(rng));
    let out = locop::apply(&sigma, &g1, &g2, &f)?;
    let via = kernel(&sigma, &g1, &g2)?.apply(&f)?;
    Ok(Trial::margin(deviation(via.sub(&out).norm_inf(), out.norm_inf())))
}

fn weak_pairing_consistency(ctx: &Ctx, rng: &mut TrialRng, _: usize) -> Result<Trial> {
    let sigma = ctx.symbol(rng)?;
    let (g1, g2, f, h) = (ctx.unit(rng), ctx.unit(rng), ctx.signal(rng), ctx.signal(rng));
    let out = locop::apply(&sigma, &g1, &g2, &f)?;
    let weak = locop::weak_pairing(&sigma, &g1, &g2, &f, &h)?;
    let cross = deviation((weak - out.inner(&h)).norm(), out.norm2() * h.norm2());
    let own = locop::weak_pairing(&sigma, &g1, &g2, &f, &out)?;
    let energy = out.norm2().powi(2);
    Ok(Trial::margin(worst([cross, deviation((own - energy).norm(), energy)])))
}

fn identity_operator(ctx: &Ctx, rng: &mut TrialRng, trial: usize) -> Result<Trial> {
    let g = if trial == 0 { ctx.env.window_signal().normalized()? } else { ctx.unit(rng) };
    let k = kernel(&ctx.constant(Complex64::new(1.0, 0.0))?, &g, &g)?;
    let block = ctx.env.spec.support_cube().points();
    let mut dev = 0.0f64;
    for a in &block {
        for b in &block {
            let id = if a == b { 1.0 } else { 0.0 };
            dev = dev.max((k.get(a, b) - id).norm());
        }
    }
    Ok(Trial::margin(-dev))
}

fn adjoint_identity(ctx: &Ctx, rng: &mut TrialRng, _: usize) -> Result<Trial> {
    let sigma = ctx.symbol(rng)?;
    let (g1, g2) = (ctx.unit(rng), ctx.unit(rng));
    let two_path = kernel(&sigma, &g1, &g2)?.adjoint().max_abs_diff(&adjoint_kernel(&sigma, &g1, &g2)?);
    let real = ctx.real_symbol(rng)?;
    let k = kernel(&real, &g1, &g1)?;
    let hermitian = k.max_abs_diff(&k.adjoint());
    Ok(Trial::margin(-two_path.max(hermitian)).note("two_path", two_path).note("hermitian", hermitian))
}

fn trace_identity(ctx: &Ctx, rng: &mut TrialRng, trial: usize) -> Result<Trial> {
    let sigma = ctx.symbol(rng)?;
    let g1 = ctx.unit(rng);
    let g2 = if trial.is_multiple_of(2) { g1.clone() } else { ctx.unit(rng) };
    let tr = kernel(&sigma, &g1, &g2)?.trace();
    let want = g2.inner(&g1) * sigma.mass();
    Ok(Trial::margin(deviation((tr - want).norm(), g1.norm2() * g2.norm2() * sigma.norm_p(1.0))))
}

fn hs_consistency(ctx: &Ctx, rng: &mut TrialRng, _: usize) -> Result<Trial> {
    let sigma = ctx.symbol(rng)?;
    let k = kernel(&sigma, &ctx.unit(rng), &ctx.unit(rng))?;
    let hs2 = k.hs_norm().powi(2);
    let sv2: f64 = singular_values(&k)?.iter().map(|s| s * s).sum();
    Ok(Trial::margin(deviation(hs2 - sv2, hs2)))
}

/// Random windows with independent random norms in `[1/2, 2]`.
fn scaled_windows(ctx: &Ctx, rng: &mut TrialRng) -> (Signal, Signal) {
    let g1 = scaled(&ctx.unit(rng), rng.random_range(0.5..2.0));
    let g2 = scaled(&ctx.unit(rng), rng.random_range(0.5..2.0));
    (g1, g2)
}

fn sup_abs(field: &PhaseSpaceField) -> f64 {
    field.values().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn operator_norm_bound(ctx: &Ctx, rng: &mut TrialRng, _: usize) -> Result<Trial> {
    let sigma = ctx.symbol(rng)?;
    let (g1, g2) = scaled_windows(ctx, rng);
    let s1 = singular_values(&kernel(&sigma, &g1, &g2)?)?[0];
    let rhs = sup_abs(&sigma) * g1.norm2() * g2.norm2();
    Ok(Trial::margin(ineq(s1, rhs)).note("ratio", s1 / rhs))
}

fn schur_bound(ctx: &Ctx, rng: &mut TrialRng, _: usize) -> Result<Trial> {
    let sigma = ctx.symbol(rng)?;
    let (g1, g2) = scaled_windows(ctx, rng);
    let k = kernel(&sigma, &g1, &g2)?;
    let s1 = singular_values(&k)?[0];
    let rhs = k.schur_bound();
    Ok(Trial::margin(ineq(s1, rhs)).note("ratio", s1 / rhs))
}

fn positive_semidefinite(ctx: &Ctx, rng: &mut TrialRng, trial: usize) -> Result<Trial> {
    let sigma = ctx.positive_symbol(rng, trial)?;
    let g = scaled(&ctx.unit(rng), rng.random_range(0.5..2.0));
    let k = kernel(&sigma, &g, &g)?;
    let s1 = singular_values(&k)?[0];
    let low = k.min_hermitian_eigenvalue();
    Ok(Trial::margin(if s1 > 0.0 { (low / s1).min(0.0) } else { 0.0 }))
}

fn trace_norm_equals_trace(ctx: &Ctx, rng: &mut TrialRng, trial: usize) -> Result<Trial> {
    let sigma = ctx.positive_symbol(rng, trial)?;
    let g = scaled(&ctx.unit(rng), rng.random_range(0.5..2.0));
    let k = kernel(&sigma, &g, &g)?;
    let s1 = schatten_norm(&singular_values(&k)?, 1.0);
    let tr = k.trace();
    let mass = g.norm2().powi(2) * sigma.mass().re;
    Ok(Trial::margin(worst([deviation((tr - s1).norm(), s1), deviation((tr - mass).norm(), mass)])))
}

fn trace_class_bound(ctx: &Ctx, rng: &mut TrialRng, _: usize) -> Result<Trial> {
    let sigma = ctx.symbol(rng)?;
    let (g1, g2) = scaled_windows(ctx, rng);
    let (n1, n2) = (g1.norm2(), g2.norm2());
    let s1 = schatten_norm(&singular_values(&kernel(&sigma, &g1, &g2)?)?, 1.0);
    let total = 4.0 * sigma.norm_p(1.0) * n1.max(n2).powi(2);
    let mut margins = vec![ineq(s1, total)];
    for part in symbol_parts(&sigma)? {
        let part_s1 = schatten_norm(&singular_values(&grid_kernel(&part, &g1, &g2)?)?, 1.0);
        margins.push(ineq(part_s1, part.norm_p(1.0) * n1 * n2));
    }
    Ok(Trial::margin(worst(margins)).note("ratio", s1 / total))
}

fn lower_symbol_sandwich(ctx: &Ctx, rng: &mut TrialRng, trial: usize) -> Result<Trial> {
    let sigma = ctx.positive_symbol(rng, trial)?;
    let g = scaled(&ctx.unit(rng), rng.random_range(0.5..2.0));
    let k = kernel(&sigma, &g, &g)?;
    let s1 = schatten_norm(&singular_values(&k)?, 1.0);
    let lower = sigma_tilde_with(&k, &sigma, &g)?.norm_p(1.0);
    let rhs = g.norm2().powi(2) * s1;
    let mut result = Trial::margin(ineq(lower, rhs)).note("ratio", lower / rhs);
    if trial < SYMBOL_NORM_TRIALS {
        // the bounds through ‖g‖_{M^Φ} and ‖ς‖_{M¹}, recorded only
        let w = ctx.window_norms()?;
        let g_phi = product_norm(&stft_box(&g, ctx.env.window_signal(), &ctx.env.torus)?, &w.phi)?;
        let upper = g_phi.powi(2) * symbol_modulation_norm(&sigma, &w.symbol_window, 1.0)?;
        result = result
            .note("kappa_lower_m_phi", lower / g_phi.powi(2) / s1)
            .note("rhs_upper_m1", upper)
            .note("kappa_upper_m1", s1 / upper);
    }
    Ok(result)
}

const SCHATTEN_EXPONENTS: [f64; 5] = [1.0, 1.5, 2.0, 3.0, f64::INFINITY];

fn schatten_log_convexity(ctx: &Ctx, rng: &mut TrialRng, _: usize) -> Result<Trial> {
    let sigma = ctx.symbol(rng)?;
    let (g1, g2) = scaled_windows(ctx, rng);
    let s = singular_values(&kernel(&sigma, &g1, &g2)?)?;
    let (one, inf) = (schatten_norm(&s, 1.0), schatten_norm(&s, f64::INFINITY));
    let margins = SCHATTEN_EXPONENTS.map(|p| {
        let t = if p.is_infinite() { 0.0 } else { 1.0 / p };
        ineq(schatten_norm(&s, p), one.powf(t) * inf.powf(1.0 - t))
    });
    Ok(Trial::margin(worst(margins)))
}

/// Norms of the environment window that the `M^Φ` bounds need, with
/// `Φ = eq5` and `Ψ` its numeric complementary function.
pub(crate) struct WindowNorms {
    phi: YoungFunction,
    m_phi: f64,
    m_psi: f64,
    m_one: f64,
    sup: f64,
    symbol_window: PhaseSpaceField,
}

impl WindowNorms {
    fn new(env: &Environment) -> Result<Self> {
        let g = env.window_signal();
        let phi = YoungFunction::eq5();
        let v = stft_box(g, g, &env.torus)?;
        Ok(WindowNorms {
            m_phi: product_norm(&v, &phi)?,
            m_psi: product_norm(&v, &YoungFunction::complementary_of(phi.clone()))?,
            m_one: v.norm_p(1.0),
            sup: g.norm_inf(),
            symbol_window: symbol_window(env.spec, &env.torus)?,
            phi,
        })
    }
}

/// Symbol `M¹` norms are costly; the paper-form right-hand sides that use
/// them are recorded for the first few trials only.
const SYMBOL_NORM_TRIALS: usize = 4;

fn orlicz_modulation_boundedness(ctx: &Ctx, rng: &mut TrialRng, trial: usize) -> Result<Trial> {
    let w = ctx.window_norms()?;
    let g = ctx.env.window_signal();
    let sigma = ctx.symbol(rng)?;
    let f = ctx.signal(rng);
    let out = locop::apply(&sigma, g, g, &f)?;
    let l2 = ineq(out.norm2(), sup_abs(&sigma) * g.norm2().powi(2) * f.norm2());
    let norm = |h: &Signal| -> Result<f64> { product_norm(&stft_box(h, g, &ctx.env.torus)?, &w.phi) };
    let ratio = norm(&out)? / norm(&f)?;
    let finite = if ratio.is_finite() { 0.0 } else { -f64::MAX };
    let th3 = sigma.norm_p(1.0) * w.m_psi * w.m_phi;
    let mut result = Trial::margin(worst([l2, finite]))
        .note("ratio", ratio)
        .note("rhs_l1", th3)
        .note("kappa_l1", ratio / th3)
        .note("gap_l1", if ratio > th3 { 1.0 } else { 0.0 });
    if trial < SYMBOL_NORM_TRIALS {
        let m1 = symbol_modulation_norm(&sigma, &w.symbol_window, 1.0)?;
        let duality = m1 * w.m_psi * w.m_phi;
        let schur = w.m_one * w.sup * m1;
        result = result
            .note("rhs_m1_duality", duality)
            .note("rhs_m1_schur", schur)
            .note("kappa_m1_duality", ratio / duality)
            .note("kappa_m1_schur", ratio / schur);
    }
    Ok(result)
}

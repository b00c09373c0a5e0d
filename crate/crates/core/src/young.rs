//! Young and quasi-Young functions, their complementary functions and a
//! Δ₂ probe.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `e^{-3/2}`: the last point where `-t² ln t` is still convex.
pub const EQ5_JOIN: f64 = 0.22313016014842982;

/// Doubling cap for the complementary-function bracket.
const BRACKET_CAP: f64 = 1152921504606846976.0; // 2^60

/// A finite, continuous function `Φ: [0, ∞) → [0, ∞)` with `Φ(0) = 0`.
///
/// Every kind except `quasi` (and tables whose slopes decrease) is convex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum YoungFunction {
    /// `t^p`, `p ≥ 1`.
    Power { p: f64 },
    /// `-t² ln t` up to `e^{-3/2}`, continued by the tangent-matching
    /// quadratic `t² + e^{-3}/2`.
    Eq5,
    /// `base(t^p)` with `0 < p ≤ 1`.
    Quasi { base: Box<YoungFunction>, p: f64 },
    /// Piecewise linear through `(0, 0)` and the given knots, continued with
    /// the last slope.
    Table { points: Vec<[f64; 2]> },
    /// The numeric complementary function of `base`.
    Complementary { base: Box<YoungFunction> },
}

impl YoungFunction {
    pub fn power(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::Domain(format!("power exponent p={p} must be finite and at least 1")));
        }
        Ok(YoungFunction::Power { p })
    }

    pub fn eq5() -> Self {
        YoungFunction::Eq5
    }

    pub fn table(points: Vec<[f64; 2]>) -> Result<Self> {
        let mut prev = [0.0, 0.0];
        for &[x, y] in &points {
            if !(x.is_finite() && y.is_finite()) || x <= prev[0] || y < prev[1] {
                return Err(Error::Domain(
                    "table knots must be finite with increasing abscissae and nondecreasing values".into(),
                ));
            }
            prev = [x, y];
        }
        if prev[1] <= 0.0 {
            return Err(Error::Domain("table must eventually be positive".into()));
        }
        Ok(YoungFunction::Table { points })
    }

    pub fn complementary_of(base: YoungFunction) -> Self {
        YoungFunction::Complementary { base: Box::new(base) }
    }

    /// Checks parameters after deserialization.
    pub fn validate(&self) -> Result<()> {
        match self {
            YoungFunction::Power { p } => Self::power(*p).map(|_| ()),
            YoungFunction::Eq5 => Ok(()),
            YoungFunction::Quasi { base, p } => {
                check_quasi_order(*p)?;
                base.validate()
            }
            YoungFunction::Table { points } => Self::table(points.clone()).map(|_| ()),
            YoungFunction::Complementary { base } => base.validate(),
        }
    }

    /// `Φ(t)` for `t ≥ 0`.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("Young functions take finite t ≥ 0, got {t}")));
        }
        match self {
            YoungFunction::Complementary { base } => complementary(base, t),
            _ => Ok(self.value(t)),
        }
    }

    /// Unchecked evaluation; the complementary kind returns `+∞` where the
    /// supremum is unbounded.
    pub(crate) fn value(&self, t: f64) -> f64 {
        match self {
            YoungFunction::Power { p } => {
                if *p == 1.0 {
                    t
                } else if *p == 2.0 {
                    t * t
                } else {
                    t.powf(*p)
                }
            }
            YoungFunction::Eq5 => {
                if t == 0.0 {
                    0.0
                } else if t <= EQ5_JOIN {
                    -t * t * t.ln()
                } else {
                    t * t + 0.5 * (-3.0f64).exp()
                }
            }
            YoungFunction::Quasi { base, p } => base.value(t.powf(*p)),
            YoungFunction::Table { points } => table_value(points, t),
            YoungFunction::Complementary { base } => complementary(base, t).unwrap_or(f64::INFINITY),
        }
    }

    /// Never `+∞` at a finite argument. The complementary kind is finite
    /// exactly when its base is superlinear, which a bounded probe cannot
    /// decide, so it reports what the probe range shows.
    pub fn finite(&self) -> bool {
        match self {
            YoungFunction::Complementary { base } => probe_grid(64).iter().all(|&y| complementary(base, y).is_ok()),
            _ => true,
        }
    }

    pub fn continuous(&self) -> bool {
        self.finite()
    }

    pub fn strictly_convex(&self) -> bool {
        match self {
            YoungFunction::Power { p } => *p > 1.0,
            YoungFunction::Eq5 => true,
            YoungFunction::Table { .. } => false,
            _ => midpoint_convex(self, true),
        }
    }

    /// The axioms on a log-spaced probe grid: `Φ(0) = 0`, nondecreasing,
    /// midpoint convex, and growing past `bound` somewhere on the grid.
    pub fn probe_axioms(&self, bound: f64) -> bool {
        let grid = probe_grid(256);
        let values: Vec<f64> = grid.iter().map(|&t| self.value(t)).collect();
        self.value(0.0) == 0.0
            && values.windows(2).all(|w| w[0] <= w[1])
            && values.last().is_some_and(|&v| v > bound)
            && midpoint_convex(self, false)
    }
}

fn check_quasi_order(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("quasi-Young order p={p} must lie in (0, 1]")))
    }
}

/// `Φ₀(t) = Φ(t^p)`; the order `p = 1` returns `base` unchanged.
pub fn quasi_young(base: YoungFunction, p: f64) -> Result<YoungFunction> {
    check_quasi_order(p)?;
    if p == 1.0 {
        return Ok(base);
    }
    Ok(YoungFunction::Quasi { base: Box::new(base), p })
}

fn table_value(points: &[[f64; 2]], t: f64) -> f64 {
    let mut prev = [0.0, 0.0];
    let mut slope = 0.0;
    for &[x, y] in points {
        slope = (y - prev[1]) / (x - prev[0]);
        if t <= x {
            return prev[1] + slope * (t - prev[0]);
        }
        prev = [x, y];
    }
    prev[1] + slope * (t - prev[0])
}

/// Log-spaced points from `1e-6` to `1e6`.
fn probe_grid(samples: usize) -> Vec<f64> {
    (0..samples)
        .map(|i| 10f64.powf(-6.0 + 12.0 * i as f64 / (samples - 1) as f64))
        .collect()
}

fn midpoint_convex(phi: &YoungFunction, strict: bool) -> bool {
    let grid = probe_grid(128);
    grid.windows(2).all(|w| {
        let (x, y) = (w[0], w[1]);
        let mid = phi.value(0.5 * (x + y));
        let chord = 0.5 * (phi.value(x) + phi.value(y));
        if strict {
            mid < chord
        } else {
            mid <= chord + 1e-12 * (1.0 + phi.value(y))
        }
    })
}

/// `Ψ(y) = sup_{x ≥ 0} (x y - Φ(x))`.
///
/// The maximizer is bracketed by the smallest power of two `x_hi` with
/// `Φ(x_hi)/x_hi ≥ y`; since `Φ(x)/x` is nondecreasing for convex `Φ`, the
/// objective is nonpositive beyond. Brent's method on the concave objective
/// then locates the supremum. Tables are maximized over their knots.
pub fn complementary(phi: &YoungFunction, y: f64) -> Result<f64> {
    if !(y >= 0.0 && y.is_finite()) {
        return Err(Error::Domain(format!("complementary function takes finite y ≥ 0, got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    if let YoungFunction::Table { points } = phi {
        return table_complementary(points, y);
    }
    let mut hi = 1.0;
    loop {
        let v = phi.value(hi);
        if v.is_infinite() {
            return Err(Error::Unbounded(format!(
                "Φ is extended-valued on the bracket at x={hi}"
            )));
        }
        if v / hi >= y {
            break;
        }
        hi *= 2.0;
        if hi > BRACKET_CAP {
            return Err(Error::Unbounded(format!(
                "x·{y} - Φ(x) keeps growing past x = 2^60"
            )));
        }
    }
    while hi > f64::MIN_POSITIVE && phi.value(0.5 * hi) / (0.5 * hi) >= y {
        hi *= 0.5;
    }
    let objective = |x: f64| x * y - phi.value(x);
    let best = brent_max(objective, 0.0, hi, 1e-10);
    Ok(best.max(objective(hi)).max(0.0))
}

/// For a piecewise-linear `Φ` the supremum sits at a knot, or is unbounded
/// once `y` exceeds the slope of the last piece.
fn table_complementary(points: &[[f64; 2]], y: f64) -> Result<f64> {
    let n = points.len();
    let (prev, last) = (if n > 1 { points[n - 2] } else { [0.0, 0.0] }, points[n - 1]);
    if y > (last[1] - prev[1]) / (last[0] - prev[0]) {
        return Err(Error::Unbounded(format!("x·{y} - Φ(x) grows without bound past the last knot")));
    }
    Ok(points.iter().map(|&[x, v]| x * y - v).fold(0.0, f64::max))
}

/// Maximum of a unimodal `f` on `[a, b]` by Brent's method: parabolic steps
/// through the three best points, golden-section steps when those fail.
/// Returns the best value seen.
fn brent_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> f64 {
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    let abs_tol = rel_tol * b.abs().max(f64::MIN_POSITIVE);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = -f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let tol1 = rel_tol * x.abs() + abs_tol;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if mid >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= mid { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = -f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    -fx
}

/// `sup Φ(2x)/Φ(x)` over `samples` log-spaced points in `[r·2^{-40}, r]`.
///
/// Points where `Φ(x) = Φ(2x) = 0` carry no information and are skipped;
/// `Φ(x) = 0 < Φ(2x)` gives `+∞`. A finite answer is a heuristic
/// certificate for a local Δ₂ condition with that constant, not a proof.
pub fn delta2_probe(phi: &YoungFunction, r: f64, samples: usize) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("probe radius r={r} must be positive")));
    }
    if samples < 16 {
        return Err(Error::Domain(format!("Δ₂ probe needs at least 16 samples, got {samples}")));
    }
    let mut sup = 0.0f64;
    for i in 0..samples {
        let x = r * 2f64.powf(-40.0 * (1.0 - i as f64 / (samples - 1) as f64));
        let (a, b) = (phi.value(x), phi.value(2.0 * x));
        if a == 0.0 {
            if b > 0.0 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        sup = sup.max(b / a);
    }
    Ok(sup)
}

/// Ids of the registered checks that exercise this module.
pub const INVARIANTS: &[&str] = &[
    "young_conjugate_power",
    "young_biconjugate",
    "eq5_convexity",
];

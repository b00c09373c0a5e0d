//! Localization operators `𝔏^{g₁,g₂}_ς f = V_{g₂}*(ς · V_{g₁} f)` on the
//! lattice model: direct application, the explicit kernel matrix, the weak
//! pairing, the lower symbol `σ̃`, and spectral summaries.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{de_complex_vec, ser_complex, ser_complex_vec, ser_f64, ser_f64_map, ser_f64_vec};
use crate::lattice::{Cube, LatticeSpec, PhaseSpaceField, Signal};
use crate::stft::{stft_adjoint, stft_on, stft_unrestricted};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Singular values below `RANK_THRESHOLD · s₁` do not count towards the
/// reported rank. They still enter every Schatten sum.
pub const RANK_THRESHOLD: f64 = 1e-13;

/// Eigenvalues down to `-PSD_TOLERANCE · s₁` count as nonnegative.
pub const PSD_TOLERANCE: f64 = 1e-10;

fn check_inputs(sigma: &PhaseSpaceField, g1: &Signal, g2: &Signal) -> Result<LatticeSpec> {
    let spec = *sigma.spec();
    if *g1.spec() != spec || *g2.spec() != spec {
        return Err(Error::Shape("symbol and windows live on different lattices".into()));
    }
    g1.require_admissible("window g1")?;
    g2.require_admissible("window g2")?;
    if g1.is_zero() || g2.is_zero() {
        return Err(Error::Domain("windows must be non-zero".into()));
    }
    if sigma.m_radius() > spec.max_shift() {
        return Err(Error::Range(format!(
            "symbol radius {} exceeds 2K={}",
            sigma.m_radius(),
            spec.max_shift()
        )));
    }
    Ok(spec)
}

/// The weak form integrand `ς · V_{g₁}f · conj(V_{g₂}h)` has torus degree
/// `deg ς + R + 2K` at worst, with `R` the symbol radius.
fn check_quadrature(sigma: &PhaseSpaceField) -> Result<()> {
    let spec = sigma.spec();
    let needed = sigma.degree_bound() + sigma.m_radius() + 2 * spec.support_radius();
    let top = sigma.torus().samples() - 1;
    if needed > top {
        return Err(Error::Precision(format!(
            "localization needs exact quadrature to degree {needed}, but M={} only reaches {top}",
            top + 1
        )));
    }
    Ok(())
}

/// `𝔏^{g₁,g₂}_ς f`.
pub fn apply(sigma: &PhaseSpaceField, g1: &Signal, g2: &Signal, f: &Signal) -> Result<Signal> {
    check_inputs(sigma, g1, g2)?;
    check_quadrature(sigma)?;
    let v = stft_on(f, g1, sigma.torus(), sigma.m_radius())?;
    stft_adjoint(&sigma.mul(&v)?, g2)
}

/// `Σ_m M⁻ⁿ Σ_j ς V_{g₁}f conj(V_{g₂}h)`. `h` may be any signal on the
/// lattice.
pub fn weak_pairing(sigma: &PhaseSpaceField, g1: &Signal, g2: &Signal, f: &Signal, h: &Signal) -> Result<Complex64> {
    check_inputs(sigma, g1, g2)?;
    check_quadrature(sigma)?;
    if *h.spec() != *sigma.spec() {
        return Err(Error::Shape("test signal lives on a different lattice".into()));
    }
    let vf = stft_on(f, g1, sigma.torus(), sigma.m_radius())?;
    let vh = stft_unrestricted(h, g2, sigma.torus(), sigma.m_radius())?;
    let sum: Complex64 = sigma
        .values()
        .iter()
        .zip(vf.values())
        .zip(vh.values())
        .map(|((s, a), b)| s * a * b.conj())
        .sum();
    Ok(sum * sigma.torus().weight())
}

/// Free-form labels for where a kernel came from.
pub type Provenance = BTreeMap<String, String>;

/// Dense matrix of an operator on `[-C, C]ⁿ`, rows and columns in lattice
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorKernel {
    spec: LatticeSpec,
    matrix: DMatrix<Complex64>,
    pub provenance: Provenance,
}

impl OperatorKernel {
    pub fn new(spec: LatticeSpec, matrix: DMatrix<Complex64>) -> Result<Self> {
        let n = spec.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Shape(format!(
                "kernel is {}×{}, lattice has {n} points",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numeric("kernel has non-finite entries".into()));
        }
        Ok(OperatorKernel { spec, matrix, provenance: Provenance::new() })
    }

    pub fn identity(spec: LatticeSpec) -> Self {
        let n = spec.len();
        OperatorKernel { spec, matrix: DMatrix::identity(n, n), provenance: Provenance::new() }
    }

    pub fn with_provenance(mut self, key: &str, value: impl Into<String>) -> Self {
        self.provenance.insert(key.into(), value.into());
        self
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// `K(k, l)`; zero off the lattice box.
    pub fn get(&self, k: &[i64], l: &[i64]) -> Complex64 {
        let cube = self.spec.cube();
        match (cube.index(k), cube.index(l)) {
            (Some(i), Some(j)) => self.matrix[(i, j)],
            _ => ZERO,
        }
    }

    /// `(K f)(k) = Σ_l K(k, l) f(l)`.
    pub fn apply(&self, f: &Signal) -> Result<Signal> {
        if *f.spec() != self.spec {
            return Err(Error::Shape("signal lives on a different lattice".into()));
        }
        let x = nalgebra::DVector::from_column_slice(f.values());
        let y = &self.matrix * x;
        Signal::new(self.spec, y.as_slice().to_vec())
    }

    pub fn adjoint(&self) -> OperatorKernel {
        OperatorKernel { spec: self.spec, matrix: self.matrix.adjoint(), provenance: self.provenance.clone() }
    }

    pub fn max_abs_diff(&self, other: &OperatorKernel) -> f64 {
        self.matrix.iter().zip(other.matrix.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.diagonal().iter().sum()
    }

    /// Entrywise `(Σ |K(k, l)|²)^{1/2}`.
    pub fn hs_norm(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `√((max_l Σ_k |K(k,l)|)·(max_k Σ_l |K(k,l)|))`.
    pub fn schur_bound(&self) -> f64 {
        let col = (0..self.size())
            .map(|l| self.matrix.column(l).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let row = (0..self.size())
            .map(|k| self.matrix.row(k).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        (col * row).sqrt()
    }

    /// Smallest eigenvalue of the Hermitian part `(K + Kᴴ)/2`.
    pub fn min_hermitian_eigenvalue(&self) -> f64 {
        let h = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> Result<String> {
        let values: Vec<Complex64> = self.row_major().collect();
        let doc = KernelDoc {
            n: self.spec.dim(),
            k: self.spec.support_radius(),
            c: self.spec.radius(),
            size: self.size(),
            order: "row-major".into(),
            provenance: self.provenance.clone(),
            values,
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<OperatorKernel> {
        let doc: KernelDoc = serde_json::from_str(text)?;
        if doc.order != "row-major" {
            return Err(Error::Format(format!("unsupported kernel order {:?}", doc.order)));
        }
        let spec = LatticeSpec::new(doc.n, doc.k, doc.c)?;
        if doc.values.len() != doc.size * doc.size {
            return Err(Error::Format(format!(
                "kernel of size {} needs {} entries, found {}",
                doc.size,
                doc.size * doc.size,
                doc.values.len()
            )));
        }
        let matrix = DMatrix::from_row_iterator(
            doc.size,
            doc.size,
            doc.values.iter().copied(),
        );
        let mut kernel = OperatorKernel::new(spec, matrix)?;
        kernel.provenance = doc.provenance;
        Ok(kernel)
    }

    /// Raw little-endian `f64` pairs `(re, im)` in row-major order at `path`,
    /// plus a sidecar `{"size", "order"}` at `path.json`. Returns the sidecar
    /// path.
    pub fn write_raw(&self, path: &Path) -> Result<PathBuf> {
        let mut bytes = Vec::with_capacity(16 * self.size() * self.size());
        for z in self.row_major() {
            bytes.extend_from_slice(&z.re.to_le_bytes());
            bytes.extend_from_slice(&z.im.to_le_bytes());
        }
        let io = |e: std::io::Error| Error::Format(format!("cannot write {}: {e}", path.display()));
        std::fs::File::create(path).and_then(|mut f| f.write_all(&bytes)).map_err(io)?;
        let mut sidecar = path.as_os_str().to_owned();
        sidecar.push(".json");
        let sidecar = PathBuf::from(sidecar);
        let doc = serde_json::json!({"size": self.size(), "order": "row-major"});
        std::fs::write(&sidecar, doc.to_string()).map_err(io)?;
        Ok(sidecar)
    }

    fn row_major(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.size()).flat_map(move |k| (0..self.size()).map(move |l| self.matrix[(k, l)]))
    }
}

#[derive(Serialize, Deserialize)]
struct KernelDoc {
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "C")]
    c: usize,
    size: usize,
    order: String,
    #[serde(default)]
    provenance: Provenance,
    #[serde(serialize_with = "ser_complex_vec", deserialize_with = "de_complex_vec")]
    values: Vec<Complex64>,
}

/// `K(k, l) = Σ_m M⁻ⁿ Σ_j ς(m, w_j) conj(M_{w_j}T_m g₁(l)) M_{w_j}T_m g₂(k)`.
///
/// Needs `deg ς + R + 2K ≤ M − 1` so that the matrix and [`apply`] describe
/// the same operator.
pub fn kernel(sigma: &PhaseSpaceField, g1: &Signal, g2: &Signal) -> Result<OperatorKernel> {
    check_inputs(sigma, g1, g2)?;
    check_quadrature(sigma)?;
    grid_kernel(sigma, g1, g2)
}

/// The kernel sum taken over the sample grid as it stands, with no
/// exactness requirement on `deg ς`. This is the operator that a symbol
/// sampled on the grid defines. It is linear in the samples, so positive and
/// negative parts of a symbol can be handled one at a time.
pub fn grid_kernel(sigma: &PhaseSpaceField, g1: &Signal, g2: &Signal) -> Result<OperatorKernel> {
    let spec = check_inputs(sigma, g1, g2)?;
    let torus = sigma.torus();
    let w = torus.weight();
    let m_cube = sigma.m_cube();
    let e1 = g1.support_entries();
    let e2 = g2.support_entries();
    let nodes = torus.multi_indices();
    // one (|supp g₂| × |supp g₁|) block per translate, summed in lattice order
    let blocks: Vec<Option<Vec<Complex64>>> = (0..m_cube.len())
        .into_par_iter()
        .map(|mi| {
            let slice = sigma.slice(mi);
            if slice.iter().all(|z| *z == ZERO) {
                return None;
            }
            let m = m_cube.point(mi);
            let shift = |s: &[i64]| -> Vec<i64> { s.iter().zip(&m).map(|(a, b)| a + b).collect() };
            let k2: Vec<Vec<i64>> = e2.iter().map(|(s, _)| shift(s)).collect();
            let k1: Vec<Vec<i64>> = e1.iter().map(|(s, _)| shift(s)).collect();
            let mut block = vec![ZERO; e2.len() * e1.len()];
            let mut a = vec![ZERO; e2.len()];
            let mut b = vec![ZERO; e1.len()];
            for (j, node) in nodes.iter().enumerate() {
                let c = slice[j] * w;
                if c == ZERO {
                    continue;
                }
                for ((ai, k), (_, gv)) in a.iter_mut().zip(&k2).zip(&e2) {
                    *ai = torus.character(k, node) * gv;
                }
                for ((bi, l), (_, gv)) in b.iter_mut().zip(&k1).zip(&e1) {
                    *bi = (torus.character(l, node) * gv).conj();
                }
                for (row, ai) in block.chunks_mut(e1.len()).zip(&a) {
                    let ca = c * ai;
                    for (out, bi) in row.iter_mut().zip(&b) {
                        *out += ca * bi;
                    }
                }
            }
            Some(block)
        })
        .collect();
    let cube = spec.cube();
    let mut matrix = DMatrix::from_element(spec.len(), spec.len(), ZERO);
    for (mi, block) in blocks.into_iter().enumerate() {
        let Some(block) = block else { continue };
        let m = m_cube.point(mi);
        let index = |s: &[i64]| -> usize {
            let k: Vec<i64> = s.iter().zip(&m).map(|(a, b)| a + b).collect();
            cube.index(&k).expect("translates by at most 2K of the window support stay within C ≥ 3K")
        };
        let rows: Vec<usize> = e2.iter().map(|(s, _)| index(s)).collect();
        let cols: Vec<usize> = e1.iter().map(|(s, _)| index(s)).collect();
        for (row, &r) in block.chunks(e1.len()).zip(&rows) {
            for (z, &c) in row.iter().zip(&cols) {
                matrix[(r, c)] += z;
            }
        }
    }
    OperatorKernel::new(spec, matrix)
}

/// Kernel of `(𝔏^{g₁,g₂}_ς)* = 𝔏^{g₂,g₁}_{conj ς}`.
pub fn adjoint_kernel(sigma: &PhaseSpaceField, g1: &Signal, g2: &Signal) -> Result<OperatorKernel> {
    kernel(&sigma.conj(), g2, g1)
}

/// `σ̃(m, w) = ⟨𝔏^{g,g}_ς M_wT_m g, M_wT_m g⟩` on the grid of `ς`.
pub fn sigma_tilde(sigma: &PhaseSpaceField, g: &Signal) -> Result<PhaseSpaceField> {
    let k = kernel(sigma, g, g)?;
    sigma_tilde_with(&k, sigma, g)
}

/// [`sigma_tilde`] from a kernel already assembled for `(ς, g, g)`.
pub fn sigma_tilde_with(kernel: &OperatorKernel, sigma: &PhaseSpaceField, g: &Signal) -> Result<PhaseSpaceField> {
    let spec = *sigma.spec();
    if *kernel.spec() != spec || *g.spec() != spec {
        return Err(Error::Shape("kernel, symbol and window live on different lattices".into()));
    }
    let torus = sigma.torus();
    let m_cube = Cube::new(spec.dim(), sigma.m_radius());
    let entries = g.support_entries();
    let cube = spec.cube();
    let nodes = torus.multi_indices();
    let t = torus.len();
    let mut values = vec![ZERO; m_cube.len() * t];
    values.par_chunks_mut(t).enumerate().for_each(|(mi, slice)| {
        let m = m_cube.point(mi);
        let points: Vec<Vec<i64>> =
            entries.iter().map(|(s, _)| s.iter().zip(&m).map(|(a, b)| a + b).collect()).collect();
        let idx: Vec<usize> = points
            .iter()
            .map(|k| cube.index(k).expect("atoms stay within the lattice box"))
            .collect();
        let mut a = vec![ZERO; entries.len()];
        for (node, out) in nodes.iter().zip(slice.iter_mut()) {
            for ((ai, k), (_, gv)) in a.iter_mut().zip(&points).zip(&entries) {
                *ai = torus.character(k, node) * gv;
            }
            let mut acc = ZERO;
            for (ak, &r) in a.iter().zip(&idx) {
                let row: Complex64 = a.iter().zip(&idx).map(|(al, &c)| kernel.matrix[(r, c)] * al).sum();
                acc += row * ak.conj();
            }
            *out = acc;
        }
    });
    PhaseSpaceField::new(spec, torus.clone(), sigma.m_radius(), 2 * spec.support_radius(), values)
}

/// `(Re ς)₊, (Re ς)₋, (Im ς)₊, (Im ς)₋` on the sample grid, so that
/// `ς = P₁ − P₂ + i(P₃ − P₄)`. The parts are grid functions and carry the
/// largest degree bound the grid admits.
pub fn symbol_parts(sigma: &PhaseSpaceField) -> Result<[PhaseSpaceField; 4]> {
    let top = sigma.torus().samples() - 1;
    let part = |f: fn(Complex64) -> f64| {
        let values = sigma.values().iter().map(|z| Complex64::new(f(*z), 0.0)).collect();
        PhaseSpaceField::new(*sigma.spec(), sigma.torus().clone(), sigma.m_radius(), top, values)
    };
    Ok([
        part(|z| z.re.max(0.0))?,
        part(|z| (-z.re).max(0.0))?,
        part(|z| z.im.max(0.0))?,
        part(|z| (-z.im).max(0.0))?,
    ])
}

/// Singular values, trace and Schatten norms of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    /// Descending.
    #[serde(serialize_with = "ser_f64_vec")]
    pub singular_values: Vec<f64>,
    #[serde(serialize_with = "ser_complex")]
    pub trace: Complex64,
    #[serde(serialize_with = "ser_f64")]
    pub hs_norm: f64,
    /// Keyed by `p` as written by [`schatten_key`].
    #[serde(serialize_with = "ser_f64_map")]
    pub schatten: BTreeMap<String, f64>,
    /// Number of singular values above `RANK_THRESHOLD · s₁`.
    pub rank: usize,
}

impl SpectralSummary {
    pub fn schatten(&self, p: f64) -> Option<f64> {
        self.schatten.get(&schatten_key(p)).copied()
    }

    /// `s₁`, zero for the zero operator.
    pub fn operator_norm(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub fn schatten_key(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

/// `(Σ sᵢ^p)^{1/p}` over all singular values; `s₁` for `p = ∞`.
pub fn schatten_norm(singular_values: &[f64], p: f64) -> f64 {
    let top = singular_values.iter().copied().fold(0.0, f64::max);
    if p.is_infinite() || top == 0.0 {
        return top;
    }
    top * singular_values.iter().map(|s| (s / top).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Singular values by dense SVD, descending.
pub fn singular_values(kernel: &OperatorKernel) -> Result<Vec<f64>> {
    let svd = kernel
        .matrix
        .clone()
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric(format!("SVD of the {n}×{n} kernel did not converge", n = kernel.size())))?;
    let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Dense SVD summary; every singular value enters the Schatten sums.
pub fn spectrum(kernel: &OperatorKernel, ps: &[f64]) -> Result<SpectralSummary> {
    if let Some(p) = ps.iter().find(|p| !(**p >= 1.0)) {
        return Err(Error::Domain(format!("Schatten exponent {p} must lie in [1, ∞]")));
    }
    let singular_values = singular_values(kernel)?;
    let hs_norm = kernel.hs_norm();
    let from_values: f64 = singular_values.iter().map(|s| s * s).sum();
    if (hs_norm * hs_norm - from_values).abs() > 1e-10 * from_values.max(hs_norm * hs_norm) {
        return Err(Error::Numeric(format!(
            "Hilbert-Schmidt norm² {:e} disagrees with Σsᵢ² = {from_values:e}",
            hs_norm * hs_norm
        )));
    }
    let s1 = singular_values.first().copied().unwrap_or(0.0);
    let rank = singular_values.iter().filter(|s| **s > RANK_THRESHOLD * s1).count();
    let schatten = ps.iter().map(|&p| (schatten_key(p), schatten_norm(&singular_values, p))).collect();
    Ok(SpectralSummary { singular_values, trace: kernel.trace(), hs_norm, schatten, rank })
}

/// Ids of the registered checks that exercise this module.
pub const INVARIANTS: &[&str] = &[
    "kernel_apply_consistency",
    "weak_pairing_consistency",
    "identity_operator",
    "adjoint_identity",
    "trace_identity",
    "hs_consistency",
    "operator_norm_bound",
    "schur_bound",
    "positive_semidefinite",
    "trace_norm_equals_trace",
    "trace_class_bound",
    "lower_symbol_sandwich",
    "schatten_log_convexity",
    "orlicz_modulation_boundedness",
];

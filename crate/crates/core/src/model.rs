//! Mechanical systems, their first-order form and the complex modal model.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ResonanceTriple, Result, SsmError};
use crate::linalg::{self, condition_number, eigen_real, is_symmetric};
use crate::poly::MultiIndex;

/// Semisimplicity threshold on the unit-column eigenvector matrix.
pub const SEMISIMPLE_COND_LIMIT: f64 = 1e8;
/// Margin, in units of `|Re λ₁|`, below which a non-resonance inequality counts
/// as violated.
pub const NONRESONANCE_TOL: f64 = 1e-8;
/// Above this `a + b`, a violation lists only the two extreme splits.
const MAX_LISTED_SPLITS: u32 = 16;
/// Relative window for reporting near inner resonances of imaginary parts.
pub const IMAG_RESONANCE_REPORT_TOL: f64 = 1e-2;

/// Scaling convention for eigenvectors, which fixes the meaning of the
/// reduced amplitude ρ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenNormalization {
    /// First non-negligible displacement entry equals one.
    #[default]
    FirstPosition,
    /// Unit Euclidean norm with the largest-magnitude entry real and positive.
    UnitNorm,
}

/// One term `coefficient · Π yᵢ^eᵢ ẏᵢ^eₙ₊ᵢ` of the nonlinear force on DOF `dof`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearTerm {
    pub dof: usize,
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

/// `M ÿ + C ẏ + K y + g(y, ẏ) = ε f cos(Ωt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanicalSystem {
    pub n: usize,
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub nonlinear: Vec<NonlinearTerm>,
    pub forcing: DVector<f64>,
    pub normalization: EigenNormalization,
    /// Named first-order state coordinates (e.g. `"tip"`).
    pub coordinates: BTreeMap<String, usize>,
}

/// On-disk layout of a [`MechanicalSystem`]. Matrices are dense row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    /// Provenance written by tools; ignored on ingestion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header: Option<serde_json::Value>,
    pub n: usize,
    pub mass: Vec<f64>,
    pub damping: Vec<f64>,
    pub stiffness: Vec<f64>,
    #[serde(default)]
    pub nonlinear: Vec<NonlinearTerm>,
    pub forcing: Vec<f64>,
    /// Forcing harmonic; only the fundamental (1) is supported.
    #[serde(default = "default_harmonic")]
    pub forcing_harmonic: u32,
    #[serde(default)]
    pub normalization: EigenNormalization,
    #[serde(default)]
    pub coordinates: BTreeMap<String, usize>,
}

fn default_harmonic() -> u32 {
    1
}

impl MechanicalSystem {
    pub fn new(
        mass: DMatrix<f64>,
        damping: DMatrix<f64>,
        stiffness: DMatrix<f64>,
        nonlinear: Vec<NonlinearTerm>,
        forcing: DVector<f64>,
    ) -> Result<Self> {
        let sys = MechanicalSystem {
            n: mass.nrows(),
            mass,
            damping,
            stiffness,
            nonlinear,
            forcing,
            normalization: EigenNormalization::default(),
            coordinates: BTreeMap::new(),
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn with_normalization(mut self, normalization: EigenNormalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn with_coordinate(mut self, name: &str, index: usize) -> Self {
        self.coordinates.insert(name.to_string(), index);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(SsmError::InvalidInput("system needs at least one degree of freedom".into()));
        }
        for (name, m) in [("M", &self.mass), ("C", &self.damping), ("K", &self.stiffness)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(SsmError::InvalidInput(format!("{name} must be {n}x{n}")));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(SsmError::InvalidInput(format!("{name} has non-finite entries")));
            }
            if !is_symmetric(m, 1e-10) {
                return Err(SsmError::InvalidInput(format!("{name} must be symmetric")));
            }
        }
        if self.mass.clone().cholesky().is_none() {
            return Err(SsmError::InvalidInput("mass matrix is not positive definite".into()));
        }
        if self.forcing.len() != n {
            return Err(SsmError::InvalidInput(format!("forcing vector must have length {n}")));
        }
        for (k, t) in self.nonlinear.iter().enumerate() {
            if t.dof >= n {
                return Err(SsmError::InvalidInput(format!("nonlinear term {k}: dof {} out of range", t.dof)));
            }
            if t.exponents.len() != 2 * n {
                return Err(SsmError::InvalidInput(format!(
                    "nonlinear term {k}: expected {} exponents, got {}",
                    2 * n,
                    t.exponents.len()
                )));
            }
            if t.exponents.iter().sum::<u32>() < 2 {
                return Err(SsmError::InvalidInput(format!(
                    "nonlinear term {k}: total degree must be at least 2"
                )));
            }
        }
        for (name, &idx) in &self.coordinates {
            if idx >= 2 * n {
                return Err(SsmError::InvalidInput(format!("coordinate '{name}' index {idx} out of range")));
            }
        }
        Ok(())
    }

    pub fn from_file_data(f: SystemFile) -> Result<Self> {
        let n = f.n;
        if f.forcing_harmonic != 1 {
            return Err(SsmError::InvalidInput(format!(
                "only single-harmonic cos(Ωt) forcing is supported (got harmonic {})",
                f.forcing_harmonic
            )));
        }
        let mat = |name: &str, v: &[f64]| -> Result<DMatrix<f64>> {
            if v.len() != n * n {
                return Err(SsmError::InvalidInput(format!("{name} must have {} entries", n * n)));
            }
            Ok(DMatrix::from_row_slice(n, n, v))
        };
        let sys = MechanicalSystem {
            n,
            mass: mat("mass", &f.mass)?,
            damping: mat("damping", &f.damping)?,
            stiffness: mat("stiffness", &f.stiffness)?,
            nonlinear: f.nonlinear,
            forcing: DVector::from_vec(f.forcing),
            normalization: f.normalization,
            coordinates: f.coordinates,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn to_file_data(&self) -> SystemFile {
        let rows = |m: &DMatrix<f64>| -> Vec<f64> {
            (0..self.n).flat_map(|i| (0..self.n).map(move |j| m[(i, j)])).collect()
        };
        SystemFile {
            header: None,
            n: self.n,
            mass: rows(&self.mass),
            damping: rows(&self.damping),
            stiffness: rows(&self.stiffness),
            nonlinear: self.nonlinear.clone(),
            forcing: self.forcing.iter().copied().collect(),
            forcing_harmonic: 1,
            normalization: self.normalization,
            coordinates: self.coordinates.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file_data(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file_data()).expect("system serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// One monomial of `G_p`: `coefficient · x^exponents` added to state row `row`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTerm {
    pub row: usize,
    pub coefficient: f64,
    pub exponents: MultiIndex,
}

/// `ẋ = A x + G_p(x) + ε F_p cos(Ωt)` with `x = (y, ẏ)`.
#[derive(Debug, Clone)]
pub struct FirstOrderSystem {
    pub n: usize,
    pub a: DMatrix<f64>,
    pub nonlinear: Vec<StateTerm>,
    pub forcing: DVector<f64>,
    pub normalization: EigenNormalization,
    pub coordinates: BTreeMap<String, usize>,
}

impl FirstOrderSystem {
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn nonlinear_force(&self, x: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for t in &self.nonlinear {
            out[t.row] += t.coefficient * monomial(&t.exponents, x);
        }
        out
    }

    pub fn vector_field(&self, x: &DVector<f64>, t: f64, eps: f64, omega: f64) -> DVector<f64> {
        let mut dx = &self.a * x + self.nonlinear_force(x.as_slice());
        if eps != 0.0 {
            dx.axpy(eps * (omega * t).cos(), &self.forcing, 1.0);
        }
        dx
    }

    /// Resolves a coordinate by name (`"tip"`), `y<k>`/`v<k>` shorthand or raw index.
    pub fn coordinate(&self, name: &str) -> Result<usize> {
        if let Some(&i) = self.coordinates.get(name) {
            return Ok(i);
        }
        let parsed = if let Some(rest) = name.strip_prefix('y') {
            rest.parse::<usize>().ok().and_then(|k| k.checked_sub(1))
        } else if let Some(rest) = name.strip_prefix('v') {
            rest.parse::<usize>().ok().and_then(|k| k.checked_sub(1)).map(|k| k + self.n)
        } else {
            name.parse::<usize>().ok()
        };
        match parsed {
            Some(i) if i < self.dim() => Ok(i),
            _ => Err(SsmError::InvalidInput(format!("unknown coordinate '{name}'"))),
        }
    }
}

pub(crate) fn monomial(e: &MultiIndex, x: &[f64]) -> f64 {
    e.support().fold(1.0, |acc, (i, p)| acc * x[i].powi(p as i32))
}

pub fn to_first_order(sys: &MechanicalSystem) -> Result<FirstOrderSystem> {
    sys.validate()?;
    let n = sys.n;
    let chol = sys
        .mass
        .clone()
        .cholesky()
        .ok_or_else(|| SsmError::InvalidInput("mass matrix is singular or indefinite".into()))?;
    let minv = chol.inverse();
    let mk = &minv * &sys.stiffness;
    let mc = &minv * &sys.damping;
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
        for j in 0..n {
            a[(n + i, j)] = -mk[(i, j)];
            a[(n + i, n + j)] = -mc[(i, j)];
        }
    }
    let mut nonlinear = Vec::new();
    for t in &sys.nonlinear {
        let e = MultiIndex::new(&t.exponents);
        for i in 0..n {
            let c = -minv[(i, t.dof)] * t.coefficient;
            if c != 0.0 {
                nonlinear.push(StateTerm {
                    row: n + i,
                    coefficient: c,
                    exponents: e.clone(),
                });
            }
        }
    }
    let mf = &minv * &sys.forcing;
    let mut forcing = DVector::zeros(2 * n);
    for i in 0..n {
        forcing[n + i] = mf[i];
    }
    Ok(FirstOrderSystem {
        n,
        a,
        nonlinear,
        forcing,
        normalization: sys.normalization,
        coordinates: sys.coordinates.clone(),
    })
}

/// A distinct monomial of `G_p` together with its modal coefficient vector,
/// so that `G_m(q) = Σ h_μ · μ(T q)`.
#[derive(Debug, Clone)]
pub struct ModalMonomial {
    pub exponents: MultiIndex,
    pub modal_coeffs: DVector<Complex64>,
}

#[derive(Debug, Clone)]
pub struct ModalModel {
    pub fos: FirstOrderSystem,
    /// Master pair at positions 0 and 1, the rest by decreasing real part.
    pub eigenvalues: Vec<Complex64>,
    pub t: DMatrix<Complex64>,
    pub t_inv: DMatrix<Complex64>,
    /// 1-based index of the selected complex pair among all pairs.
    pub master_mode: usize,
    /// Positions of the master pair in the fully sorted spectrum (1-based).
    pub master_sorted_positions: (usize, usize),
    pub monomials: Vec<ModalMonomial>,
    /// `T⁻¹ F_p`.
    pub forcing_modal: DVector<Complex64>,
}

impl ModalModel {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda1(&self) -> Complex64 {
        self.eigenvalues[0]
    }

    /// Physical state variables that appear in the nonlinearity.
    pub fn active_vars(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .monomials
            .iter()
            .flat_map(|m| m.exponents.support().map(|(i, _)| i).collect::<Vec<_>>())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// `G_m(q)` evaluated pointwise.
    pub fn modal_nonlinearity(&self, q: &DVector<Complex64>) -> DVector<Complex64> {
        let x = &self.t * q;
        let mut out = DVector::zeros(self.dim());
        for mono in &self.monomials {
            let v = mono
                .exponents
                .support()
                .fold(Complex64::new(1.0, 0.0), |acc, (i, p)| acc * x[i].powu(p));
            out.axpy(v, &mono.modal_coeffs, Complex64::new(1.0, 0.0));
        }
        out
    }

    /// Expands `G_m` into explicit polynomials over the 2n modal variables.
    /// Only sensible for small systems.
    pub fn expand_nonlinearity(&self, trunc_order: u32) -> Vec<crate::poly::MultiPoly> {
        use crate::poly::{substitute_truncated, MultiPoly};
        let dim = self.dim();
        let lin: Vec<MultiPoly> = (0..dim)
            .map(|r| {
                MultiPoly::from_terms(
                    dim,
                    trunc_order,
                    (0..dim).map(|j| (MultiIndex::unit(dim, j), self.t[(r, j)])),
                )
            })
            .collect();
        let mut rows = vec![MultiPoly::zero(dim, trunc_order); dim];
        for mono in &self.monomials {
            let p = substitute_truncated(&mono.exponents, Complex64::new(1.0, 0.0), &lin, trunc_order);
            for (i, row) in rows.iter_mut().enumerate() {
                if mono.modal_coeffs[i] != Complex64::new(0.0, 0.0) {
                    row.axpy(mono.modal_coeffs[i], &p);
                }
            }
        }
        rows
    }
}

/// Eigenvalues of `A` in the sorted order used throughout (decreasing real
/// part, positive imaginary part first within a pair).
pub fn sorted_eigenvalues(fos: &FirstOrderSystem) -> Result<Vec<Complex64>> {
    let mut v = eigen_real(&fos.a)?.values;
    v.sort_by(spectrum_order);
    Ok(v)
}

fn spectrum_order(x: &Complex64, y: &Complex64) -> std::cmp::Ordering {
    y.re.partial_cmp(&x.re)
        .unwrap()
        .then_with(|| y.im.partial_cmp(&x.im).unwrap())
}

fn normalize_column(v: &mut DVector<Complex64>, n: usize, rule: EigenNormalization) {
    match rule {
        EigenNormalization::FirstPosition => {
            let pmax = (0..n).map(|i| v[i].norm()).fold(0.0, f64::max);
            let pivot = (0..n)
                .find(|&i| v[i].norm() > 1e-8 * pmax)
                .map(|i| v[i])
                .unwrap_or(Complex64::new(1.0, 0.0));
            *v /= pivot;
        }
        EigenNormalization::UnitNorm => {
            let nrm = v.norm();
            *v /= Complex64::new(nrm, 0.0);
            let mut best = 0;
            for i in 0..v.len() {
                if v[i].norm() > v[best].norm() * (1.0 + 1e-12) {
                    best = i;
                }
            }
            let phase = v[best] / v[best].norm();
            *v /= phase;
        }
    }
}

/// Diagonalizes the first-order system and places the selected master pair first.
pub fn modal_decompose(fos: &FirstOrderSystem, master_mode: usize) -> Result<ModalModel> {
    let dim = fos.dim();
    let eig = eigen_real(&fos.a)?;
    for lam in &eig.values {
        if lam.re >= 0.0 {
            return Err(SsmError::UnstableOrigin { re: lam.re, im: lam.im });
        }
    }
    let cond = condition_number(&eig.vectors);
    if !(cond < SEMISIMPLE_COND_LIMIT) {
        return Err(SsmError::NotSemisimple {
            cond,
            limit: SEMISIMPLE_COND_LIMIT,
        });
    }

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| spectrum_order(&eig.values[i], &eig.values[j]));

    let pairs: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| eig.values[i].im > 0.0)
        .collect();
    if master_mode == 0 || master_mode > pairs.len() {
        return Err(SsmError::InvalidInput(format!(
            "master mode {master_mode} not available: system has {} complex pair(s)",
            pairs.len()
        )));
    }
    let m1 = pairs[master_mode - 1];
    let target = eig.values[m1].conj();
    let m2 = order
        .iter()
        .copied()
        .filter(|&j| j != m1)
        .min_by(|&p, &q| {
            (eig.values[p] - target)
                .norm()
                .partial_cmp(&(eig.values[q] - target).norm())
                .unwrap()
        })
        .expect("pair partner exists");
    let pos = |k: usize| order.iter().position(|&o| o == k).unwrap() + 1;
    let master_sorted_positions = (pos(m1), pos(m2));

    let mut perm = vec![m1, m2];
    perm.extend(order.iter().copied().filter(|&k| k != m1 && k != m2));

    let mut t = DMatrix::<Complex64>::zeros(dim, dim);
    let mut done = vec![false; dim];
    for (c, &k) in perm.iter().enumerate() {
        if done[c] {
            continue;
        }
        let mut v = eig.vectors.column(k).into_owned();
        normalize_column(&mut v, fos.n, fos.normalization);
        t.set_column(c, &v);
        done[c] = true;
        if eig.values[k].im != 0.0 {
            // partner column is the conjugate
            if let Some(c2) = (c + 1..dim).find(|&c2| !done[c2] && eig.values[perm[c2]] == eig.values[k].conj()) {
                t.set_column(c2, &v.map(|z| z.conj()));
                done[c2] = true;
            }
        }
    }
    let t_inv = t
        .clone()
        .try_inverse()
        .ok_or(SsmError::NotSemisimple { cond: f64::INFINITY, limit: SEMISIMPLE_COND_LIMIT })?;

    // refine eigenvalues through the diagonalized matrix, keeping exact conjugacy
    let ac = linalg::to_complex(&fos.a);
    let mut eigenvalues: Vec<Complex64> = (0..dim)
        .map(|i| {
            let col = &ac * t.column(i);
            (t_inv.row(i) * col)[(0, 0)]
        })
        .collect();
    for i in 0..dim {
        let raw = eig.values[perm[i]];
        if raw.im == 0.0 {
            eigenvalues[i].im = 0.0;
        }
    }
    for i in 0..dim {
        if eig.values[perm[i]].im > 0.0 {
            if let Some(j) = (0..dim).find(|&j| eig.values[perm[j]] == eig.values[perm[i]].conj()) {
                eigenvalues[j] = eigenvalues[i].conj();
            }
        }
    }

    let mut grouped: BTreeMap<MultiIndex, DVector<f64>> = BTreeMap::new();
    for term in &fos.nonlinear {
        grouped
            .entry(term.exponents.clone())
            .or_insert_with(|| DVector::zeros(dim))[term.row] += term.coefficient;
    }
    let monomials = grouped
        .into_iter()
        .map(|(exponents, coeffs)| ModalMonomial {
            exponents,
            modal_coeffs: &t_inv * linalg::to_complex(&DMatrix::from_column_slice(dim, 1, coeffs.as_slice())).column(0),
        })
        .collect();
    let forcing_modal = &t_inv * fos.forcing.map(|x| Complex64::new(x, 0.0));

    Ok(ModalModel {
        fos: fos.clone(),
        eigenvalues,
        t,
        t_inv,
        master_mode,
        master_sorted_positions,
        monomials,
        forcing_modal,
    })
}

/// `Int[min Re λ / Re λ₁]`, saturating for extremely stiff spectra.
pub fn spectral_quotient(mm: &ModalModel) -> u64 {
    let min_re = mm.eigenvalues.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let master_re = mm.eigenvalues[0].re.max(mm.eigenvalues[1].re);
    let q = (min_re / master_re).floor();
    if q >= u64::MAX as f64 {
        u64::MAX
    } else {
        (q as u64).max(1)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NearImaginaryResonance {
    pub a: u32,
    pub b: u32,
    pub l: usize,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonResonanceReport {
    pub sigma: u64,
    pub pass: bool,
    pub violations: Vec<ResonanceTriple>,
    /// Per enslaved eigenvalue (1-based sorted position in the master-first
    /// ordering), the smallest `|a Re λ₁ + b Re λ₂ − Re λ_l|` over admissible (a, b).
    pub margins: Vec<(usize, f64)>,
    pub min_margin: f64,
    /// Complex inner resonances `λ_l ≈ a λ₁ + b λ₂`, reported but not enforced.
    pub imaginary_near_resonances: Vec<NearImaginaryResonance>,
}

/// Checks `a Re λ₁ + b Re λ₂ ≠ Re λ_l` for `2 ≤ a + b ≤ sigma` and every enslaved λ_l.
pub fn check_nonresonance(mm: &ModalModel, sigma: u64) -> NonResonanceReport {
    check_nonresonance_with(mm, sigma, NONRESONANCE_TOL)
}

/// [`check_nonresonance`] with margin tolerance `tol`.
///
/// The sums `a Re λ₁ + b Re λ₂` form a lattice with spacing `|Re λ₁|`, so the
/// margin is judged against `tol·|Re λ₁|`, floored at the rounding level of
/// `λ_l`. Scaling by `|Re λ_l|` instead would flag every mode whose decay is
/// more than `1/(2 tol)` times faster than the master mode.
pub fn check_nonresonance_with(mm: &ModalModel, sigma: u64, tol: f64) -> NonResonanceReport {
    let (l1, l2) = (mm.eigenvalues[0], mm.eigenvalues[1]);
    let mut violations = Vec::new();
    let mut margins = Vec::new();
    let mut imaginary = Vec::new();
    let mut min_margin = f64::INFINITY;
    for (idx, lam) in mm.eigenvalues.iter().enumerate().skip(2) {
        let l = idx + 1;
        if sigma < 2 {
            continue;
        }
        // Re λ₁ = Re λ₂, so the sum depends on a + b only
        let ratio = lam.re / l1.re;
        let mut best = f64::INFINITY;
        let threshold = (tol * l1.re.abs()).max(64.0 * f64::EPSILON * lam.norm());
        for s in [ratio.floor(), ratio.ceil()] {
            if s < 2.0 || s > sigma as f64 {
                continue;
            }
            let gap = (s * l1.re - lam.re).abs();
            best = best.min(gap);
            if gap <= threshold {
                let s = s as u32;
                // every split of a + b = s is equivalent; list them all only when few
                if s <= MAX_LISTED_SPLITS {
                    violations.extend((0..=s).rev().map(|a| ResonanceTriple { a, b: s - a, l }));
                } else {
                    violations.push(ResonanceTriple { a: s, b: 0, l });
                    violations.push(ResonanceTriple { a: 0, b: s, l });
                }
            }
        }
        if best.is_finite() {
            margins.push((l, best));
            min_margin = min_margin.min(best);
        }
        let cap = sigma.min(9) as u32;
        for s in 2..=cap {
            for a in 0..=s {
                let b = s - a;
                let combo = l1 * a as f64 + l2 * b as f64;
                let gap = (combo.im - lam.im).abs() / lam.norm().max(f64::MIN_POSITIVE);
                if gap < IMAG_RESONANCE_REPORT_TOL {
                    imaginary.push(NearImaginaryResonance { a, b, l, relative_gap: gap });
                }
            }
        }
    }
    NonResonanceReport {
        sigma,
        pass: violations.is_empty(),
        violations,
        margins,
        min_margin,
        imaginary_near_resonances: imaginary,
    }
}

impl NonResonanceReport {
    pub fn into_result(self) -> Result<Self> {
        if self.pass {
            Ok(self)
        } else {
            Err(SsmError::NonResonance { violations: self.violations })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn shaw_pierre_first_order_matrix() {
        let fos = to_first_order(&presets::shaw_pierre()).unwrap();
        let expected = [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-6.0, 3.0, -(0.03 + 0.03 * 3f64.sqrt()), 0.03 * 3f64.sqrt()],
            [3.0, -6.0, 0.03 * 3f64.sqrt(), -(0.03 + 0.03 * 3f64.sqrt())],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((fos.a[(i, j)] - expected[i][j]).abs() < 1e-14, "A[{i},{j}]");
            }
        }
        // −κ/m x₁³ − α/m x₃³ on row 3
        assert_eq!(fos.nonlinear.len(), 2);
        for t in &fos.nonlinear {
            assert_eq!(t.row, 2);
        }
        assert_eq!(fos.forcing.as_slice(), &[0.0, 0.0, 3.0, 0.0]);
    }

    #[test]
    fn linear_system_has_no_nonlinear_terms() {
        let sys = MechanicalSystem::new(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            vec![],
            DVector::zeros(2),
        )
        .unwrap();
        assert!(to_first_order(&sys).unwrap().nonlinear.is_empty());
    }

    #[test]
    fn undamped_duffing_first_order() {
        let sys = MechanicalSystem::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
            vec![NonlinearTerm { dof: 0, coefficient: 1.0, exponents: vec![3, 0] }],
            DVector::from_element(1, 0.0),
        )
        .unwrap();
        let fos = to_first_order(&sys).unwrap();
        assert_eq!(fos.a.as_slice(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]).as_slice());
        assert_eq!(fos.nonlinear, vec![StateTerm { row: 1, coefficient: -1.0, exponents: MultiIndex::new(&[3, 0]) }]);
    }

    #[test]
    fn singular_mass_is_rejected() {
        let r = MechanicalSystem::new(
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::identity(1, 1),
            vec![],
            DVector::zeros(1),
        );
        assert!(matches!(r, Err(SsmError::InvalidInput(_))));
    }

    #[test]
    fn low_degree_term_is_rejected() {
        let r = MechanicalSystem::new(
            DMatrix::identity(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::identity(1, 1),
            vec![NonlinearTerm { dof: 0, coefficient: 1.0, exponents: vec![1, 0] }],
            DVector::zeros(1),
        );
        assert!(r.is_err());
    }

    #[test]
    fn shaw_pierre_spectrum_and_eigenvectors() {
        let mm = presets::shaw_pierre_modal();
        let lam = mm.lambda1();
        // oracle: closed form with ω₁ = √3, ζ₁ = 0.03/(2√3)
        let w1 = 3f64.sqrt();
        let z1 = 0.03 / (2.0 * w1);
        assert!((lam.re + z1 * w1).abs() < 1e-12);
        assert!((lam.im - (1.0 - z1 * z1).sqrt() * w1).abs() < 1e-12);
        assert!((lam.im - 1.731984).abs() < 5e-6);
        assert!((lam.re + 0.015).abs() < 1e-12);
        // T = [1,1,λ,λ]ᵀ for the master mode, [1,−1,λ₃,−λ₃]ᵀ for the second
        let l3 = mm.eigenvalues[2];
        let expect1 = [Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), lam, lam];
        let expect3 = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0), l3, -l3];
        for i in 0..4 {
            assert!((mm.t[(i, 0)] - expect1[i]).norm() < 1e-10);
            assert!((mm.t[(i, 1)] - expect1[i].conj()).norm() < 1e-10);
            assert!((mm.t[(i, 2)] - expect3[i]).norm() < 1e-10);
        }
        // T⁻¹ printed entry (1,3) = 1/(2(λ₁ − λ̄₁))
        let t13 = Complex64::new(1.0, 0.0) / (Complex64::new(2.0, 0.0) * (lam - lam.conj()));
        assert!((mm.t_inv[(0, 2)] - t13).norm() < 1e-10);
    }

    #[test]
    fn diagonalization_residuals() {
        let mm = presets::shaw_pierre_modal();
        let a = linalg::to_complex(&mm.fos.a);
        let lam = DMatrix::from_diagonal(&DVector::from_vec(mm.eigenvalues.clone()));
        let r = &a * &mm.t - &mm.t * lam;
        assert!(r.norm() <= 1e-10 * a.norm());
        let id = &mm.t * &mm.t_inv - DMatrix::identity(4, 4);
        assert!(id.norm() < 1e-10);
    }

    #[test]
    fn spectral_quotient_examples() {
        let mm = presets::shaw_pierre_modal();
        // Int[0.0669615 / 0.015] = 4
        assert!((mm.eigenvalues[2].re + 0.0669615).abs() < 1e-6);
        assert_eq!(spectral_quotient(&mm), 4);

        let uniform = diag_modal(&[-1.0, -1.0]);
        assert_eq!(spectral_quotient(&uniform), 1);
        let mixed = diag_modal(&[-1.0, -3.7]);
        assert_eq!(spectral_quotient(&mixed), 3);
    }

    /// Two decoupled oscillators with prescribed decay rates.
    fn diag_modal(decay: &[f64]) -> ModalModel {
        let n = decay.len();
        let k = DMatrix::from_fn(n, n, |i, j| if i == j { 4.0 + 40.0 * i as f64 } else { 0.0 });
        let c = DMatrix::from_fn(n, n, |i, j| if i == j { -2.0 * decay[i] } else { 0.0 });
        let sys = MechanicalSystem::new(DMatrix::identity(n, n), c, k, vec![], DVector::zeros(n)).unwrap();
        modal_decompose(&to_first_order(&sys).unwrap(), 1).unwrap()
    }

    #[test]
    fn nonresonance_examples() {
        let mm = presets::shaw_pierre_modal();
        let rep = check_nonresonance(&mm, spectral_quotient(&mm));
        assert!(rep.pass);
        assert!((rep.min_margin - 0.0069615).abs() < 1e-6, "{}", rep.min_margin);

        // Re λ₃ = 2 Re λ₁
        let res = diag_modal(&[-0.1, -0.2]);
        let rep = check_nonresonance(&res, spectral_quotient(&res).max(2));
        assert!(!rep.pass);
        assert_eq!(rep.violations[0], ResonanceTriple { a: 2, b: 0, l: 3 });
        assert!(matches!(rep.into_result(), Err(SsmError::NonResonance { .. })));

        // single DOF: nothing enslaved
        let single = diag_modal(&[-0.1]);
        let rep = check_nonresonance(&single, 2);
        assert!(rep.pass && rep.violations.is_empty());
    }

    #[test]
    fn unstable_origin_is_rejected() {
        let sys = MechanicalSystem::new(
            DMatrix::identity(1, 1),
            DMatrix::from_element(1, 1, -0.1),
            DMatrix::identity(1, 1),
            vec![],
            DVector::zeros(1),
        )
        .unwrap();
        let r = modal_decompose(&to_first_order(&sys).unwrap(), 1);
        assert!(matches!(r, Err(SsmError::UnstableOrigin { .. })));
    }

    #[test]
    fn modal_nonlinearity_matches_physical_transform() {
        // q̇ = Λq + G_m(q) with G_m(q) = T⁻¹ G_p(Tq): check the conjugation symmetry
        let mm = presets::shaw_pierre_modal();
        let expanded = mm.expand_nonlinearity(3);
        // rows 0/1 are conjugate under swapping q₁↔q₂, q₃↔q₄
        for (m, c) in expanded[0].terms() {
            let e = m.as_slice();
            let swapped = MultiIndex::new(&[e[1], e[0], e[3], e[2]]);
            assert!((expanded[1].coeff(&swapped) - c.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn system_file_round_trip() {
        let sys = presets::shaw_pierre();
        let back = MechanicalSystem::from_json(&sys.to_json()).unwrap();
        assert_eq!(sys, back);
        let mut bad = sys.to_file_data();
        bad.forcing_harmonic = 2;
        assert!(MechanicalSystem::from_file_data(bad).is_err());
    }
}

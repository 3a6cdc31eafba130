//! Truncated multivariate polynomials with complex coefficients.
//!
//! Terms are keyed by [`MultiIndex`] and kept in graded lexicographic order
//! (total degree first, then larger leading exponents first), so iteration and
//! every serialized dump are deterministic.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Result, SsmError};

/// Relative drop tolerance applied per total degree after arithmetic.
pub const DROP_TOLERANCE: f64 = 1e-14;

/// Exponent vector of a monomial.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(SmallVec<[u32; 4]>);

impl MultiIndex {
    pub fn new(exponents: &[u32]) -> Self {
        MultiIndex(SmallVec::from_slice(exponents))
    }

    pub fn zeros(num_vars: usize) -> Self {
        MultiIndex(SmallVec::from_elem(0, num_vars))
    }

    pub fn unit(num_vars: usize, var: usize) -> Self {
        let mut m = Self::zeros(num_vars);
        m.0[var] = 1;
        m
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, var: usize) -> u32 {
        self.0[var]
    }

    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(other.0.iter()).map(|(a, b)| a + b).collect())
    }

    /// Variables with a nonzero exponent.
    pub fn support(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.0.iter().enumerate().filter(|(_, &e)| e > 0).map(|(i, &e)| (i, e))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            // larger leading exponent sorts first within a degree
            for (a, b) in self.0.iter().zip(other.0.iter()) {
                match b.cmp(a) {
                    Ordering::Equal => continue,
                    ord => return ord,
                }
            }
            self.0.len().cmp(&other.0.len())
        })
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0.as_slice())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Sparse polynomial in `num_vars` variables, truncated at total degree `trunc_order`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPoly {
    num_vars: usize,
    trunc_order: u32,
    terms: BTreeMap<MultiIndex, Complex64>,
}

impl fmt::Debug for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MultiPoly[{}; ≤{}]{{", self.num_vars, self.trunc_order)?;
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6e}{:+.6e}i){}", c.re, c.im, m)?;
        }
        write!(f, "}}")
    }
}

impl MultiPoly {
    pub fn zero(num_vars: usize, trunc_order: u32) -> Self {
        MultiPoly {
            num_vars,
            trunc_order,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(num_vars: usize, trunc_order: u32, c: Complex64) -> Self {
        Self::from_terms(num_vars, trunc_order, [(MultiIndex::zeros(num_vars), c)])
    }

    /// The coordinate function of variable `var`.
    pub fn variable(num_vars: usize, trunc_order: u32, var: usize) -> Self {
        Self::from_terms(
            num_vars,
            trunc_order,
            [(MultiIndex::unit(num_vars, var), Complex64::new(1.0, 0.0))],
        )
    }

    /// Builds a polynomial, summing duplicate indices and dropping terms above
    /// the truncation order.
    pub fn from_terms<I>(num_vars: usize, trunc_order: u32, terms: I) -> Self
    where
        I: IntoIterator<Item = (MultiIndex, Complex64)>,
    {
        let mut p = Self::zero(num_vars, trunc_order);
        for (m, c) in terms {
            assert_eq!(m.len(), num_vars, "multi-index length mismatch");
            if m.degree() <= trunc_order {
                *p.terms.entry(m).or_insert(Complex64::new(0.0, 0.0)) += c;
            }
        }
        p.prune();
        p
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn trunc_order(&self) -> u32 {
        self.trunc_order
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &MultiIndex) -> Complex64 {
        self.terms.get(m).copied().unwrap_or_default()
    }

    /// Overwrites one coefficient; zero removes the term. Indices beyond the
    /// truncation order are ignored.
    pub fn set_coeff(&mut self, m: MultiIndex, c: Complex64) {
        assert_eq!(m.len(), self.num_vars, "multi-index length mismatch");
        if m.degree() > self.trunc_order {
            return;
        }
        if c == Complex64::new(0.0, 0.0) {
            self.terms.remove(&m);
        } else {
            self.terms.insert(m, c);
        }
    }

    /// Highest total degree present, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().next_back().map(MultiIndex::degree)
    }

    /// Terms of total degree exactly `d`.
    pub fn homogeneous(&self, d: u32) -> MultiPoly {
        MultiPoly {
            num_vars: self.num_vars,
            trunc_order: self.trunc_order,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() == d)
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
        }
    }

    /// Terms with total degree in `lo..=hi`.
    pub fn degree_range(&self, lo: u32, hi: u32) -> MultiPoly {
        MultiPoly {
            num_vars: self.num_vars,
            trunc_order: self.trunc_order,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| (lo..=hi).contains(&m.degree()))
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
        }
    }

    /// Same terms under a different truncation order (terms above it dropped).
    pub fn with_trunc_order(&self, trunc_order: u32) -> MultiPoly {
        MultiPoly {
            num_vars: self.num_vars,
            trunc_order,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() <= trunc_order)
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> MultiPoly {
        let mut p = MultiPoly {
            num_vars: self.num_vars,
            trunc_order: self.trunc_order,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect(),
        };
        p.prune();
        p
    }

    pub fn conj(&self) -> MultiPoly {
        MultiPoly {
            num_vars: self.num_vars,
            trunc_order: self.trunc_order,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c.conj())).collect(),
        }
    }

    /// Reverses the variable order; for two variables this is the s₁ ↔ s₂ swap.
    pub fn reverse_vars(&self) -> MultiPoly {
        MultiPoly {
            num_vars: self.num_vars,
            trunc_order: self.trunc_order,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| {
                    let mut e: Vec<u32> = m.as_slice().to_vec();
                    e.reverse();
                    (MultiIndex::new(&e), *c)
                })
                .collect(),
        }
    }

    fn check_compatible(&self, other: &MultiPoly) -> Result<()> {
        if self.num_vars != other.num_vars || self.trunc_order != other.trunc_order {
            return Err(SsmError::InvalidInput(format!(
                "polynomial shape mismatch: ({} vars, order {}) vs ({} vars, order {})",
                self.num_vars, self.trunc_order, other.num_vars, other.trunc_order
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.add_assign_unchecked(other, Complex64::new(1.0, 0.0));
        out.prune();
        Ok(out)
    }

    pub fn sub(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.add_assign_unchecked(other, Complex64::new(-1.0, 0.0));
        out.prune();
        Ok(out)
    }

    /// `self += s * other`, ignoring the other polynomial's truncation order.
    pub fn axpy(&mut self, s: Complex64, other: &MultiPoly) {
        assert_eq!(self.num_vars, other.num_vars, "variable count mismatch");
        self.add_assign_unchecked(other, s);
        self.prune();
    }

    fn add_assign_unchecked(&mut self, other: &MultiPoly, s: Complex64) {
        for (m, c) in &other.terms {
            if m.degree() <= self.trunc_order {
                *self.terms.entry(m.clone()).or_insert(Complex64::new(0.0, 0.0)) += c * s;
            }
        }
    }

    pub fn mul(&self, other: &MultiPoly) -> Result<MultiPoly> {
        self.check_compatible(other)?;
        Ok(self.mul_truncated(other, self.trunc_order))
    }

    /// Product keeping only terms of total degree ≤ `max_degree` (also capped
    /// by this polynomial's truncation order).
    pub fn mul_truncated(&self, other: &MultiPoly, max_degree: u32) -> MultiPoly {
        assert_eq!(self.num_vars, other.num_vars, "variable count mismatch");
        let cap = max_degree.min(self.trunc_order);
        let mut out = MultiPoly::zero(self.num_vars, self.trunc_order);
        if self.is_zero() || other.is_zero() {
            return out;
        }
        if self.num_vars == 2 {
            // dense accumulation, rank = d(d+1)/2 + m₂ matches graded-lex order
            let size = ((cap + 1) * (cap + 2) / 2) as usize;
            let mut acc = vec![Complex64::new(0.0, 0.0); size];
            let mut hit = vec![false; size];
            let rhs: Vec<(u32, u32, Complex64)> = other
                .terms
                .iter()
                .map(|(m, c)| (m.get(0), m.get(1), *c))
                .collect();
            for (ma, ca) in &self.terms {
                let (a0, a1) = (ma.get(0), ma.get(1));
                let da = a0 + a1;
                if da > cap {
                    break;
                }
                for &(b0, b1, cb) in &rhs {
                    let d = da + b0 + b1;
                    if d > cap {
                        break;
                    }
                    let r = (d * (d + 1) / 2 + a1 + b1) as usize;
                    acc[r] += ca * cb;
                    hit[r] = true;
                }
            }
            let mut r = 0usize;
            for d in 0..=cap {
                for m1 in 0..=d {
                    if hit[r] {
                        out.terms.insert(MultiIndex::new(&[d - m1, m1]), acc[r]);
                    }
                    r += 1;
                }
            }
        } else {
            let mut acc: HashMap<MultiIndex, Complex64> = HashMap::new();
            for (ma, ca) in &self.terms {
                let da = ma.degree();
                if da > cap {
                    break;
                }
                for (mb, cb) in &other.terms {
                    if da + mb.degree() > cap {
                        break;
                    }
                    *acc.entry(ma.plus(mb)).or_insert(Complex64::new(0.0, 0.0)) += ca * cb;
                }
            }
            out.terms = acc.into_iter().collect();
        }
        out.prune();
        out
    }

    /// Integer power, truncated.
    pub fn pow(&self, k: u32) -> MultiPoly {
        self.pow_truncated(k, self.trunc_order)
    }

    pub fn pow_truncated(&self, k: u32, max_degree: u32) -> MultiPoly {
        let mut result = MultiPoly::constant(self.num_vars, self.trunc_order, Complex64::new(1.0, 0.0));
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_truncated(&base, max_degree);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_truncated(&base, max_degree);
            }
        }
        result
    }

    /// Formal partial derivative with respect to variable `var`.
    pub fn diff(&self, var: usize) -> Result<MultiPoly> {
        if var >= self.num_vars {
            return Err(SsmError::InvalidInput(format!(
                "derivative variable {var} out of range for {} variables",
                self.num_vars
            )));
        }
        let mut out = MultiPoly::zero(self.num_vars, self.trunc_order);
        for (m, c) in &self.terms {
            let e = m.get(var);
            if e == 0 {
                continue;
            }
            let mut d = m.clone();
            d.0[var] -= 1;
            out.terms.insert(d, c * e as f64);
        }
        Ok(out)
    }

    pub fn eval(&self, point: &[Complex64]) -> Complex64 {
        assert_eq!(point.len(), self.num_vars, "evaluation point dimension mismatch");
        let max_deg = self.degree().unwrap_or(0) as usize;
        // power tables per variable
        let powers: Vec<Vec<Complex64>> = point
            .iter()
            .map(|&z| {
                let mut v = Vec::with_capacity(max_deg + 1);
                let mut acc = Complex64::new(1.0, 0.0);
                for _ in 0..=max_deg {
                    v.push(acc);
                    acc *= z;
                }
                v
            })
            .collect();
        self.terms
            .iter()
            .map(|(m, c)| {
                m.support()
                    .fold(*c, |acc, (i, e)| acc * powers[i][e as usize])
            })
            .sum()
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Drops exact zeros and, within each total degree, coefficients below
    /// `DROP_TOLERANCE` times the largest coefficient of that degree.
    fn prune(&mut self) {
        let mut max_by_degree: HashMap<u32, f64> = HashMap::new();
        for (m, c) in &self.terms {
            let e = max_by_degree.entry(m.degree()).or_insert(0.0);
            *e = e.max(c.norm());
        }
        self.terms.retain(|m, c| {
            let n = c.norm();
            n > 0.0 && n > DROP_TOLERANCE * max_by_degree[&m.degree()]
        });
    }
}

pub fn poly_add(p: &MultiPoly, q: &MultiPoly) -> Result<MultiPoly> {
    p.add(q)
}

pub fn poly_mul(p: &MultiPoly, q: &MultiPoly) -> Result<MultiPoly> {
    p.mul(q)
}

pub fn poly_diff(p: &MultiPoly, var: usize) -> Result<MultiPoly> {
    p.diff(var)
}

/// Composes one monomial term `coefficient · x^exponents` with the map
/// `x_i = w[i](s)`. Terms whose degree exceeds the truncation order of `w`
/// vanish identically rather than raising an error.
pub fn poly_substitute(
    exponents: &MultiIndex,
    coefficient: Complex64,
    w: &[MultiPoly],
) -> Result<MultiPoly> {
    if exponents.len() != w.len() {
        return Err(SsmError::InvalidInput(format!(
            "term has {} exponents but {} substitution polynomials were given",
            exponents.len(),
            w.len()
        )));
    }
    let first = w
        .first()
        .ok_or_else(|| SsmError::InvalidInput("empty substitution".into()))?;
    let (nv, order) = (first.num_vars(), first.trunc_order());
    if w.iter().any(|p| p.num_vars() != nv || p.trunc_order() != order) {
        return Err(SsmError::InvalidInput(
            "substitution polynomials must share shape".into(),
        ));
    }
    Ok(substitute_truncated(exponents, coefficient, w, order))
}

/// As [`poly_substitute`] but only keeping degrees ≤ `max_degree`.
pub(crate) fn substitute_truncated(
    exponents: &MultiIndex,
    coefficient: Complex64,
    w: &[MultiPoly],
    max_degree: u32,
) -> MultiPoly {
    let first = &w[0];
    let mut acc = MultiPoly::constant(first.num_vars(), first.trunc_order(), coefficient);
    for (i, e) in exponents.support() {
        acc = acc.mul_truncated(&w[i].pow_truncated(e, max_degree), max_degree);
        if acc.is_zero() {
            break;
        }
    }
    acc
}

//! Autonomous spectral submanifold: `Λ W₀ + G_m(W₀) = D W₀ · R₀`, solved one
//! homogeneous degree at a time in normal-form style.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Result, SsmError};
use crate::model::ModalModel;
use crate::poly::MultiPoly;
use crate::series::{MonomialEngine, Series2};

/// Relative size below which a non-resonant denominator is treated as singular.
pub const INTERNAL_RESONANCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct AutonomousSsm {
    pub order: u32,
    pub lambda: Complex64,
    /// Modal eigenvalues in master-first order.
    pub eigenvalues: Vec<Complex64>,
    /// One series per modal coordinate.
    pub w0: Vec<Series2>,
    /// Reduced dynamics `ṡ₁ = r₀[0](s)`, `ṡ₂ = r₀[1](s)`.
    pub r0: [Series2; 2],
    /// `γ_j` multiplies `s₁^(j+1) s₂^j`; `gamma[0]` is `γ₁`.
    pub gamma: Vec<Complex64>,
}

impl AutonomousSsm {
    /// Number of normal-form coefficients `M` with `2M + 1 ≤ order`.
    pub fn half_order(&self) -> usize {
        self.gamma.len()
    }

    pub fn w0_polys(&self) -> Vec<MultiPoly> {
        self.w0.iter().map(Series2::to_poly).collect()
    }

    /// `a(ρ)` coefficients of `ρ, ρ³, …`.
    pub fn a_coeffs(&self) -> Vec<f64> {
        std::iter::once(self.lambda.re).chain(self.gamma.iter().map(|g| g.re)).collect()
    }

    /// `b(ρ)` coefficients of `1, ρ², …`.
    pub fn b_coeffs(&self) -> Vec<f64> {
        std::iter::once(self.lambda.im).chain(self.gamma.iter().map(|g| g.im)).collect()
    }

    /// Keeps the expansion up to a lower order, exactly as if it had been
    /// computed there.
    pub fn truncated(&self, order: u32) -> AutonomousSsm {
        let order = order.min(self.order);
        let m = ((order.saturating_sub(1)) / 2) as usize;
        AutonomousSsm {
            order,
            lambda: self.lambda,
            eigenvalues: self.eigenvalues.clone(),
            w0: self.w0.iter().map(|w| w.resized(order)).collect(),
            r0: [self.r0[0].resized(order), self.r0[1].resized(order)],
            gamma: self.gamma[..m.min(self.gamma.len())].to_vec(),
        }
    }

    /// `W₀(s)` as a modal vector.
    pub fn eval(&self, s1: Complex64, s2: Complex64) -> DVector<Complex64> {
        DVector::from_iterator(self.w0.len(), self.w0.iter().map(|w| w.eval(s1, s2)))
    }
}

/// `(λᵢ − ⟨m, λ_E⟩)` for row `i` and multi-index `(m₁, m₂)`.
fn denominator(lam: &[Complex64], i: usize, m1: u32, m2: u32) -> Complex64 {
    lam[i] - lam[0] * m1 as f64 - lam[1] * m2 as f64
}

pub(crate) fn is_resonant(i: usize, m1: u32, m2: u32) -> bool {
    (i == 0 && m1 == m2 + 1) || (i == 1 && m2 == m1 + 1)
}

pub(crate) struct Composition {
    pub engine: MonomialEngine,
    /// Modal coefficient vectors of each registered monomial.
    pub coeffs: Vec<DVector<Complex64>>,
}

impl Composition {
    pub fn new(mm: &ModalModel) -> Self {
        let monos: Vec<_> = mm.monomials.iter().map(|m| m.exponents.clone()).collect();
        Composition {
            engine: MonomialEngine::new(&monos),
            coeffs: mm.monomials.iter().map(|m| m.modal_coeffs.clone()).collect(),
        }
    }

    /// Writes degree-`d` of `x_r = Σ_j T[r,j] W_j` into the variable slots.
    pub fn fill_vars(&self, mm: &ModalModel, w: &[Series2], vals: &mut [Series2], d: u32) {
        for (k, &r) in self.engine.vars.iter().enumerate() {
            let blk = vals[k].block_mut(d);
            blk.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            for (j, wj) in w.iter().enumerate() {
                let t = mm.t[(r, j)];
                if t == Complex64::new(0.0, 0.0) || d > wj.order() {
                    continue;
                }
                for (c, x) in blk.iter_mut().zip(wj.block(d)) {
                    *c += t * x;
                }
            }
        }
    }

    /// Degree-`d` block of `Σ_μ h_μ[i] μ` for row `i`.
    pub fn row_block(&self, vals: &[Series2], i: usize, d: u32) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); d as usize + 1];
        for (h, &root) in self.coeffs.iter().zip(&self.engine.roots) {
            let hi = h[i];
            if hi == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, v) in out.iter_mut().zip(vals[root].block(d)) {
                *o += hi * v;
            }
        }
        out
    }
}

/// Solves the autonomous invariance equation through total degree `order`.
pub fn compute_autonomous_ssm(mm: &ModalModel, order: u32) -> Result<AutonomousSsm> {
    if order < 1 {
        return Err(SsmError::InvalidInput("expansion order must be at least 1".into()));
    }
    let dim = mm.dim();
    let lam = &mm.eigenvalues;
    let one = Complex64::new(1.0, 0.0);

    let mut w = vec![Series2::zeros(order); dim];
    w[0].set(1, 0, one);
    w[1].set(0, 1, one);
    let mut r0 = [Series2::zeros(order), Series2::zeros(order)];
    r0[0].set(1, 0, lam[0]);
    r0[1].set(0, 1, lam[1]);
    let mut gamma: Vec<Complex64> = Vec::new();
    let mut gamma_conj: Vec<Complex64> = Vec::new();

    let comp = Composition::new(mm);
    let mut vals = comp.engine.workspace(order);
    comp.fill_vars(mm, &w, &mut vals, 1);

    for d in 2..=order {
        comp.engine.advance(&mut vals, d);
        for i in 0..dim {
            let g = comp.row_block(&vals, i, d);
            for m2 in 0..=d {
                let m1 = d - m2;
                let mut rhs = -g[m2 as usize];
                // Σ_j ∂_j W_iⁿˡ · R_jⁿˡ: R₀ⁿˡ = Σ γ_k s₁^(k+1) s₂^k, R₁ⁿˡ its conjugate partner
                for k in 1..=gamma.len() as u32 {
                    if d < 2 * k + 2 || m1 < k || m2 < k {
                        continue;
                    }
                    let (a, b) = (m1 - k, m2 - k);
                    let wc = w[i].coeff(a, b);
                    if wc != Complex64::new(0.0, 0.0) {
                        let g1 = gamma[k as usize - 1];
                        let g2 = gamma_conj[k as usize - 1];
                        rhs += wc * (g1 * a as f64 + g2 * b as f64);
                    }
                }
                if is_resonant(i, m1, m2) {
                    r0[i].set(m1, m2, -rhs);
                } else {
                    let den = denominator(lam, i, m1, m2);
                    if den.norm() < INTERNAL_RESONANCE_TOL * lam[i].norm() {
                        return Err(SsmError::InternalResonance {
                            row: i + 1,
                            index: format!("({m1},{m2})"),
                        });
                    }
                    w[i].set(m1, m2, rhs / den);
                }
            }
        }
        if d % 2 == 1 {
            let k = (d - 1) / 2;
            gamma.push(r0[0].coeff(k + 1, k));
            gamma_conj.push(r0[1].coeff(k, k + 1));
        }
        comp.fill_vars(mm, &w, &mut vals, d);
    }

    Ok(AutonomousSsm {
        order,
        lambda: lam[0],
        eigenvalues: lam.clone(),
        w0: w,
        r0,
        gamma,
    })
}

/// Residual `Λ W₀ + G_m(W₀) − D W₀ · R₀` as series, with the composition
/// carried out without truncation.
pub fn invariance_residual_series(ssm: &AutonomousSsm, mm: &ModalModel) -> Vec<Series2> {
    let max_mono = mm.monomials.iter().map(|m| m.exponents.degree()).max().unwrap_or(1).max(1);
    let top = ssm.order * max_mono + ssm.order;
    let comp = Composition::new(mm);
    let w: Vec<Series2> = ssm.w0.iter().map(|s| s.resized(top)).collect();
    let mut vals = comp.engine.workspace(top);
    for d in 1..=ssm.order {
        comp.fill_vars(mm, &w, &mut vals, d);
    }
    for d in 2..=top {
        comp.engine.advance(&mut vals, d);
    }
    let r: Vec<Series2> = ssm.r0.iter().map(|s| s.resized(top)).collect();
    (0..mm.dim())
        .map(|i| {
            let mut res = w[i].clone();
            res.scale(mm.eigenvalues[i]);
            for d in 2..=top {
                let g = comp.row_block(&vals, i, d);
                for (c, x) in res.block_mut(d).iter_mut().zip(g) {
                    *c += x;
                }
            }
            for (j, rj) in r.iter().enumerate() {
                let dw = w[i].diff(j);
                res.axpy(Complex64::new(-1.0, 0.0), &crate::series::mul(&dw, rj, top));
            }
            res
        })
        .collect()
}

/// Maximum over samples of `‖residual(s)‖ / ‖Λ W₀(s)‖`.
pub fn invariance_residual(ssm: &AutonomousSsm, mm: &ModalModel, samples: &[(Complex64, Complex64)]) -> f64 {
    let res = invariance_residual_series(ssm, mm);
    samples
        .iter()
        .map(|&(s1, s2)| {
            let num: f64 = res.iter().map(|r| r.eval(s1, s2).norm_sqr()).sum::<f64>().sqrt();
            let den: f64 = ssm
                .w0
                .iter()
                .zip(&mm.eigenvalues)
                .map(|(w, l)| (w.eval(s1, s2) * l).norm_sqr())
                .sum::<f64>()
                .sqrt();
            num / den
        })
        .fold(0.0, f64::max)
}

/// The same residual evaluated pointwise in floating point; limited by
/// cancellation to roughly machine precision relative to `‖Λ W₀‖`.
pub fn invariance_residual_pointwise(ssm: &AutonomousSsm, mm: &ModalModel, samples: &[(Complex64, Complex64)]) -> f64 {
    let dw: Vec<[Series2; 2]> = ssm.w0.iter().map(|w| [w.diff(0), w.diff(1)]).collect();
    samples
        .iter()
        .map(|&(s1, s2)| {
            let q = ssm.eval(s1, s2);
            let lw = DVector::from_iterator(q.len(), q.iter().zip(&mm.eigenvalues).map(|(x, l)| x * l));
            let g = mm.modal_nonlinearity(&q);
            let r = [ssm.r0[0].eval(s1, s2), ssm.r0[1].eval(s1, s2)];
            let dwr = DVector::from_iterator(q.len(), dw.iter().map(|d| d[0].eval(s1, s2) * r[0] + d[1].eval(s1, s2) * r[1]));
            (&lw + g - dwr).norm() / lw.norm()
        })
        .fold(0.0, f64::max)
}

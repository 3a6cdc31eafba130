//! First-order-in-ε (time-periodic) part of the SSM.
//!
//! With `W₁ = A(s)e^{iφ} + B(s)e^{−iφ}` and `R₁ = C(s)e^{iφ} + D(s)e^{−iφ}`, each
//! coefficient obeys `(λᵢ − ⟨k,λ⟩ ∓ iΩ)·{A,B}ᵢₖ = δ·{C,D}ᵢₖ + {α,β}ᵢₖ`, where α, β
//! collect lower-degree data. Near-resonant combinations are moved into the
//! reduced dynamics instead of being divided out.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;

use crate::error::{Result, SsmError};
use crate::model::ModalModel;
use crate::series::{mul, Series2};
use crate::ssm_auto::{AutonomousSsm, Composition};

/// Absolute size below which a forced denominator counts as singular.
pub const NEAR_RESONANCE_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone)]
pub struct ForcedReduction {
    pub omega: f64,
    /// Expansion order: coefficients of total degree `< order` are computed.
    pub order: u32,
    /// `c_{1,0} = ½ (T⁻¹F_p)₁`.
    pub c00: Complex64,
    /// `c_{1,(i,i)}` for `i = 1, 2, …` with `2i < order`.
    pub c_ii: Vec<Complex64>,
    /// `d_{1,(i+1,i−1)}` for `i = 1, 2, …` with `2i < order`.
    pub d_pm: Vec<Complex64>,
    /// e^{iφ} coefficients of `W₁`, one series per modal row.
    pub a: Vec<Series2>,
    /// e^{−iφ} coefficients of `W₁`.
    pub b: Vec<Series2>,
    /// e^{iφ} part of `R₁` (rows 1, 2).
    pub c: [Series2; 2],
    /// e^{−iφ} part of `R₁`.
    pub d: [Series2; 2],
}

impl ForcedReduction {
    /// `W₁(s, φ)` as a modal vector.
    pub fn w1(&self, s1: Complex64, s2: Complex64, phi: f64) -> Vec<Complex64> {
        let e = Complex64::from_polar(1.0, phi);
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| a.eval(s1, s2) * e + b.eval(s1, s2) * e.conj())
            .collect()
    }
}

/// `½ (T⁻¹ F_p)₁`, independent of Ω.
pub fn leading_forcing_coefficient(mm: &ModalModel) -> Complex64 {
    mm.forcing_modal[0] * 0.5
}

/// Structural resonance pattern of the e^{iφ} (`plus`) and e^{−iφ} parts.
pub(crate) fn is_forced_resonant(i: usize, m1: u32, m2: u32, plus: bool) -> bool {
    match (i, plus) {
        (0, true) => m1 == m2,
        (0, false) => m1 == m2 + 2,
        (1, true) => m2 == m1 + 2,
        (1, false) => m1 == m2,
        _ => false,
    }
}

pub fn compute_nonautonomous_ssm(ssm: &AutonomousSsm, mm: &ModalModel, omega: f64, order: u32) -> Result<ForcedReduction> {
    if order < 1 {
        return Err(SsmError::InvalidInput("forced expansion order must be at least 1".into()));
    }
    if ssm.order < order {
        return Err(SsmError::InvalidInput(format!(
            "autonomous SSM of order {} cannot support forced order {order}",
            ssm.order
        )));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(SsmError::InvalidInput(format!("forcing frequency must be positive, got {omega}")));
    }
    let dim = mm.dim();
    let lam = &mm.eigenvalues;
    let top = order - 1;
    let iw = Complex64::new(0.0, omega);
    let gamma = &ssm.gamma;
    let gamma_c: Vec<Complex64> = (1..=gamma.len() as u32).map(|k| ssm.r0[1].coeff(k, k + 1)).collect();

    // x = T W₀ and its monomials, complete to degree `top`
    let comp = Composition::new(mm);
    let mut vals = comp.engine.workspace(top.max(1));
    for d in 1..=top.max(1) {
        comp.fill_vars(mm, &ssm.w0, &mut vals, d);
    }
    for d in 2..=top {
        comp.engine.advance(&mut vals, d);
    }
    let dw0: Vec<[Series2; 2]> = ssm.w0.iter().map(|w| [w.diff(0), w.diff(1)]).collect();

    let mut a = vec![Series2::zeros(top); dim];
    let mut b = vec![Series2::zeros(top); dim];
    let mut c = [Series2::zeros(top), Series2::zeros(top)];
    let mut dd = [Series2::zeros(top), Series2::zeros(top)];
    let mut da = comp.engine.workspace(top);
    let mut db = comp.engine.workspace(top);

    for k in 0..=top {
        comp.engine.advance_linearized(&vals, &mut da, k);
        comp.engine.advance_linearized(&vals, &mut db, k);
        for i in 0..dim {
            let ja = comp.row_block(&da, i, k);
            let jb = comp.row_block(&db, i, k);
            for m2 in 0..=k {
                let m1 = k - m2;
                let mut alpha = -ja[m2 as usize];
                let mut beta = -jb[m2 as usize];
                if k == 0 {
                    alpha -= mm.forcing_modal[i] * 0.5;
                    beta -= mm.forcing_modal[i] * 0.5;
                }
                // Σ_j ∂_j W₀ᵢⁿˡ · {C,D}_j over reduced-dynamics entries of lower degree
                for j in 0..2 {
                    for (p1, p2, cv) in c[j].iter().take_while(|e| e.0 + e.1 < k) {
                        let ev = dd[j].coeff(p1, p2);
                        if (cv == ZERO && ev == ZERO) || p1 > m1 || p2 > m2 {
                            continue;
                        }
                        let w = dw0[i][j].coeff(m1 - p1, m2 - p2);
                        alpha += w * cv;
                        beta += w * ev;
                    }
                }
                // Σ_j ∂_j {A,B}ᵢ · R₀ⁿˡ_j
                for t in 1..=gamma.len() as u32 {
                    if k < 2 * t || m1 < t || m2 < t {
                        continue;
                    }
                    let (p, q) = (m1 - t, m2 - t);
                    let f = gamma[t as usize - 1] * p as f64 + gamma_c[t as usize - 1] * q as f64;
                    alpha += a[i].coeff(p, q) * f;
                    beta += b[i].coeff(p, q) * f;
                }

                let base = lam[i] - lam[0] * m1 as f64 - lam[1] * m2 as f64;
                for (plus, rhs) in [(true, alpha), (false, beta)] {
                    if is_forced_resonant(i, m1, m2, plus) {
                        let target = if plus { &mut c[i] } else { &mut dd[i] };
                        target.set(m1, m2, -rhs);
                        continue;
                    }
                    let den = if plus { base - iw } else { base + iw };
                    if den.norm() < NEAR_RESONANCE_TOL {
                        return Err(if k == 0 && i >= 2 {
                            SsmError::EnslavedResonance { row: i + 1, magnitude: den.norm() }
                        } else {
                            SsmError::NearResonance {
                                row: i + 1,
                                index: format!("({m1},{m2})"),
                                sign: if plus { '+' } else { '-' },
                            }
                        });
                    }
                    let target = if plus { &mut a[i] } else { &mut b[i] };
                    target.set(m1, m2, rhs / den);
                }
            }
        }
        comp.fill_vars(mm, &a, &mut da, k);
        comp.fill_vars(mm, &b, &mut db, k);
    }

    let half = top / 2;
    Ok(ForcedReduction {
        omega,
        order,
        c00: c[0].coeff(0, 0),
        c_ii: (1..=half).map(|i| c[0].coeff(i, i)).collect(),
        d_pm: (1..=half).map(|i| dd[0].coeff(i + 1, i - 1)).collect(),
        a,
        b,
        c,
        d: dd,
    })
}

/// Series of `D_x G(x)·y` for `x = T W₀`, `y = T V`, built with plain series
/// products (independent of the incremental engine).
fn jacobian_series(mm: &ModalModel, w0: &[Series2], v: &[Series2], order: u32) -> Vec<Series2> {
    let phys = |w: &[Series2], r: usize| -> Series2 {
        let mut out = Series2::zeros(order);
        for (j, wj) in w.iter().enumerate() {
            out.axpy(mm.t[(r, j)], &wj.resized(order));
        }
        out
    };
    let mut rows = vec![Series2::zeros(order); mm.dim()];
    for mono in &mm.monomials {
        let support: Vec<(usize, u32)> = mono.exponents.support().collect();
        let xs: Vec<Series2> = support.iter().map(|&(r, _)| phys(w0, r)).collect();
        for (pos, &(r, p)) in support.iter().enumerate() {
            let mut term = phys(v, r);
            term.scale(Complex64::new(p as f64, 0.0));
            for (q, &(_, e)) in support.iter().enumerate() {
                let reps = if q == pos { e - 1 } else { e };
                for _ in 0..reps {
                    term = mul(&term, &xs[q], order);
                }
            }
            for (i, row) in rows.iter_mut().enumerate() {
                row.axpy(mono.modal_coeffs[i], &term);
            }
        }
    }
    rows
}

/// Residual series of the O(ε) invariance equation, split into its e^{iφ}
/// and e^{−iφ} parts, through the computed degree.
pub fn forced_residual_series(ssm: &AutonomousSsm, mm: &ModalModel, fr: &ForcedReduction) -> (Vec<Series2>, Vec<Series2>) {
    let top = fr.order - 1;
    let iw = Complex64::new(0.0, fr.omega);
    let ja = jacobian_series(mm, &ssm.w0, &fr.a, top);
    let jb = jacobian_series(mm, &ssm.w0, &fr.b, top);
    let r0: Vec<Series2> = ssm.r0.iter().map(|r| r.resized(top)).collect();
    let mut out = (Vec::new(), Vec::new());
    for i in 0..mm.dim() {
        for (plus, w1, jw, r1) in [(true, &fr.a, &ja, &fr.c), (false, &fr.b, &jb, &fr.d)] {
            let mut res = w1[i].clone();
            res.scale(mm.eigenvalues[i] - if plus { iw } else { -iw });
            res.axpy(Complex64::new(1.0, 0.0), &jw[i]);
            res.add_to(0, 0, mm.forcing_modal[i] * 0.5);
            for j in 0..2 {
                res.axpy(Complex64::new(-1.0, 0.0), &mul(&ssm.w0[i].diff(j), &r1[j], top));
                res.axpy(Complex64::new(-1.0, 0.0), &mul(&w1[i].diff(j), &r0[j], top));
            }
            if plus {
                out.0.push(res);
            } else {
                out.1.push(res);
            }
        }
    }
    out
}

/// Maximum relative O(ε) residual over `(s₁, s₂, φ)` samples, normalized by
/// `‖Λ W₁‖ + ‖F_m(φ)‖`.
pub fn forced_invariance_residual(ssm: &AutonomousSsm, mm: &ModalModel, fr: &ForcedReduction, samples: &[(Complex64, Complex64, f64)]) -> f64 {
    let (ra, rb) = forced_residual_series(ssm, mm, fr);
    samples
        .iter()
        .map(|&(s1, s2, phi)| {
            let e = Complex64::from_polar(1.0, phi);
            let num: f64 = ra
                .iter()
                .zip(&rb)
                .map(|(x, y)| (x.eval(s1, s2) * e + y.eval(s1, s2) * e.conj()).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let w1 = fr.w1(s1, s2, phi);
            let lw: f64 = w1.iter().zip(&mm.eigenvalues).map(|(w, l)| (w * l).norm_sqr()).sum::<f64>().sqrt();
            let f: f64 = mm.forcing_modal.iter().map(|x| (x * phi.cos()).norm_sqr()).sum::<f64>().sqrt();
            num / (lw + f)
        })
        .fold(0.0, f64::max)
}

/// Thread-safe memo of forced reductions keyed by the exact bits of Ω.
pub struct ForcedCache {
    ssm: Arc<AutonomousSsm>,
    mm: Arc<ModalModel>,
    order: u32,
    map: RwLock<HashMap<u64, Arc<ForcedReduction>>>,
}

impl ForcedCache {
    pub fn new(ssm: Arc<AutonomousSsm>, mm: Arc<ModalModel>, order: u32) -> Self {
        ForcedCache { ssm, mm, order, map: RwLock::new(HashMap::new()) }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn get(&self, omega: f64) -> Result<Arc<ForcedReduction>> {
        let key = omega.to_bits();
        if let Some(fr) = self.map.read().expect("cache lock").get(&key) {
            return Ok(fr.clone());
        }
        let fr = Arc::new(compute_nonautonomous_ssm(&self.ssm, &self.mm, omega, self.order)?);
        self.map.write().expect("cache lock").entry(key).or_insert_with(|| fr.clone());
        Ok(fr)
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

//! Polar form of the reduced dynamics on the SSM and its fixed points.
//!
//! With `s₁ = ρe^{iθ}` and `ψ = θ − φ`:
//!
//! ```text
//! ρ̇  = a(ρ) + ε (f₁ cos ψ + f₂ sin ψ)
//! ρψ̇ = (b(ρ) − Ω)ρ + ε (g₁ cos ψ − g₂ sin ψ)
//! ```

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsmError};
use crate::ssm_auto::AutonomousSsm;
use crate::ssm_forced::ForcedReduction;

/// Eigenvalue real parts below this magnitude mark a fold.
pub const FOLD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedDynamics {
    /// Coefficients of `ρ, ρ³, ρ⁵, …`.
    pub a_coeffs: Vec<f64>,
    /// Coefficients of `1, ρ², ρ⁴, …`.
    pub b_coeffs: Vec<f64>,
    /// `f₁, f₂, g₁, g₂` as coefficients of `1, ρ², ρ⁴, …`.
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    /// Forcing frequency the forcing coefficients were computed for.
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    FoldDegenerate,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::FoldDegenerate => "fold",
        }
    }
}

/// A periodic response `u = (ρ, Ω, ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointU {
    pub rho: f64,
    pub omega: f64,
    pub psi: f64,
    pub stability: Stability,
    pub physical_amplitude: Option<f64>,
}

/// Value and first derivative of `Σ cₖ ρ^(2k + offset)`.
fn even_series(c: &[f64], rho: f64, offset: i32) -> (f64, f64) {
    let mut v = 0.0;
    let mut dv = 0.0;
    for (k, ck) in c.iter().enumerate() {
        let p = 2 * k as i32 + offset;
        v += ck * rho.powi(p);
        if p > 0 {
            dv += ck * p as f64 * rho.powi(p - 1);
        }
    }
    (v, dv)
}

impl ReducedDynamics {
    /// Autonomous part only, with the leading forcing coefficient `c₀`.
    pub fn from_parts(ssm: &AutonomousSsm, c0: Complex64, omega: f64) -> Self {
        ReducedDynamics {
            a_coeffs: ssm.a_coeffs(),
            b_coeffs: ssm.b_coeffs(),
            f1: vec![c0.re],
            f2: vec![c0.im],
            g1: vec![c0.im],
            g2: vec![c0.re],
            omega,
        }
    }

    /// Linear reduced model `ṡ = λs + ε c₀ e^{iφ}`.
    pub fn linear(lambda: Complex64, c0: Complex64, omega: f64) -> Self {
        ReducedDynamics {
            a_coeffs: vec![lambda.re],
            b_coeffs: vec![lambda.im],
            f1: vec![c0.re],
            f2: vec![c0.im],
            g1: vec![c0.im],
            g2: vec![c0.re],
            omega,
        }
    }

    pub fn half_order(&self) -> usize {
        self.a_coeffs.len() - 1
    }

    pub fn a(&self, rho: f64) -> f64 {
        even_series(&self.a_coeffs, rho, 1).0
    }

    pub fn da(&self, rho: f64) -> f64 {
        even_series(&self.a_coeffs, rho, 1).1
    }

    pub fn b(&self, rho: f64) -> f64 {
        even_series(&self.b_coeffs, rho, 0).0
    }

    pub fn db(&self, rho: f64) -> f64 {
        even_series(&self.b_coeffs, rho, 0).1
    }

    /// `(f₁, f₂, g₁, g₂)` at `ρ`.
    pub fn forcing(&self, rho: f64) -> [f64; 4] {
        [
            even_series(&self.f1, rho, 0).0,
            even_series(&self.f2, rho, 0).0,
            even_series(&self.g1, rho, 0).0,
            even_series(&self.g2, rho, 0).0,
        ]
    }

    /// ρ-derivatives of `(f₁, f₂, g₁, g₂)`.
    pub fn dforcing(&self, rho: f64) -> [f64; 4] {
        [
            even_series(&self.f1, rho, 0).1,
            even_series(&self.f2, rho, 0).1,
            even_series(&self.g1, rho, 0).1,
            even_series(&self.g2, rho, 0).1,
        ]
    }

    /// Fold discriminant `ε²(f₁² + f₂²) − a²`.
    pub fn discriminant(&self, rho: f64, eps: f64) -> f64 {
        let [f1, f2, _, _] = self.forcing(rho);
        eps * eps * (f1 * f1 + f2 * f2) - self.a(rho).powi(2)
    }

    /// Polar vector field `(ρ̇, ψ̇)`.
    pub fn vector_field(&self, rho: f64, psi: f64, omega: f64, eps: f64) -> Result<(f64, f64)> {
        if rho <= 0.0 {
            return Err(SsmError::SingularPolarChart);
        }
        let f = zero_problem(self, rho, omega, psi, eps);
        Ok((f[0], f[1] / rho))
    }
}

/// Assembles `a, b, f₁, f₂, g₁, g₂` from the autonomous and forced expansions.
pub fn assemble_polar(ssm: &AutonomousSsm, fr: &ForcedReduction) -> Result<ReducedDynamics> {
    if fr.order > ssm.order {
        return Err(SsmError::InvalidInput(format!(
            "forced order {} exceeds autonomous order {}",
            fr.order, ssm.order
        )));
    }
    // C(ρ) = c₀ + Σ c_{(i,i)} ρ^{2i},  D(ρ) = Σ d_{(i+1,i−1)} ρ^{2i}
    let c: Vec<Complex64> = std::iter::once(fr.c00).chain(fr.c_ii.iter().copied()).collect();
    let d: Vec<Complex64> = std::iter::once(Complex64::new(0.0, 0.0)).chain(fr.d_pm.iter().copied()).collect();
    let zip = |f: fn(Complex64, Complex64) -> f64| -> Vec<f64> { c.iter().zip(&d).map(|(&c, &d)| f(c, d)).collect() };
    Ok(ReducedDynamics {
        a_coeffs: ssm.a_coeffs(),
        b_coeffs: ssm.b_coeffs(),
        f1: zip(|c, d| c.re + d.re),
        f2: zip(|c, d| c.im - d.im),
        g1: zip(|c, d| c.im + d.im),
        g2: zip(|c, d| c.re - d.re),
        omega: fr.omega,
    })
}

/// `F(u)`; its zeros are the periodic responses.
pub fn zero_problem(rd: &ReducedDynamics, rho: f64, omega: f64, psi: f64, eps: f64) -> [f64; 2] {
    let [f1, f2, g1, g2] = rd.forcing(rho);
    let (s, c) = psi.sin_cos();
    [
        rd.a(rho) + eps * (f1 * c + f2 * s),
        (rd.b(rho) - omega) * rho + eps * (g1 * c - g2 * s),
    ]
}

/// Jacobian of `(ρ̇, ψ̇)` with respect to `(ρ, ψ)` at fixed Ω.
pub fn jacobian(rd: &ReducedDynamics, rho: f64, _omega: f64, psi: f64, eps: f64) -> Result<Matrix2<f64>> {
    if rho <= 0.0 {
        return Err(SsmError::SingularPolarChart);
    }
    let [f1, f2, g1, g2] = rd.forcing(rho);
    let [df1, df2, dg1, dg2] = rd.dforcing(rho);
    let (s, c) = psi.sin_cos();
    let gpart = g1 * c - g2 * s;
    let dgpart = dg1 * c - dg2 * s;
    Ok(Matrix2::new(
        rd.da(rho) + eps * (df1 * c + df2 * s),
        eps * (-f1 * s + f2 * c),
        rd.db(rho) + eps * (dgpart * rho - gpart) / (rho * rho),
        eps * (-g1 * s - g2 * c) / rho,
    ))
}

/// Real parts of the eigenvalues of a 2×2 matrix.
pub fn eigen_real_parts(j: &Matrix2<f64>) -> [f64; 2] {
    let tr = j.trace();
    let det = j.determinant();
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        [tr / 2.0 + r, tr / 2.0 - r]
    } else {
        [tr / 2.0, tr / 2.0]
    }
}

pub fn classify(j: &Matrix2<f64>, fold_tol: f64) -> Stability {
    let re = eigen_real_parts(j);
    if re.iter().any(|r| r.abs() < fold_tol) {
        Stability::FoldDegenerate
    } else if re.iter().all(|&r| r < 0.0) {
        Stability::Stable
    } else {
        Stability::Unstable
    }
}

pub fn fixed_point_stability(rd: &ReducedDynamics, rho: f64, omega: f64, psi: f64, eps: f64) -> Result<Stability> {
    Ok(classify(&jacobian(rd, rho, omega, psi, eps)?, FOLD_TOL))
}

/// Central-difference Jacobian of `(ρ̇, ψ̇)`, used to cross-check [`jacobian`].
pub fn jacobian_fd(rd: &ReducedDynamics, rho: f64, omega: f64, psi: f64, eps: f64, h: f64) -> Result<Matrix2<f64>> {
    let f = |r: f64, p: f64| rd.vector_field(r, p, omega, eps);
    let hr = h * rho.max(1e-3);
    let (a1, b1) = f(rho + hr, psi)?;
    let (a0, b0) = f(rho - hr, psi)?;
    let (a3, b3) = f(rho, psi + h)?;
    let (a2, b2) = f(rho, psi - h)?;
    Ok(Matrix2::new(
        (a1 - a0) / (2.0 * hr),
        (a3 - a2) / (2.0 * h),
        (b1 - b0) / (2.0 * hr),
        (b3 - b2) / (2.0 * h),
    ))
}

/// Amplitude of the linear reduced response, `ε|c₀| / |λ₁ − iΩ|`.
pub fn linear_frc_rho(lambda: Complex64, c0: Complex64, eps: f64, omega: f64) -> f64 {
    eps * c0.norm() / (lambda.re.powi(2) + (lambda.im - omega).powi(2)).sqrt()
}

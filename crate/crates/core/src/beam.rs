//! Finite-element model of a clamped-free Euler–Bernoulli beam with a cubic
//! spring and damper at the free end.

use nalgebra::{DMatrix, DVector, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsmError};
use crate::model::{EigenNormalization, MechanicalSystem, NonlinearTerm};

/// Beam geometry, material, damping and forcing. Values are used in whatever
/// consistent unit system they are given in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSpec {
    pub length: f64,
    pub height: f64,
    pub width: f64,
    pub density: f64,
    pub youngs_modulus: f64,
    /// Cubic spring coefficient at the tip.
    pub kappa: f64,
    /// Cubic damper coefficient at the tip.
    pub gamma: f64,
    /// Mass-proportional Rayleigh coefficient.
    pub alpha: f64,
    /// Stiffness-proportional Rayleigh coefficient.
    pub beta: f64,
    /// Tip forcing amplitude.
    pub forcing: f64,
    pub elements: usize,
}

impl BeamSpec {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn second_moment(&self) -> f64 {
        self.width * self.height.powi(3) / 12.0
    }

    /// Closed-form first bending frequency of a uniform cantilever.
    pub fn cantilever_frequency(&self) -> f64 {
        const BETA1_L: f64 = 1.875_104_068_711_961;
        BETA1_L * BETA1_L
            * (self.youngs_modulus * self.second_moment() / (self.density * self.area() * self.length.powi(4))).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("height", self.height),
            ("width", self.width),
            ("density", self.density),
            ("youngs_modulus", self.youngs_modulus),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SsmError::InvalidInput(format!("beam {name} must be positive")));
            }
        }
        if self.elements < 2 {
            return Err(SsmError::InvalidInput("beam needs at least 2 elements".into()));
        }
        Ok(())
    }

    /// State index of the tip displacement.
    pub fn tip_index(&self) -> usize {
        2 * (self.elements - 1)
    }
}

fn element_mass(rho_a: f64, le: f64) -> Matrix4<f64> {
    let l = le;
    Matrix4::new(
        156.0, 22.0 * l, 54.0, -13.0 * l,
        22.0 * l, 4.0 * l * l, 13.0 * l, -3.0 * l * l,
        54.0, 13.0 * l, 156.0, -22.0 * l,
        -13.0 * l, -3.0 * l * l, -22.0 * l, 4.0 * l * l,
    ) * (rho_a * le / 420.0)
}

fn element_stiffness(ei: f64, le: f64) -> Matrix4<f64> {
    let l = le;
    Matrix4::new(
        12.0, 6.0 * l, -12.0, 6.0 * l,
        6.0 * l, 4.0 * l * l, -6.0 * l, 2.0 * l * l,
        -12.0, -6.0 * l, 12.0, -6.0 * l,
        6.0 * l, 2.0 * l * l, -6.0 * l, 4.0 * l * l,
    ) * (ei / le.powi(3))
}

/// Assembles M, K, Rayleigh damping and the tip nonlinearity.
///
/// DOFs are `[w₁, θ₁, w₂, θ₂, …, w_m, θ_m]` over the free nodes; the clamped
/// node is eliminated.
pub fn build_beam(spec: &BeamSpec) -> Result<MechanicalSystem> {
    spec.validate()?;
    let m = spec.elements;
    let le = spec.length / m as f64;
    let me = element_mass(spec.density * spec.area(), le);
    let ke = element_stiffness(spec.youngs_modulus * spec.second_moment(), le);

    let full = 2 * (m + 1);
    let mut mass = DMatrix::zeros(full, full);
    let mut stiff = DMatrix::zeros(full, full);
    for e in 0..m {
        let base = 2 * e;
        for i in 0..4 {
            for j in 0..4 {
                mass[(base + i, base + j)] += me[(i, j)];
                stiff[(base + i, base + j)] += ke[(i, j)];
            }
        }
    }
    let n = 2 * m;
    let mass = mass.view((2, 2), (n, n)).into_owned();
    let stiffness = stiff.view((2, 2), (n, n)).into_owned();
    let damping = &mass * spec.alpha + &stiffness * spec.beta;

    let tip = spec.tip_index();
    let mut nonlinear = Vec::new();
    if spec.kappa != 0.0 {
        let mut e = vec![0; 2 * n];
        e[tip] = 3;
        nonlinear.push(NonlinearTerm { dof: tip, coefficient: spec.kappa, exponents: e });
    }
    if spec.gamma != 0.0 {
        let mut e = vec![0; 2 * n];
        e[n + tip] = 3;
        nonlinear.push(NonlinearTerm { dof: tip, coefficient: spec.gamma, exponents: e });
    }
    let mut forcing = DVector::zeros(n);
    forcing[tip] = spec.forcing;

    Ok(MechanicalSystem::new(mass, damping, stiffness, nonlinear, forcing)?
        .with_normalization(EigenNormalization::UnitNorm)
        .with_coordinate("tip", tip)
        .with_coordinate("tip_velocity", n + tip))
}

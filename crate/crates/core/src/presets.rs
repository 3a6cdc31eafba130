//! Reference systems: the two-mass Shaw–Pierre oscillator with a nonlinear
//! damper (cubic, optionally quintic) and the cantilever beam.

use nalgebra::{DMatrix, DVector};

use crate::beam::{build_beam, BeamSpec};
use crate::model::{modal_decompose, to_first_order, MechanicalSystem, ModalModel, NonlinearTerm};

/// Shaw–Pierre parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShawPierreParams {
    pub m: f64,
    pub c1: f64,
    pub c2: f64,
    pub k: f64,
    pub kappa: f64,
    pub alpha: f64,
    /// Quintic damper coefficient on the first velocity; zero disables it.
    pub beta: f64,
    pub p: f64,
}

impl Default for ShawPierreParams {
    fn default() -> Self {
        ShawPierreParams {
            m: 1.0,
            c1: 0.03,
            c2: 3f64.sqrt() * 0.03,
            k: 3.0,
            kappa: 0.4,
            alpha: -0.6,
            beta: 0.0,
            p: 3.0,
        }
    }
}

impl ShawPierreParams {
    pub fn quintic() -> Self {
        ShawPierreParams { beta: 1.2, ..Default::default() }
    }

    pub fn build(&self) -> MechanicalSystem {
        let (m, c1, c2, k) = (self.m, self.c1, self.c2, self.k);
        let mass = DMatrix::from_diagonal_element(2, 2, m);
        let damping = DMatrix::from_row_slice(2, 2, &[c1 + c2, -c2, -c2, c1 + c2]);
        let stiffness = DMatrix::from_row_slice(2, 2, &[2.0 * k, -k, -k, 2.0 * k]);
        let mut g = vec![];
        for (coefficient, exponents) in [
            (self.kappa, [3, 0, 0, 0]),
            (self.alpha, [0, 0, 3, 0]),
            (self.beta, [0, 0, 5, 0]),
        ] {
            if coefficient != 0.0 {
                g.push(NonlinearTerm { dof: 0, coefficient, exponents: exponents.to_vec() });
            }
        }
        MechanicalSystem::new(mass, damping, stiffness, g, DVector::from_vec(vec![self.p, 0.0]))
            .expect("valid parameters")
            .with_coordinate("y1", 0)
            .with_coordinate("y2", 1)
    }

    /// Closed-form cubic coefficient `−3αk/(4m²)`.
    pub fn re_gamma1(&self) -> f64 {
        -3.0 * self.alpha * self.k / (4.0 * self.m * self.m)
    }

    /// Closed-form merger amplitude of the cubic model.
    pub fn eps_merge(&self) -> f64 {
        let w1 = (self.k / self.m).sqrt();
        let z1 = self.c1 / (2.0 * self.m * w1);
        8.0 * self.m * (1.0 - z1 * z1).sqrt() * w1 / self.p.abs()
            * (16.0 * self.m * self.m * (z1 * w1).powi(3) / (81.0 * self.k * self.alpha.abs())).sqrt()
    }
}

pub fn shaw_pierre() -> MechanicalSystem {
    ShawPierreParams::default().build()
}

pub fn shaw_pierre_quintic() -> MechanicalSystem {
    ShawPierreParams::quintic().build()
}

pub fn shaw_pierre_modal() -> ModalModel {
    modal_decompose(&to_first_order(&shaw_pierre()).unwrap(), 1).unwrap()
}

pub fn modal(sys: &MechanicalSystem) -> ModalModel {
    modal_decompose(&to_first_order(sys).expect("valid system"), 1).expect("decomposable system")
}

/// Shaw–Pierre with all nonlinear coefficients removed.
pub fn shaw_pierre_linear() -> MechanicalSystem {
    ShawPierreParams { kappa: 0.0, alpha: 0.0, ..Default::default() }.build()
}

/// Reference beam in mm–kg–s-style units.
pub fn beam_spec(elements: usize) -> BeamSpec {
    BeamSpec {
        length: 2700.0,
        height: 10.0,
        width: 10.0,
        density: 1780e-9,
        youngs_modulus: 45e6,
        kappa: 6.0,
        gamma: -0.02,
        alpha: 1.25e-4,
        beta: 2.5e-4,
        forcing: 0.1,
        elements,
    }
}

pub fn beam(elements: usize) -> MechanicalSystem {
    build_beam(&beam_spec(elements)).expect("valid beam")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let p = ShawPierreParams::default();
        assert!((p.re_gamma1() - 1.35).abs() < 1e-14);
        // |c₁₀| = P/(8 m Im λ₁), ε_m = √(4|Reλ|³/(27 Reγ₁)) / |c₁₀|
        let im = 3f64.sqrt() * (1.0 - 0.03f64.powi(2) / 12.0).sqrt();
        let c0 = 3.0 / (8.0 * im);
        let eps = (4.0 * 0.015f64.powi(3) / (27.0 * 1.35)).sqrt() / c0;
        assert!((p.eps_merge() / eps - 1.0).abs() < 1e-12);
        assert!((p.eps_merge() - 0.0028).abs() / 0.0028 < 0.02);
    }
}

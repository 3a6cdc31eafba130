//! Zeros of the damping function `a(ρ)` and the isolas they predict.
//!
//! `a(ρ) = ρ p(ρ²)` with `p(x) = Re λ₁ + Σ Re γₖ xᵏ`. Roots of the truncated
//! `p` are tracked as the truncation order `M` grows; roots that settle inside
//! the estimated convergence disk are kept, roots that drift to its boundary
//! are artifacts of truncation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsmError};
use crate::linalg::poly_roots;
use crate::model::ModalModel;
use crate::ssm_auto::{compute_autonomous_ssm, AutonomousSsm};
use crate::ssm_forced::leading_forcing_coefficient;

/// Relative change allowed over the last orders of a converged root.
pub const CAUCHY_TOL: f64 = 1e-3;
/// Roots must lie inside this fraction of the estimated radius.
pub const RADIUS_FRACTION: f64 = 0.8;
/// Number of trailing orders used by the convergence tests.
pub const TAIL: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRoots {
    /// `a` is a polynomial of degree `2m + 1`.
    pub m: u32,
    /// One representative `ρ = √x` (Re ρ ≥ 0) of each ± pair; ρ = 0 is implicit.
    pub rho: Vec<Complex64>,
    /// Estimated radius of convergence in ρ; `None` when the series terminates.
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<(u32, Complex64)>,
}

impl Trajectory {
    pub fn last(&self) -> (u32, Complex64) {
        *self.points.last().expect("nonempty trajectory")
    }

    pub fn at(&self, m: u32) -> Option<Complex64> {
        self.points.iter().find(|p| p.0 == m).map(|p| p.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootTrack {
    pub orders: Vec<OrderRoots>,
    pub trajectories: Vec<Trajectory>,
    /// `Re λ₁, Re γ₁, …` up to the highest order.
    pub a_coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootClass {
    NonSpurious,
    Spurious,
}

/// Principal square root with a canonical sign for ± pairs.
fn principal_rho(x: Complex64) -> Complex64 {
    let r = x.sqrt();
    if r.re < 0.0 || (r.re == 0.0 && r.im < 0.0) {
        -r
    } else {
        r
    }
}

/// Mean of `|α_{k−1}/α_k|` over the last [`TAIL`] coefficients, as a radius in ρ.
pub fn radius_estimate(coeffs: &[f64]) -> Option<f64> {
    let m = coeffs.len() - 1;
    if m == 0 {
        return None;
    }
    let lo = m.saturating_sub(TAIL - 1).max(1);
    let mut sum = 0.0;
    for k in lo..=m {
        if coeffs[k] == 0.0 {
            return None;
        }
        sum += (coeffs[k - 1] / coeffs[k]).abs();
    }
    Some((sum / (m - lo + 1) as f64).sqrt())
}

/// Roots of `a` for every truncation `m` in `orders`, with trajectories
/// matched greedily by distance between consecutive orders.
pub fn roots_from_coeffs(a_coeffs: &[f64], orders: std::ops::RangeInclusive<u32>) -> Result<RootTrack> {
    let (lo, hi) = (*orders.start(), *orders.end());
    if lo == 0 || hi < lo || hi as usize >= a_coeffs.len() {
        return Err(SsmError::InvalidInput(format!(
            "orders {lo}..={hi} need 1 <= lo <= hi <= {}",
            a_coeffs.len().saturating_sub(1)
        )));
    }
    let mut out = Vec::new();
    let mut trajectories: Vec<Trajectory> = Vec::new();
    for m in lo..=hi {
        let c = &a_coeffs[..=m as usize];
        let rho: Vec<Complex64> = if c[1..].iter().all(|&x| x == 0.0) {
            vec![]
        } else {
            let mut r: Vec<Complex64> = poly_roots(c)?.into_iter().map(principal_rho).collect();
            r.sort_by(|a, b| (a.norm(), a.im).partial_cmp(&(b.norm(), b.im)).expect("finite roots"));
            r
        };
        // greedy nearest-neighbour continuation
        let live: Vec<usize> = (0..trajectories.len()).filter(|&t| trajectories[t].last().0 + 1 == m).collect();
        let mut pairs: Vec<(f64, usize, usize)> = vec![];
        for &t in &live {
            for (j, z) in rho.iter().enumerate() {
                pairs.push(((trajectories[t].last().1 - z).norm(), t, j));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut t_used = vec![false; trajectories.len()];
        let mut r_used = vec![false; rho.len()];
        for (_, t, j) in pairs {
            if !t_used[t] && !r_used[j] {
                t_used[t] = true;
                r_used[j] = true;
                trajectories[t].points.push((m, rho[j]));
            }
        }
        for (j, z) in rho.iter().enumerate() {
            if !r_used[j] {
                trajectories.push(Trajectory { points: vec![(m, *z)] });
            }
        }
        out.push(OrderRoots { m, rho, radius: radius_estimate(c) });
    }
    Ok(RootTrack { orders: out, trajectories, a_coeffs: a_coeffs[..=hi as usize].to_vec() })
}

/// Computes the autonomous expansion to order `2·max + 1` and tracks the roots.
pub fn roots_of_a(mm: &ModalModel, orders: std::ops::RangeInclusive<u32>) -> Result<RootTrack> {
    let ssm = compute_autonomous_ssm(mm, 2 * orders.end() + 1)?;
    roots_from_coeffs(&ssm.a_coeffs(), orders)
}

/// Thresholds of the spurious-root test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootTolerances {
    /// Relative change allowed between consecutive orders over the tail.
    pub cauchy: f64,
    /// Fraction of the estimated convergence radius a root must stay within.
    pub radius_fraction: f64,
}

impl Default for RootTolerances {
    fn default() -> Self {
        RootTolerances { cauchy: CAUCHY_TOL, radius_fraction: RADIUS_FRACTION }
    }
}

/// Classifies each trajectory of `rt`, in order.
pub fn classify_roots(rt: &RootTrack) -> Vec<RootClass> {
    classify_roots_with(rt, RootTolerances::default())
}

pub fn classify_roots_with(rt: &RootTrack, tol: RootTolerances) -> Vec<RootClass> {
    let last = rt.orders.last().expect("nonempty track");
    rt.trajectories
        .iter()
        .map(|t| {
            let (m, z) = t.last();
            if m != last.m || t.points.len() < TAIL {
                return RootClass::Spurious;
            }
            let tail = &t.points[t.points.len() - TAIL..];
            let settled = tail.windows(2).all(|w| (w[1].1 - w[0].1).norm() <= tol.cauchy * w[1].1.norm());
            let inside = last.radius.is_none_or(|r| z.norm() < tol.radius_fraction * r);
            if settled && inside {
                RootClass::NonSpurious
            } else {
                RootClass::Spurious
            }
        })
        .collect()
}

/// Real positive roots of `a` at order `m` on non-spurious trajectories.
pub fn nonspurious_real_roots(rt: &RootTrack, classes: &[RootClass], m: u32) -> Vec<NonSpuriousRoot> {
    let coeffs = &rt.a_coeffs[..=m as usize];
    let mut out: Vec<NonSpuriousRoot> = rt
        .trajectories
        .iter()
        .zip(classes)
        .filter(|(_, c)| **c == RootClass::NonSpurious)
        .filter_map(|(t, _)| t.at(m))
        .filter(|z| z.im.abs() <= 1e-9 * z.norm() && z.re > 0.0)
        .map(|z| NonSpuriousRoot { rho: z.re, transversality: da(coeffs, z.re) })
        .collect();
    out.sort_by(|a, b| a.rho.total_cmp(&b.rho));
    out
}

fn a_val(c: &[f64], rho: f64) -> f64 {
    crate::numeric::eval_sparse(c, rho, 2, 1)
}

fn da(c: &[f64], rho: f64) -> f64 {
    c.iter().enumerate().map(|(k, ck)| ck * (2 * k + 1) as f64 * rho.powi(2 * k as i32)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonSpuriousRoot {
    pub rho: f64,
    /// `∂ρ a` at the root; nonzero means the zero is transverse.
    pub transversality: f64,
}

/// Isola predicted by the cubic truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadingIsola {
    pub exists: bool,
    pub rho1: Option<f64>,
    pub eps_m: Option<f64>,
    pub disconnected_at_eps: bool,
}

/// `ρ₁ = √(|Re λ₁|/Re γ₁)` and the merger amplitude
/// `ε_m = √(4|Re λ₁|³ / (27 Re γ₁)) / |c₁₀|`.
pub fn leading_isola(ssm: &AutonomousSsm, c0: Complex64, eps: f64, classes: Option<(&RootTrack, &[RootClass])>) -> LeadingIsola {
    let re_l = ssm.lambda.re;
    let re_g = ssm.gamma.first().map_or(0.0, |g| g.re);
    if re_g <= 0.0 || c0.norm() == 0.0 {
        return LeadingIsola { exists: false, rho1: None, eps_m: None, disconnected_at_eps: false };
    }
    let rho1 = (re_l.abs() / re_g).sqrt();
    let confirmed = match classes {
        None => true,
        Some((rt, cl)) => rt.trajectories.iter().zip(cl).any(|(t, c)| {
            *c == RootClass::NonSpurious
                && t.points.first().is_some_and(|p| p.0 == 1 && (p.1 - rho1).norm() <= 1e-9 * rho1)
        }),
    };
    if !confirmed {
        return LeadingIsola { exists: false, rho1: Some(rho1), eps_m: None, disconnected_at_eps: false };
    }
    let eps_m = (4.0 * re_l.abs().powi(3) / (27.0 * re_g)).sqrt() / c0.norm();
    LeadingIsola { exists: true, rho1: Some(rho1), eps_m: Some(eps_m), disconnected_at_eps: eps < eps_m }
}

/// Real positive solutions of `a(ρ) = ±ε|c₁₀|`, ascending.
pub fn fold_points(a_coeffs: &[f64], c0: Complex64, eps: f64) -> Result<Vec<f64>> {
    let target = eps * c0.norm();
    // a(ρ) ∓ target as an ordinary polynomial in ρ
    let mut poly = vec![0.0; 2 * a_coeffs.len()];
    for (k, c) in a_coeffs.iter().enumerate() {
        poly[2 * k + 1] = *c;
    }
    let mut out = vec![];
    for sign in [1.0, -1.0] {
        let mut p = poly.clone();
        p[0] = -sign * target;
        if p.iter().all(|&x| x == 0.0) {
            continue;
        }
        for z in poly_roots(&p)? {
            if z.re > 0.0 && z.im.abs() <= 1e-7 * z.norm().max(1e-12) {
                let mut r = z.re;
                // real Newton polish
                for _ in 0..4 {
                    let d = da(a_coeffs, r);
                    if d == 0.0 {
                        break;
                    }
                    let next = r - (a_val(a_coeffs, r) - sign * target) / d;
                    if !(next > 0.0) {
                        break;
                    }
                    r = next;
                }
                out.push(r);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolaReport {
    pub eps: f64,
    /// Order `m` at which roots are reported.
    pub analysis_order: u32,
    pub nonspurious_roots: Vec<NonSpuriousRoot>,
    pub leading: LeadingIsola,
    pub fold_rho: Vec<f64>,
    pub classes: Vec<RootClass>,
    pub tolerances: RootTolerances,
}

/// Root tracking over `orders` and the isola prediction at `analysis_order`.
pub fn isola_report(
    mm: &ModalModel,
    orders: std::ops::RangeInclusive<u32>,
    analysis_order: u32,
    eps: f64,
) -> Result<(RootTrack, IsolaReport)> {
    isola_report_with(mm, orders, analysis_order, eps, RootTolerances::default())
}

pub fn isola_report_with(
    mm: &ModalModel,
    orders: std::ops::RangeInclusive<u32>,
    analysis_order: u32,
    eps: f64,
    tol: RootTolerances,
) -> Result<(RootTrack, IsolaReport)> {
    if !orders.contains(&analysis_order) {
        return Err(SsmError::InvalidInput(format!("analysis order {analysis_order} outside the tracked orders")));
    }
    let ssm = compute_autonomous_ssm(mm, 2 * orders.end() + 1)?;
    let rt = roots_from_coeffs(&ssm.a_coeffs(), orders)?;
    let classes = classify_roots_with(&rt, tol);
    let c0 = leading_forcing_coefficient(mm);
    let report = IsolaReport {
        eps,
        analysis_order,
        nonspurious_roots: nonspurious_real_roots(&rt, &classes, analysis_order),
        leading: leading_isola(&ssm.truncated(3), c0, eps, Some((&rt, &classes))),
        fold_rho: fold_points(&rt.a_coeffs[..=analysis_order as usize], c0, eps)?,
        classes,
        tolerances: tol,
    };
    Ok((rt, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{self, ShawPierreParams};
    use proptest::prelude::*;

    #[test]
    fn cubic_root_is_closed_form() {
        let rt = roots_from_coeffs(&[-0.015, 1.35], 1..=1).unwrap();
        assert_eq!(rt.orders[0].rho.len(), 1);
        assert!((rt.orders[0].rho[0] - Complex64::new((0.015f64 / 1.35).sqrt(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn linear_system_has_only_trivial_root() {
        let mm = presets::modal(&presets::shaw_pierre_linear());
        let rt = roots_of_a(&mm, 1..=4).unwrap();
        assert!(rt.orders.iter().all(|o| o.rho.is_empty() && o.radius.is_none()));
        assert!(classify_roots(&rt).is_empty());
    }

    #[test]
    fn sp_leading_isola() {
        let mm = presets::shaw_pierre_modal();
        let p = ShawPierreParams::default();
        let (rt, rep) = isola_report(&mm, 1..=12, 1, 0.0027).unwrap();
        assert!(rep.leading.exists);
        assert!((rep.leading.eps_m.unwrap() - p.eps_merge()).abs() < 1e-9 * p.eps_merge());
        assert!(rep.leading.disconnected_at_eps);
        assert_eq!(rep.fold_rho.len(), 3);
        assert_eq!(rt.orders.len(), 12);
    }

    #[test]
    fn folds_coalesce_at_merger() {
        let p = ShawPierreParams::default();
        let c = [-0.015, p.re_gamma1()];
        let mm = presets::shaw_pierre_modal();
        let c0 = leading_forcing_coefficient(&mm);
        let em = p.eps_merge();
        let below = fold_points(&c, c0, em * (1.0 - 1e-6)).unwrap();
        assert_eq!(below.len(), 3);
        let tilde = (0.015 / (3.0 * p.re_gamma1())).sqrt();
        assert!((below[0] - tilde).abs() < 1e-2 * tilde && (below[1] - tilde).abs() < 1e-2 * tilde);
        assert_eq!(fold_points(&c, c0, em * 1.01).unwrap().len(), 1);
        // unforced: the nonzero root of a
        let zero = fold_points(&c, c0, 0.0).unwrap();
        assert_eq!(zero.len(), 1);
        assert!((zero[0] - (0.015f64 / 1.35).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn negative_cubic_coefficient_has_no_isola() {
        let mut mm_sys = ShawPierreParams { alpha: 0.6, ..Default::default() };
        mm_sys.kappa = 0.4;
        let mm = presets::modal(&mm_sys.build());
        let ssm = compute_autonomous_ssm(&mm, 3).unwrap();
        let li = leading_isola(&ssm, leading_forcing_coefficient(&mm), 0.001, None);
        assert!(!li.exists);
    }

    #[test]
    fn quintic_roots_converge() {
        let mm = presets::modal(&presets::shaw_pierre_quintic());
        let (rt, rep) = isola_report(&mm, 1..=15, 2, 0.001).unwrap();
        let r: Vec<f64> = rep.nonspurious_roots.iter().map(|r| r.rho).collect();
        assert_eq!(r.len(), 2, "{r:?} {:?}", rt.orders.last());
        assert!((r[0] - 0.1305).abs() < 1e-3 && (r[1] - 0.1787).abs() < 1e-3);
        assert!(rep.nonspurious_roots[0].transversality > 0.0 && rep.nonspurious_roots[1].transversality < 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn roots_solve_the_truncation(c in proptest::collection::vec(-5.0f64..5.0, 2..7)) {
            prop_assume!(c.last().unwrap().abs() > 0.1);
            let m = (c.len() - 1) as u32;
            let rt = roots_from_coeffs(&c, 1..=m).unwrap();
            for o in &rt.orders {
                let cc = &c[..=o.m as usize];
                for z in &o.rho {
                    for s in [*z, -*z] {
                        let val: Complex64 = cc.iter().enumerate().map(|(k, ck)| s.powi(2 * k as i32 + 1) * ck).sum();
                        let scale: f64 = cc.iter().enumerate().map(|(k, ck)| (s.norm().powi(2 * k as i32 + 1) * ck).abs()).sum();
                        prop_assert!(val.norm() <= 1e-9 * scale.max(1e-300));
                    }
                }
            }
        }

        #[test]
        fn trajectories_partition_roots(c in proptest::collection::vec(-5.0f64..5.0, 3..8)) {
            prop_assume!(c.iter().all(|x| x.abs() > 0.05));
            let m = (c.len() - 1) as u32;
            let rt = roots_from_coeffs(&c, 1..=m).unwrap();
            for o in &rt.orders {
                let n = rt.trajectories.iter().filter(|t| t.at(o.m).is_some()).count();
                prop_assert_eq!(n, o.rho.len());
            }
        }
    }
}

//! Forced response curves traced over a grid in ρ.
//!
//! For fixed ρ the first polar equation is a quadratic in `K = tan(ψ/2)`;
//! each real root gives a branch whose Ω follows from the second equation.
//! The admissible set `{ρ : ε²(f₁² + f₂²) ≥ a²}` is a union of intervals, and
//! each interval carries exactly one connected piece of the curve (both
//! branches meet at the folds bounding it).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsmError};
use crate::model::ModalModel;
use crate::numeric::{bisect, golden_min};
use crate::reduced::{classify, fixed_point_stability, jacobian, zero_problem, FixedPointU, ReducedDynamics, FOLD_TOL};
use crate::series::Series2;
use crate::ssm_auto::AutonomousSsm;
use crate::ssm_forced::{compute_nonautonomous_ssm, leading_forcing_coefficient, ForcedCache, ForcedReduction};

/// Residual bound accepted for a traced point.
pub const POINT_TOL: f64 = 1e-10;

/// Which root of the K-quadratic a point lies on. `Fold` marks the ρ-extrema
/// where the two roots coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Branch {
    #[serde(rename = "K+")]
    Plus,
    #[serde(rename = "K-")]
    Minus,
    #[serde(rename = "fold")]
    Fold,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Plus => "K+",
            Branch::Minus => "K-",
            Branch::Fold => "fold",
        }
    }
}

/// Real roots of `(a − εf₁)K² + 2εf₂K + (a + εf₁) = 0` mapped to `ψ = 2 atan K`.
///
/// A vanishing leading coefficient leaves one finite root; the other escapes to
/// infinity and is reported as `ψ = π`.
pub fn k_branches(rd: &ReducedDynamics, rho: f64, eps: f64) -> Vec<(Branch, f64)> {
    let a = rd.a(rho);
    let [f1, f2, _, _] = rd.forcing(rho);
    let disc = eps * eps * (f1 * f1 + f2 * f2) - a * a;
    if disc < 0.0 {
        return vec![];
    }
    let qa = a - eps * f1;
    let qb = 2.0 * eps * f2;
    let qc = a + eps * f1;
    if qa.abs() < 1e-14 {
        let finite = if qb != 0.0 { Some(2.0 * (-qc / qb).atan()) } else { None };
        // K₊ stays finite for qb > 0, K₋ for qb < 0
        let (fin_branch, inf_branch) = if qb > 0.0 { (Branch::Plus, Branch::Minus) } else { (Branch::Minus, Branch::Plus) };
        let mut out = vec![(inf_branch, PI)];
        if let Some(psi) = finite {
            out.push((fin_branch, psi));
        }
        out.sort_by_key(|b| b.0);
        return out;
    }
    let sq = 2.0 * disc.sqrt();
    let q = -0.5 * (qb + qb.signum() * sq);
    let (kp, km) = if q == 0.0 {
        (0.0, 0.0)
    } else if qb >= 0.0 {
        (qc / q, q / qa)
    } else {
        (q / qa, qc / q)
    };
    vec![(Branch::Plus, 2.0 * kp.atan()), (Branch::Minus, 2.0 * km.atan())]
}

/// ψ at a fold, where the two roots coincide.
fn fold_psi(rd: &ReducedDynamics, rho: f64, eps: f64) -> f64 {
    let a = rd.a(rho);
    let [f1, f2, _, _] = rd.forcing(rho);
    let qa = a - eps * f1;
    if qa.abs() < 1e-300 {
        return PI;
    }
    2.0 * (-eps * f2 / qa).atan()
}

/// `G(Ω)` after eliminating ψ: the frequency equation along a branch.
pub fn frc_g(rd: &ReducedDynamics, rho: f64, omega: f64, psi: f64, eps: f64) -> f64 {
    zero_problem(rd, rho, omega, psi, eps)[1]
}

/// Everything needed to evaluate the reduced dynamics at any Ω.
pub struct FrcModel {
    pub ssm: Arc<AutonomousSsm>,
    pub mm: Arc<ModalModel>,
    forced_order: u32,
    cache: Option<ForcedCache>,
    c0: Complex64,
}

impl FrcModel {
    /// `forced_order = 1` keeps only the leading forcing coefficient, which is
    /// independent of Ω.
    pub fn new(ssm: Arc<AutonomousSsm>, mm: Arc<ModalModel>, forced_order: u32) -> Result<Self> {
        if forced_order == 0 || forced_order > ssm.order {
            return Err(SsmError::InvalidInput(format!(
                "forcing order {forced_order} must lie in 1..={}",
                ssm.order
            )));
        }
        let c0 = leading_forcing_coefficient(&mm);
        let cache = (forced_order > 1).then(|| ForcedCache::new(ssm.clone(), mm.clone(), forced_order));
        Ok(FrcModel { ssm, mm, forced_order, cache, c0 })
    }

    pub fn forced_order(&self) -> u32 {
        self.forced_order
    }

    pub fn c0(&self) -> Complex64 {
        self.c0
    }

    pub fn reduced_at(&self, omega: f64) -> Result<ReducedDynamics> {
        match &self.cache {
            None => Ok(ReducedDynamics::from_parts(&self.ssm, self.c0, omega)),
            Some(cache) => crate::reduced::assemble_polar(&self.ssm, &*cache.get(omega)?),
        }
    }

    /// Forced expansion at Ω, used for reconstructing physical responses.
    pub fn forced_at(&self, omega: f64) -> Result<ForcedReduction> {
        compute_nonautonomous_ssm(&self.ssm, &self.mm, omega, self.forced_order)
    }

    /// Solves the branch equations at fixed ρ. Returns `None` where the branch
    /// does not exist or needs Ω ≤ 0.
    pub fn solve_point(&self, rho: f64, eps: f64, branch: Branch) -> Result<Option<(f64, f64, ReducedDynamics)>> {
        let mut omega = crate::numeric::eval_sparse(&self.ssm.b_coeffs(), rho, 2, 0);
        for _ in 0..100 {
            if !(omega > 0.0) {
                return Ok(None);
            }
            let rd = self.reduced_at(omega)?;
            let psi = match branch {
                Branch::Fold => fold_psi(&rd, rho, eps),
                b => match k_branches(&rd, rho, eps).into_iter().find(|x| x.0 == b) {
                    Some((_, psi)) => psi,
                    None => return Ok(None),
                },
            };
            let [_, _, g1, g2] = rd.forcing(rho);
            let next = rd.b(rho) + eps * (g1 * psi.cos() - g2 * psi.sin()) / rho;
            if !(next > 0.0) {
                // far tail of the main branch: no physical forcing frequency
                return Ok(None);
            }
            if self.cache.is_none() || (next - omega).abs() <= 1e-14 * omega.abs().max(1.0) {
                return Ok(Some((next, psi, rd)));
            }
            omega = next;
        }
        log::debug!("frequency iteration stalled at rho = {rho}");
        Ok(None)
    }

    /// Fold discriminant along the double-root curve; `-∞` where no positive
    /// frequency solves the branch equations.
    pub fn fold_function(&self, rho: f64, eps: f64) -> Result<f64> {
        if self.cache.is_none() {
            return Ok(ReducedDynamics::from_parts(&self.ssm, self.c0, 0.0).discriminant(rho, eps));
        }
        match self.solve_point(rho, eps, Branch::Fold)? {
            Some((_, _, rd)) => Ok(rd.discriminant(rho, eps)),
            None => Ok(f64::NEG_INFINITY),
        }
    }

    /// `Σⱼ T[c, j] W₀ⱼ`: the autonomous part of one physical coordinate.
    pub fn projection(&self, coord: usize) -> Series2 {
        project(&self.mm, &self.ssm.w0, coord)
    }
}

fn project(mm: &ModalModel, rows: &[Series2], coord: usize) -> Series2 {
    let mut out = Series2::zeros(rows.iter().map(Series2::order).max().unwrap_or(0));
    for (j, w) in rows.iter().enumerate() {
        let t = mm.t[(coord, j)];
        if t != Complex64::new(0.0, 0.0) {
            out.axpy(t, &w.resized(out.order()));
        }
    }
    out
}

/// Maximum over one forcing period of `|x_coord|` along the periodic response.
pub fn physical_amplitude(model: &FrcModel, u: &FixedPointU, eps: f64, coord: usize, n_phi: usize) -> Result<f64> {
    let w0 = model.projection(coord);
    amplitude_with(model, &w0, u, eps, coord, n_phi)
}

fn amplitude_with(model: &FrcModel, w0: &Series2, u: &FixedPointU, eps: f64, coord: usize, n_phi: usize) -> Result<f64> {
    if coord >= model.mm.dim() {
        return Err(SsmError::InvalidInput(format!("coordinate {coord} out of range")));
    }
    let fr = model.forced_at(u.omega)?;
    let a = project(&model.mm, &fr.a, coord);
    let b = project(&model.mm, &fr.b, coord);
    let x = |phi: f64| {
        let s1 = Complex64::from_polar(u.rho, u.psi + phi);
        let s2 = s1.conj();
        let e = Complex64::from_polar(1.0, phi);
        let v = w0.eval(s1, s2) + (a.eval(s1, s2) * e + b.eval(s1, s2) * e.conj()) * eps;
        v.re.abs()
    };
    let n = n_phi.max(16);
    let h = 2.0 * PI / n as f64;
    let (k, best) = (0..n)
        .map(|k| (k, x(k as f64 * h)))
        .fold((0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
    let c = k as f64 * h;
    let (_, neg) = golden_min(|p| -x(p), c - h, c + h, 1e-12);
    Ok(best.max(-neg))
}

/// Newton solve of `F(ρ, ψ) = 0` at fixed Ω from a nearby seed.
pub fn solve_at_omega(model: &FrcModel, omega: f64, eps: f64, seed: (f64, f64), monitor: Option<usize>) -> Result<Option<FixedPointU>> {
    let rd = model.reduced_at(omega)?;
    let (mut rho, mut psi) = seed;
    for _ in 0..50 {
        let f = zero_problem(&rd, rho, omega, psi, eps);
        if f[0].hypot(f[1]) <= 1e-14 {
            break;
        }
        // Jacobian of (F₁, F₂) = (ρ̇, ρψ̇) in (ρ, ψ)
        let [f1, f2, g1, g2] = rd.forcing(rho);
        let [df1, df2, dg1, dg2] = rd.dforcing(rho);
        let (s, c) = psi.sin_cos();
        let j = nalgebra::Matrix2::new(
            rd.da(rho) + eps * (df1 * c + df2 * s),
            eps * (-f1 * s + f2 * c),
            rd.db(rho) * rho + rd.b(rho) - omega + eps * (dg1 * c - dg2 * s),
            eps * (-g1 * s - g2 * c),
        );
        let Some(step) = j.lu().solve(&nalgebra::Vector2::new(-f[0], -f[1])) else {
            return Ok(None);
        };
        rho += step[0];
        psi += step[1];
        if !(rho > 0.0) {
            return Ok(None);
        }
    }
    let f = zero_problem(&rd, rho, omega, psi, eps);
    if f[0].hypot(f[1]) > POINT_TOL {
        return Ok(None);
    }
    let stability = fixed_point_stability(&rd, rho, omega, psi, eps)?;
    let mut u = FixedPointU { rho, omega, psi, stability, physical_amplitude: None };
    if let Some(coord) = monitor {
        u.physical_amplitude = Some(physical_amplitude(model, &u, eps, coord, 256)?);
    }
    Ok(Some(u))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrcOptions {
    pub eps: f64,
    pub rho_max: f64,
    pub n_rho: usize,
    pub omega_window: Option<(f64, f64)>,
    /// First-order state index whose amplitude is reconstructed.
    pub monitor: Option<usize>,
    pub n_phi: usize,
    /// Eigenvalue real parts within this of zero are reported as folds.
    pub fold_tol: f64,
}

impl FrcOptions {
    pub fn new(eps: f64, rho_max: f64, n_rho: usize) -> Self {
        FrcOptions { eps, rho_max, n_rho, omega_window: None, monitor: None, n_phi: 256, fold_tol: FOLD_TOL }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrcPoint {
    pub component: usize,
    pub branch: Branch,
    #[serde(flatten)]
    pub u: FixedPointU,
}

/// One admissible ρ-interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrcComponent {
    pub rho_lo: f64,
    pub rho_hi: f64,
    /// Whether each end is a fold, as opposed to ρ = 0 or the grid limit.
    pub lo_fold: bool,
    pub hi_fold: bool,
}

impl FrcComponent {
    /// A closed curve that does not reach the unforced equilibrium.
    pub fn is_isola(&self) -> bool {
        self.lo_fold && self.hi_fold
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrcCurve {
    pub eps: f64,
    pub forced_order: u32,
    pub components: Vec<FrcComponent>,
    pub folds: Vec<f64>,
    pub points: Vec<FrcPoint>,
}

impl FrcCurve {
    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn component_points(&self, c: usize) -> impl Iterator<Item = &FrcPoint> {
        self.points.iter().filter(move |p| p.component == c)
    }
}

/// Locates the sign changes of the fold function on the grid, including
/// pairs hidden between two samples of equal sign.
fn locate_folds(model: &FrcModel, grid: &[f64], h: &[f64], eps: f64) -> Result<Vec<f64>> {
    let f = |r: f64| model.fold_function(r, eps).unwrap_or(f64::NEG_INFINITY);
    let tol = 1e-15;
    let mut folds = vec![];
    for k in 1..grid.len() {
        if (h[k - 1] >= 0.0) != (h[k] >= 0.0) {
            folds.push(bisect(f, grid[k - 1], grid[k], tol));
        }
        if k + 1 < grid.len() {
            let (l, m, r) = (h[k - 1], h[k], h[k + 1]);
            let dip = m >= 0.0 && l >= 0.0 && r >= 0.0 && m < l && m <= r;
            let bump = m < 0.0 && l < 0.0 && r < 0.0 && m > l && m >= r;
            if dip || bump {
                let sign = if dip { 1.0 } else { -1.0 };
                let (x, fx) = golden_min(|x| sign * f(x), grid[k - 1], grid[k + 1], 1e-14);
                if fx < 0.0 {
                    folds.push(bisect(f, grid[k - 1], x, tol));
                    folds.push(bisect(f, x, grid[k + 1], tol));
                }
            }
        }
    }
    folds.sort_by(f64::total_cmp);
    folds.dedup_by(|a, b| (*a - *b).abs() <= 1e-14);
    Ok(folds)
}

/// Newton polish in (Ω, ψ) at fixed ρ; keeps the step only if it helps.
fn polish(rd: &ReducedDynamics, rho: f64, omega: f64, psi: f64, eps: f64) -> (f64, f64, f64) {
    let norm = |o: f64, p: f64| {
        let f = zero_problem(rd, rho, o, p, eps);
        f[0].hypot(f[1])
    };
    let (mut o, mut p, mut r) = (omega, psi, norm(omega, psi));
    for _ in 0..3 {
        if r <= 1e-15 {
            break;
        }
        let [f1, f2, g1, g2] = rd.forcing(rho);
        let (s, c) = p.sin_cos();
        let d1 = eps * (-f1 * s + f2 * c);
        let d2 = eps * (-g1 * s - g2 * c);
        if d1.abs() < 1e-14 {
            break;
        }
        let f = zero_problem(rd, rho, o, p, eps);
        let dp = -f[0] / d1;
        let dom = (f[1] + d2 * dp) / rho;
        let (o2, p2) = (o + dom, p + dp);
        let r2 = norm(o2, p2);
        if r2 >= r {
            break;
        }
        (o, p, r) = (o2, p2, r2);
    }
    (o, p, r)
}

/// Traces the forced response curve at forcing amplitude `opts.eps`.
pub fn trace_frc(model: &FrcModel, opts: &FrcOptions) -> Result<FrcCurve> {
    let eps = opts.eps;
    if !(eps >= 0.0) || !(opts.rho_max > 0.0) || opts.n_rho < 2 {
        return Err(SsmError::InvalidInput("need eps >= 0, rho_max > 0 and n_rho >= 2".into()));
    }
    let n = opts.n_rho;
    let grid: Vec<f64> = (1..=n).map(|k| opts.rho_max * k as f64 / n as f64).collect();
    let h: Vec<f64> = grid
        .par_iter()
        .map(|&r| model.fold_function(r, eps))
        .collect::<Result<Vec<_>>>()?;
    let folds = locate_folds(model, &grid, &h, eps)?;

    // Walk the fold list from ρ → 0⁺, toggling admissibility.
    let mut components = vec![];
    // folds are only located between samples, so the first sample decides
    let mut open = (h[0] >= 0.0).then_some((0.0, false));
    for &f in &folds {
        match open.take() {
            Some((lo, lo_fold)) => components.push(FrcComponent { rho_lo: lo, rho_hi: f, lo_fold, hi_fold: true }),
            None => open = Some((f, true)),
        }
    }
    if let Some((lo, lo_fold)) = open {
        components.push(FrcComponent { rho_lo: lo, rho_hi: opts.rho_max, lo_fold, hi_fold: false });
    }
    components.retain(|c| c.rho_hi > c.rho_lo);

    let mut tasks: Vec<(usize, f64, Branch)> = vec![];
    for (ci, c) in components.iter().enumerate() {
        for branch in [Branch::Plus, Branch::Minus] {
            tasks.extend(grid.iter().filter(|&&r| r > c.rho_lo && r < c.rho_hi).map(|&r| (ci, r, branch)));
        }
        if c.lo_fold {
            tasks.push((ci, c.rho_lo, Branch::Fold));
        }
        if c.hi_fold {
            tasks.push((ci, c.rho_hi, Branch::Fold));
        }
    }
    let w0 = opts.monitor.map(|m| model.projection(m));
    let solved: Vec<Option<FrcPoint>> = tasks
        .par_iter()
        .map(|&(ci, rho, branch)| -> Result<Option<FrcPoint>> {
            let Some((omega, psi, rd)) = model.solve_point(rho, eps, branch)? else {
                return Ok(None);
            };
            let (omega, psi, res) = polish(&rd, rho, omega, psi, eps);
            if res > POINT_TOL {
                log::debug!("dropping point rho = {rho}, residual {res:e}");
                return Ok(None);
            }
            // turning points in ρ are saddle-nodes on isolas but the resonance
            // peak on a linear curve, so they are classified like any other point
            let stability = classify(&jacobian(&rd, rho, omega, psi, eps)?, opts.fold_tol);
            let mut u = FixedPointU { rho, omega, psi, stability, physical_amplitude: None };
            if let (Some(coord), Some(w0)) = (opts.monitor, &w0) {
                u.physical_amplitude = Some(amplitude_with(model, w0, &u, eps, coord, opts.n_phi)?);
            }
            Ok(Some(FrcPoint { component: ci, branch, u }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut points: Vec<FrcPoint> = solved.into_iter().flatten().collect();
    points.sort_by(|a, b| (a.component, a.branch).cmp(&(b.component, b.branch)).then(a.u.rho.total_cmp(&b.u.rho)));

    if let Some((lo, hi)) = opts.omega_window {
        points.retain(|p| p.u.omega >= lo && p.u.omega <= hi);
        let kept: Vec<usize> = (0..components.len()).filter(|&c| points.iter().any(|p| p.component == c)).collect();
        components = kept.iter().map(|&c| components[c]).collect();
        for p in &mut points {
            p.component = kept.iter().position(|&c| c == p.component).expect("kept component");
        }
    }
    Ok(FrcCurve { eps, forced_order: model.forced_order, components, folds, points })
}

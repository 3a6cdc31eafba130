//! Acceptance checks. One PASS/FAIL line per criterion; exits nonzero if any
//! criterion fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use ssm_core::isola::nonspurious_real_roots;
use ssm_core::oracle::{linear_frc_closed_form, sweep, OracleOptions, SweepDirection};
use ssm_core::presets::{self, ShawPierreParams};
use ssm_core::reduced::{classify, jacobian, jacobian_fd, FOLD_TOL};
use ssm_core::ssm_auto::invariance_residual;
use ssm_core::ssm_forced::forced_invariance_residual;
use ssm_core::*;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, what: &str, detail: String) {
        println!("{} [{id}] {what}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed += 1;
        }
    }
}

fn rel(x: f64, target: f64) -> f64 {
    (x - target).abs() / target.abs()
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn frc_model(mm: &Arc<ModalModel>, order: u32, forced: u32) -> FrcModel {
    let ssm = Arc::new(compute_autonomous_ssm(mm, order).expect("autonomous SSM"));
    FrcModel::new(ssm, mm.clone(), forced).expect("FRC model")
}

fn trace(model: &FrcModel, eps: f64, rho_max: f64, n_rho: usize, monitor: Option<usize>) -> FrcCurve {
    let mut o = FrcOptions::new(eps, rho_max, n_rho);
    o.monitor = monitor;
    trace_frc(model, &o).expect("FRC trace")
}

/// Points where analytic and finite-difference Jacobians disagree, ignoring
/// points either one places within the fold tolerance.
fn stability_disagreements(model: &FrcModel, curve: &FrcCurve) -> (usize, usize) {
    let mut checked = 0;
    let mut bad = 0;
    for p in &curve.points {
        let u = &p.u;
        let rd = model.reduced_at(u.omega).expect("reduced dynamics");
        let ja = classify(&jacobian(&rd, u.rho, u.omega, u.psi, curve.eps).expect("jacobian"), FOLD_TOL);
        let jf = classify(&jacobian_fd(&rd, u.rho, u.omega, u.psi, curve.eps, 1e-6).expect("jacobian"), FOLD_TOL);
        if ja == Stability::FoldDegenerate || jf == Stability::FoldDegenerate {
            continue;
        }
        checked += 1;
        if ja != jf {
            bad += 1;
        }
    }
    (checked, bad)
}

/// Frequencies in `window` not covered by any stable run of the curve. A run
/// is a chain of stable points on one branch whose ρ values are consecutive
/// grid nodes; it covers the Ω-range between its extreme points.
fn unstable_intervals(curve: &FrcCurve, rho_step: f64, window: (f64, f64)) -> Vec<(f64, f64)> {
    let mut covered: Vec<(f64, f64)> = vec![];
    let mut run: Option<(usize, Branch, f64, f64, f64)> = None;
    for p in &curve.points {
        let stable = p.u.stability == Stability::Stable;
        let extends = run.is_some_and(|(c, b, rho, _, _)| c == p.component && b == p.branch && (p.u.rho - rho).abs() <= 1.5 * rho_step);
        match (stable, extends, run.as_mut()) {
            (true, true, Some(r)) => {
                r.2 = p.u.rho;
                r.3 = r.3.min(p.u.omega);
                r.4 = r.4.max(p.u.omega);
            }
            _ => {
                if let Some((_, _, _, lo, hi)) = run.take() {
                    covered.push((lo, hi));
                }
                if stable {
                    run = Some((p.component, p.branch, p.u.rho, p.u.omega, p.u.omega));
                }
            }
        }
    }
    if let Some((_, _, _, lo, hi)) = run {
        covered.push((lo, hi));
    }
    covered.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut gaps = vec![];
    let mut reach = window.0;
    for (lo, hi) in covered {
        if lo > reach && reach < window.1 {
            gaps.push((reach, lo.min(window.1)));
        }
        reach = reach.max(hi);
    }
    if reach < window.1 {
        gaps.push((reach, window.1));
    }
    gaps
}

fn disk_samples(rng: &mut StdRng, r: f64, n: usize) -> Vec<(Complex64, Complex64)> {
    (0..n)
        .map(|_| {
            let s1 = Complex64::from_polar(r * rng.random_range(0.5..1.0), rng.random_range(0.0..std::f64::consts::TAU));
            (s1, s1.conj())
        })
        .collect()
}

fn slope(points: &[(f64, f64)]) -> f64 {
    ssm_core::numeric::lsq_slope(points)
}

fn main() {
    let mut rep = Report { failed: 0 };
    let sp = Arc::new(presets::shaw_pierre_modal());

    // 1. Shaw–Pierre cubic coefficient
    let t = Instant::now();
    let mm1 = presets::shaw_pierre_modal();
    let g1 = compute_autonomous_ssm(&mm1, 3).expect("SSM").gamma[0].re;
    let dt = t.elapsed();
    let target = ShawPierreParams::default().re_gamma1();
    rep.line(
        "1",
        rel(g1, 1.35) <= 1e-6 && rel(target, 1.35) <= 1e-12 && secs(dt) < 1.0,
        "Shaw-Pierre Re(gamma1) = 1.35 within 1e-6, < 1 s",
        format!("Re(gamma1) = {g1:.10}, rel err {:.2e}, {:.3} s", rel(g1, 1.35), secs(dt)),
    );

    // 2. Merger amplitude and component counts
    let t = Instant::now();
    let (_, sp_iso) = isola_report(&sp, 1..=25, 1, 0.0027).expect("isola report");
    let eps_m = sp_iso.leading.eps_m.unwrap_or(f64::NAN);
    let sp_model = frc_model(&sp, 3, 1);
    let sp_lo = trace(&sp_model, 0.0027, 1.0, 2000, None);
    let sp_hi = trace(&sp_model, 0.0029, 1.0, 2000, None);
    let dt = t.elapsed();
    let (n_lo, n_hi) = (sp_lo.num_components(), sp_hi.num_components());
    rep.line(
        "2",
        rel(eps_m, 0.0028) <= 0.02 && n_lo == 2 && n_hi == 1 && secs(dt) < 30.0,
        "Shaw-Pierre eps_m = 0.0028 within 2%, 2 components at 0.0027, 1 at 0.0029, < 30 s",
        format!("eps_m = {eps_m:.7} (rel err {:.2e}), components {n_lo}/{n_hi}, {:.2} s", rel(eps_m, 0.0028), secs(dt)),
    );

    // 3. Beam eigenvalues
    let t = Instant::now();
    let beam_sys = presets::beam(25);
    let beam = Arc::new(presets::modal(&beam_sys));
    let dt = t.elapsed();
    let l1 = beam.lambda1();
    rep.line(
        "3",
        rel(l1.re, -0.0061884) <= 1e-3 && rel(l1.im, 7.0005) <= 1e-3 && secs(dt) < 5.0,
        "beam lambda1 = -0.0061884 + 7.0005i within 0.1%, < 5 s",
        format!(
            "lambda1 = {:.7} + {:.5}i (rel err {:.2e}, {:.2e}), {:.2} s",
            l1.re,
            l1.im,
            rel(l1.re, -0.0061884),
            rel(l1.im, 7.0005),
            secs(dt)
        ),
    );

    // 4. Beam reduced model
    let bssm = compute_autonomous_ssm(&beam, 3).expect("beam SSM");
    let (a, b) = (bssm.a_coeffs(), bssm.b_coeffs());
    let c0 = leading_forcing_coefficient(&beam);
    let (_, beam_iso) = isola_report(&beam, 1..=25, 1, 0.002).expect("beam isola report");
    let rho1 = beam_iso.leading.rho1.unwrap_or(f64::NAN);
    let beps = beam_iso.leading.eps_m.unwrap_or(f64::NAN);
    let coeff_errs = [
        rel(a[0], -0.0061884),
        rel(a[1], 0.036202),
        rel(b[0], 7.0005),
        rel(b[1], 0.031689),
        rel(c0.re, 0.54645),
        rel(c0.im, 0.00048),
    ];
    let worst = coeff_errs.iter().copied().fold(0.0, f64::max);
    rep.line(
        "4",
        worst <= 0.01 && beam_iso.leading.exists && rel(rho1, 0.413) <= 0.01 && rel(beps, 0.0018) <= 0.05,
        "beam a, b, c10 within 1%, rho1 = 0.413 within 1%, eps_m = 0.0018 within 5%",
        format!(
            "a = ({:.7}, {:.6}), b = ({:.5}, {:.6}), c10 = {:.5}{:+.5}i, worst rel err {worst:.2e}; rho1 = {rho1:.5} ({:.2e}), eps_m = {beps:.6} ({:.2e})",
            a[0],
            a[1],
            b[0],
            b[1],
            c0.re,
            c0.im,
            rel(rho1, 0.413),
            rel(beps, 0.0018)
        ),
    );

    // 5. Quintic two-isola structure
    let t = Instant::now();
    let q = Arc::new(presets::modal(&presets::shaw_pierre_quintic()));
    let track = roots_of_a(&q, 1..=15).expect("root track");
    let classes = classify_roots(&track);
    let roots: Vec<f64> = nonspurious_real_roots(&track, &classes, 2).iter().map(|r| r.rho).collect();
    let q_model = frc_model(&q, 5, 5);
    let q_curves: Vec<FrcCurve> = [0.001, 0.0025, 0.003].iter().map(|&e| trace(&q_model, e, 0.5, 2000, None)).collect();
    let dt = t.elapsed();
    let counts: Vec<usize> = q_curves.iter().map(|c| c.num_components()).collect();
    let roots_ok = roots.len() == 2 && rel(roots[0], 0.13) <= 0.05 && rel(roots[1], 0.17) <= 0.05;
    rep.line(
        "5",
        roots_ok && counts == [3, 2, 1] && secs(dt) < 120.0,
        "quintic order 5: non-spurious roots 0.13, 0.17 within 5%, components 3/2/1, < 2 min",
        format!(
            "roots {:?} (rel err {:?}), components {counts:?}, {:.2} s",
            roots.iter().map(|r| format!("{r:.5}")).collect::<Vec<_>>(),
            roots.iter().zip([0.13, 0.17]).map(|(r, t)| format!("{:.2e}", rel(*r, t))).collect::<Vec<_>>(),
            secs(dt)
        ),
    );

    // 6. Invariance residuals
    let mut rng = StdRng::seed_from_u64(6);
    let mut ok = true;
    let mut detail = vec![];
    for order in [3u32, 5, 7] {
        let ssm = compute_autonomous_ssm(&sp, order).expect("SSM");
        let fr = compute_nonautonomous_ssm(&ssm, &sp, 1.73, order).expect("forced SSM");
        let auto_small = invariance_residual(&ssm, &sp, &disk_samples(&mut rng, 1e-3, 32));
        let forced_small = {
            let s: Vec<_> = disk_samples(&mut rng, 1e-3, 32)
                .into_iter()
                .map(|(a, b)| (a, b, rng.random_range(0.0..std::f64::consts::TAU)))
                .collect();
            forced_invariance_residual(&ssm, &sp, &fr, &s)
        };
        let logs: Vec<(f64, f64)> = [1e-3, 1e-2, 1e-1]
            .iter()
            .map(|&r: &f64| (r.ln(), invariance_residual(&ssm, &sp, &disk_samples(&mut rng, r, 32)).ln()))
            .collect();
        let s = slope(&logs);
        ok &= auto_small <= 1e-9 && forced_small <= 1e-9 && s >= order as f64 - 0.2;
        detail.push(format!("order {order}: O(1) {auto_small:.1e}, O(eps) {forced_small:.1e}, slope {s:.2}"));
    }
    rep.line("6", ok, "O(1)/O(eps) residuals <= 1e-9 at radius 1e-3, slope >= order - 0.2", detail.join("; "));

    // 7. Oracle cross-validation
    let lin = Arc::new(presets::modal(&presets::shaw_pierre_linear()));
    let lin_curve = trace(&frc_model(&lin, 3, 1), 0.001, 0.02, 2000, None);
    let n = lin_curve.points.len();
    let lin_err = (0..200)
        .map(|k| &lin_curve.points[k * (n - 1) / 199])
        .map(|p| rel(p.u.rho, linear_frc_closed_form(&lin, 0.001, p.u.omega)))
        .fold(0.0, f64::max);
    let lin_ok = n >= 200 && lin_err <= 1e-10;

    let sp_amp = trace(&sp_model, 0.0027, 1.0, 2000, Some(0));
    let stable: Vec<&FrcPoint> = sp_amp.component_points(0).filter(|p| p.u.stability == Stability::Stable).collect();
    let picks: Vec<&FrcPoint> = (0..20).map(|k| stable[k * (stable.len() - 1) / 19]).collect();
    let mut omegas: Vec<f64> = picks.iter().map(|p| p.u.omega).collect();
    omegas.sort_by(f64::total_cmp);
    omegas.dedup();
    let sp_sweep = sweep(&sp, 0.0027, &omegas, &[0], false, SweepDirection::Up, &OracleOptions::default()).expect("sweep");
    let amp_err = picks
        .iter()
        .map(|p| {
            let s = sp_sweep.points.iter().find(|s| s.omega == p.u.omega).expect("swept");
            if s.converged {
                rel(s.amplitude[0], p.u.physical_amplitude.expect("amplitude"))
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    let amp_ok = omegas.len() == 20 && amp_err <= 0.02;

    let tip = beam.fos.coordinate("tip").expect("tip coordinate");
    let beam_curve = trace(&frc_model(&beam, 3, 1), 0.002, 1.0, 2000, None);
    let unstable = unstable_intervals(&beam_curve, 1.0 / 2000.0, (6.8, 7.3));
    let grid: Vec<f64> = (0..200).map(|k| 6.8 + 0.5 * k as f64 / 199.0).collect();
    let t = Instant::now();
    let beam_sweep = sweep(&beam, 0.002, &grid, &[tip], true, SweepDirection::Up, &OracleOptions::default()).expect("beam sweep");
    let sweep_time = t.elapsed();
    let nc = beam_sweep.nonconvergent();
    let inside: Vec<f64> = nc.iter().copied().filter(|w| unstable.iter().any(|(lo, hi)| (lo..=hi).contains(&w))).collect();
    let window = (nc.iter().copied().fold(f64::INFINITY, f64::min), nc.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    rep.line(
        "7",
        lin_ok && amp_ok && !inside.is_empty(),
        "linear FRC vs closed form 1e-10 at 200 points; SP sweep vs amplitude 2% at 20 points; beam non-convergent window overlaps unstable interval",
        format!(
            "linear max rel err {lin_err:.1e} over {} points; SP max rel err {amp_err:.2e} at {} frequencies; beam unstable {}, non-convergent [{:.5}, {:.5}] ({} points, {} inside, sweep {:.0} s)",
            n.min(200),
            omegas.len(),
            unstable.iter().map(|(lo, hi)| format!("[{lo:.5}, {hi:.5}]")).collect::<Vec<_>>().join(" "),
            window.0,
            window.1,
            nc.len(),
            inside.len(),
            secs(sweep_time)
        ),
    );

    // 8. Stability tagging vs finite differences
    let mut checked = 0;
    let mut bad = 0;
    for (model, curve) in [(&sp_model, &sp_lo), (&sp_model, &sp_hi)].into_iter().chain(q_curves.iter().map(|c| (&q_model, c))) {
        let (c, b) = stability_disagreements(model, curve);
        checked += c;
        bad += b;
    }
    rep.line(
        "8",
        bad == 0 && checked > 0,
        "analytic vs finite-difference stability at traced points of criteria 2 and 5",
        format!("{bad} disagreements over {checked} points"),
    );

    if rep.failed > 0 {
        println!("{} criterion(s) failed", rep.failed);
        std::process::exit(1);
    }
}

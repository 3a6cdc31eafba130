use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::{json, Value};

use ssm_core::beam::{build_beam, BeamSpec};
use ssm_core::isola::{isola_report_with, RootTolerances};
use ssm_core::model::{check_nonresonance_with, modal_decompose, spectral_quotient, to_first_order, NonResonanceReport};
use ssm_core::oracle::{sweep, Method, OracleOptions, SweepDirection};
use ssm_core::ssm_auto::invariance_residual;
use ssm_core::{
    compute_autonomous_ssm, compute_nonautonomous_ssm, leading_forcing_coefficient, trace_frc, FrcModel, FrcOptions,
    MechanicalSystem, ModalModel, SsmError,
};

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::output::{config_record, json_document, Header, Staged};
use crate::svg;

/// Settings shared by every command.
pub struct Context {
    pub tol: Tolerances,
    pub seed: u64,
    pub quiet: bool,
}

impl Context {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn record(&self, command: &str, args: &impl Serialize, input: Option<&[u8]>) -> Value {
        config_record(&json!({ "command": command, "args": args, "tolerances": self.tol, "seed": self.seed }), input)
    }
}

struct Loaded {
    bytes: Vec<u8>,
    mm: ModalModel,
    nonresonance: NonResonanceReport,
}

fn load(sys: &SystemArgs, ctx: &Context) -> CliResult<Loaded> {
    let bytes = std::fs::read(&sys.system).map_err(|e| CliError::io(format!("reading {}", sys.system.display()), e))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| SsmError::InvalidInput("system file is not UTF-8".into()))?;
    let system = MechanicalSystem::from_json(text)?;
    let mm = modal_decompose(&to_first_order(&system)?, sys.mode)?;
    let nonresonance = check_nonresonance_with(&mm, spectral_quotient(&mm).max(2), ctx.tol.nonresonance);
    if !nonresonance.pass {
        if sys.skip_nonresonance {
            log::warn!("non-resonance conditions fail; continuing as requested");
        } else {
            return Err(SsmError::NonResonance { violations: nonresonance.violations }.into());
        }
    }
    Ok(Loaded { bytes, mm, nonresonance })
}

fn coordinate(mm: &ModalModel, name: Option<&str>) -> CliResult<(usize, String)> {
    let fos = &mm.fos;
    let name = match name {
        Some(n) => n.to_string(),
        None if fos.coordinate("tip").is_ok() => "tip".into(),
        None => "y1".into(),
    };
    Ok((fos.coordinate(&name)?, name))
}

fn c(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn analyze(a: &AnalyzeArgs, ctx: &Context) -> CliResult<()> {
    check_order(a.order)?;
    let l = load(&a.sys, ctx)?;
    let mm = &l.mm;
    let ssm = compute_autonomous_ssm(mm, a.order)?;
    let c0 = leading_forcing_coefficient(mm);
    let mut rng = StdRng::seed_from_u64(ctx.seed);
    let samples: Vec<(Complex64, Complex64)> = (0..32)
        .map(|_| {
            let s1 = Complex64::from_polar(1e-3 * rng.random_range(0.5..1.0), rng.random_range(0.0..std::f64::consts::TAU));
            (s1, s1.conj())
        })
        .collect();
    let residual = invariance_residual(&ssm, mm, &samples);
    let header = Header::new("analyze", &ctx.record("analyze", a, Some(&l.bytes)), mm);
    let body = json!({
        "mode": a.sys.mode,
        "order": a.order,
        "eigenvalues": mm.eigenvalues.iter().map(|z| c(*z)).collect::<Vec<_>>(),
        "spectral_quotient": spectral_quotient(mm),
        "nonresonance": l.nonresonance,
        "gamma": ssm.gamma.iter().map(|z| c(*z)).collect::<Vec<_>>(),
        "a_coeffs": ssm.a_coeffs(),
        "b_coeffs": ssm.b_coeffs(),
        "c10": c(c0),
        "invariance_residual": { "radius": 1e-3, "samples": samples.len(), "max_relative": residual },
    });
    let doc = json_document(&header, body);
    let mut staged = Staged::default();
    if let Some(path) = &a.dump_ssm {
        let forced = match a.dump_omega {
            Some(w) if w > 0.0 => Some(compute_nonautonomous_ssm(&ssm, mm, w, a.order)?),
            Some(w) => return Err(CliError::Usage(format!("dump frequency must be positive, got {w}"))),
            None => None,
        };
        staged.add(path, dump_ssm(&header, &ssm, forced.as_ref()).as_bytes())?;
    }
    match &a.out {
        Some(path) => staged.add(path, doc.as_bytes())?,
        None => print!("{doc}"),
    }
    staged.commit()?;
    let l1 = mm.lambda1();
    ctx.say(format!(
        "analyze: lambda1 = {:e}{:+e}i, Re(gamma1) = {:e}, non-resonance {}",
        l1.re,
        l1.im,
        ssm.gamma.first().map_or(0.0, |g| g.re),
        if l.nonresonance.pass { "pass" } else { "FAIL" }
    ));
    Ok(())
}

/// Text dump of the expansion; layout in docs/formats.md.
fn dump_ssm(header: &Header, ssm: &ssm_core::AutonomousSsm, forced: Option<&ssm_core::ForcedReduction>) -> String {
    let mut s = header.comment_lines();
    let _ = writeln!(s, "order {}", ssm.order);
    let _ = writeln!(s, "lambda {:e} {:e}", ssm.lambda.re, ssm.lambda.im);
    for (j, g) in ssm.gamma.iter().enumerate() {
        let _ = writeln!(s, "gamma {} {:e} {:e}", j + 1, g.re, g.im);
    }
    let series = |s: &mut String, tag: &str, rows: &[ssm_core::Series2]| {
        for (i, w) in rows.iter().enumerate() {
            for (m1, m2, z) in w.iter() {
                if z.re != 0.0 || z.im != 0.0 {
                    let _ = writeln!(s, "{tag} {} {m1} {m2} {:e} {:e}", i + 1, z.re, z.im);
                }
            }
        }
    };
    series(&mut s, "w0", &ssm.w0);
    series(&mut s, "r0", &ssm.r0);
    if let Some(fr) = forced {
        let _ = writeln!(s, "omega {:e}", fr.omega);
        let _ = writeln!(s, "c00 {:e} {:e}", fr.c00.re, fr.c00.im);
        for (i, z) in fr.c_ii.iter().enumerate() {
            let _ = writeln!(s, "c_ii {} {:e} {:e}", i + 1, z.re, z.im);
        }
        for (i, z) in fr.d_pm.iter().enumerate() {
            let _ = writeln!(s, "d_pm {} {:e} {:e}", i + 1, z.re, z.im);
        }
        series(&mut s, "w1a", &fr.a);
        series(&mut s, "w1b", &fr.b);
        series(&mut s, "r1c", &fr.c);
        series(&mut s, "r1d", &fr.d);
    }
    s
}

pub fn beam(a: &BeamArgs, ctx: &Context) -> CliResult<()> {
    let (mut spec, input): (Value, Option<Vec<u8>>) = match &a.params {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| CliError::io(format!("reading {}", p.display()), e))?;
            (serde_json::from_slice(&bytes).map_err(SsmError::from)?, Some(bytes))
        }
        None => (serde_json::to_value(ssm_core::presets::beam_spec(25)).expect("spec serializes"), None),
    };
    if let (Some(n), Value::Object(map)) = (a.elements, &mut spec) {
        map.insert("elements".into(), json!(n));
    }
    let spec: BeamSpec = serde_json::from_value(spec).map_err(SsmError::from)?;
    let system = build_beam(&spec)?;
    let mm = modal_decompose(&to_first_order(&system)?, 1)?;
    let header = Header::new("beam", &ctx.record("beam", &json!({ "args": a, "spec": spec }), input.as_deref()), &mm);
    let mut file = system.to_file_data();
    file.header = Some(header.to_json());
    let text = serde_json::to_string_pretty(&file).expect("system serializes") + "\n";
    let mut staged = Staged::default();
    staged.add(&a.out, text.as_bytes())?;
    staged.commit()?;
    let l1 = mm.lambda1();
    ctx.say(format!(
        "beam: {} elements, {} DOF, lambda1 = {:e}{:+e}i -> {}",
        spec.elements,
        system.n,
        l1.re,
        l1.im,
        a.out.display()
    ));
    Ok(())
}

pub fn frc(a: &FrcArgs, ctx: &Context) -> CliResult<()> {
    check_order(a.order)?;
    check_eps(a.eps)?;
    let l = load(&a.sys, ctx)?;
    let mm = Arc::new(l.mm);
    let (monitor, monitor_name) = coordinate(&mm, a.monitor.as_deref())?;
    let ssm = Arc::new(compute_autonomous_ssm(&mm, a.order)?);
    let model = FrcModel::new(ssm, mm.clone(), a.forced_order)?;
    let mut opts = FrcOptions::new(a.eps, a.rho_max, a.n_rho);
    opts.monitor = Some(monitor);
    opts.n_phi = a.n_phi;
    opts.fold_tol = ctx.tol.fold;
    opts.omega_window = match (a.omega_min, a.omega_max) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(0.0), hi.unwrap_or(f64::INFINITY))),
    };
    let curve = trace_frc(&model, &opts)?;
    let header = Header::new("frc", &ctx.record("frc", a, Some(&l.bytes)), &mm);
    let mut csv = header.comment_lines();
    let _ = writeln!(csv, "# eps {:e} order {} forced_order {} monitor {monitor_name}", a.eps, a.order, a.forced_order);
    let _ = writeln!(csv, "# components {}", curve.num_components());
    let folds: Vec<String> = curve.folds.iter().map(|r| format!("{r:e}")).collect();
    let _ = writeln!(csv, "# folds {}", folds.join(" "));
    csv.push_str("component,branch,Omega,rho,psi,stability,physical_amplitude\n");
    for p in &curve.points {
        let _ = writeln!(
            csv,
            "{},{},{:e},{:e},{:e},{},{:e}",
            p.component,
            p.branch.as_str(),
            p.u.omega,
            p.u.rho,
            p.u.psi,
            p.u.stability.as_str(),
            p.u.physical_amplitude.unwrap_or(f64::NAN)
        );
    }
    let mut staged = Staged::default();
    staged.add(&a.out, csv.as_bytes())?;
    if let Some(path) = &a.svg {
        staged.add(path, svg::frc_plot(&curve, &format!("max |{monitor_name}|")).as_bytes())?;
    }
    staged.commit()?;
    ctx.say(format!(
        "frc: {} points, {} component(s), {} fold(s) -> {}",
        curve.points.len(),
        curve.num_components(),
        curve.folds.len(),
        a.out.display()
    ));
    Ok(())
}

pub fn isola(a: &IsolaArgs, ctx: &Context) -> CliResult<()> {
    check_eps(a.eps)?;
    check_order(a.analysis_order)?;
    let orders = parse_orders(&a.orders)?;
    let m = (a.analysis_order - 1) / 2;
    let l = load(&a.sys, ctx)?;
    let tol = RootTolerances { cauchy: ctx.tol.cauchy, radius_fraction: ctx.tol.radius_fraction };
    let (track, report) = isola_report_with(&l.mm, orders.clone(), m, a.eps, tol)?;
    let header = Header::new("isola", &ctx.record("isola", a, Some(&l.bytes)), &l.mm);
    let body = json!({
        "orders": [orders.start(), orders.end()],
        "report": report,
        "root_track": track,
    });
    let mut staged = Staged::default();
    staged.add(&a.out, json_document(&header, body).as_bytes())?;
    if let Some(path) = &a.roots_svg {
        staged.add(path, svg::roots_plot(&track).as_bytes())?;
    }
    staged.commit()?;
    let roots: Vec<String> = report.nonspurious_roots.iter().map(|r| format!("{:.6}", r.rho)).collect();
    ctx.say(format!(
        "isola: non-spurious roots [{}], rho1 {}, eps_m {} -> {}",
        roots.join(", "),
        report.leading.rho1.map_or("-".into(), |r| format!("{r:.6}")),
        report.leading.eps_m.map_or("-".into(), |e| format!("{e:.6}")),
        a.out.display()
    ));
    Ok(())
}

pub fn verify(a: &VerifyArgs, ctx: &Context) -> CliResult<()> {
    check_eps(a.eps)?;
    let grid = parse_grid(&a.omega)?;
    if !grid.iter().all(|w| *w > 0.0) {
        return Err(CliError::Usage("frequencies must be positive".into()));
    }
    if a.steps_per_period < 8 || a.max_periods == 0 || a.steady_count == 0 || !(a.transient_factor >= 0.0) {
        return Err(CliError::Usage("sweep settings out of range".into()));
    }
    let l = load(&a.sys, ctx)?;
    let mm = &l.mm;
    let mut monitors = vec![];
    let mut names = vec![];
    for name in a.monitor.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (i, n) = coordinate(mm, Some(name))?;
        monitors.push(i);
        names.push(n);
    }
    if monitors.is_empty() {
        return Err(CliError::Usage("at least one monitor coordinate is required".into()));
    }
    let opts = OracleOptions {
        rtol: ctx.tol.rtol,
        atol: ctx.tol.atol,
        steps_per_period: a.steps_per_period,
        transient_factor: a.transient_factor,
        min_periods: a.min_periods,
        max_periods: a.max_periods,
        steady_tol: ctx.tol.steady,
        steady_count: a.steady_count,
        tail_correction: !a.no_tail_correction,
        method: match a.method {
            MethodArg::Auto => Method::Auto,
            MethodArg::Dopri5 => Method::Dopri5,
            MethodArg::Etdrk4 => Method::Etdrk4,
        },
        ..OracleOptions::default()
    };
    let (warm, dir) = match a.sweep {
        SweepMode::Up => (true, SweepDirection::Up),
        SweepMode::Down => (true, SweepDirection::Down),
        SweepMode::Cold => (false, SweepDirection::Up),
    };
    let result = sweep(mm, a.eps, &grid, &monitors, warm, dir, &opts)?;
    let header = Header::new("verify", &ctx.record("verify", a, Some(&l.bytes)), mm);
    let mut csv = header.comment_lines();
    let method = match result.method {
        Method::Auto => "auto",
        Method::Dopri5 => "dopri5",
        Method::Etdrk4 => "etdrk4",
    };
    let _ = writeln!(csv, "# eps {:e} sweep {} method {method}", a.eps, serde_json::to_value(a.sweep).expect("enum").as_str().unwrap_or("?"));
    let cols: Vec<String> = names.iter().map(|n| format!("amplitude_{n}")).collect();
    let _ = writeln!(csv, "Omega,{},converged,blow_up,periods", cols.join(","));
    for p in &result.points {
        let amps: Vec<String> = p.amplitude.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(csv, "{:e},{},{},{},{}", p.omega, amps.join(","), p.converged, p.blow_up, p.periods);
    }
    let mut staged = Staged::default();
    staged.add(&a.out, csv.as_bytes())?;
    staged.commit()?;
    let nc = result.nonconvergent();
    ctx.say(format!(
        "verify: {} frequencies, {} non-convergent{} -> {}",
        result.points.len(),
        nc.len(),
        match (nc.first(), nc.last()) {
            (Some(a), Some(b)) => format!(" in [{:.6}, {:.6}]", a.min(*b), a.max(*b)),
            _ => String::new(),
        },
        a.out.display()
    ));
    Ok(())
}

/// Reads an optional tolerance file.
pub fn read_config(path: Option<&Path>) -> CliResult<Option<TolFlags>> {
    let Some(p) = path else { return Ok(None) };
    let bytes = std::fs::read(p).map_err(|e| CliError::io(format!("reading {}", p.display()), e))?;
    Ok(Some(serde_json::from_slice(&bytes).map_err(SsmError::from)?))
}

//! Direct time integration of the full system, used to check the reduced
//! predictions.
//!
//! Two integrators are available. Dormand–Prince 5(4) with adaptive steps
//! handles mildly damped, non-stiff systems. Discretized structures carry
//! modes whose decay rates exceed the forcing frequency by orders of
//! magnitude; for those, a fourth-order exponential time-differencing scheme
//! (Cox–Matthews ETDRK4) in diagonal modal coordinates integrates the linear
//! part exactly and only the forcing and nonlinearity are approximated.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsmError};
use crate::model::{FirstOrderSystem, ModalModel};
use crate::ssm_forced::leading_forcing_coefficient;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// ETDRK4 when explicit steps would be limited by stability, else DOPRI5.
    Auto,
    Dopri5,
    Etdrk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepDirection {
    Up,
    Down,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Samples (and ETD steps) per forcing period.
    pub steps_per_period: usize,
    /// Transient horizon in units of `1/|Re λ₁|`.
    pub transient_factor: f64,
    pub min_periods: usize,
    pub max_periods: usize,
    /// Accepted `max_t |x(t) − x(t − T)|` over a period, relative to the
    /// amplitude, on every monitor.
    pub steady_tol: f64,
    pub steady_count: usize,
    /// Scale the threshold by `|1 − e^{λ₁T}|`, turning the per-period change
    /// into a bound on the distance to the periodic orbit. Without it a slowly
    /// decaying transient passes the test long before it has settled.
    pub tail_correction: bool,
    /// `‖x‖∞` above which a run counts as escaped.
    pub blowup: f64,
    pub method: Method,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            rtol: 1e-10,
            atol: 1e-13,
            steps_per_period: 200,
            transient_factor: 5.0,
            min_periods: 20,
            max_periods: 400,
            steady_tol: 1e-3,
            steady_count: 3,
            tail_correction: true,
            blowup: 1e6,
            method: Method::Auto,
        }
    }
}

/// Uniformly sampled trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<DVector<f64>>,
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Dopri<'a> {
    fos: &'a FirstOrderSystem,
    eps: f64,
    omega: f64,
    rtol: f64,
    atol: f64,
    h: f64,
    /// Fixed step instead of error control, used by convergence tests.
    fixed: Option<f64>,
}

impl Dopri<'_> {
    fn f(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        self.fos.vector_field(x, t, self.eps, self.omega)
    }

    fn step(&self, x: &DVector<f64>, t: f64, h: f64) -> (DVector<f64>, f64) {
        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        for s in 0..7 {
            let mut xs = x.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s][j] != 0.0 {
                    xs.axpy(h * A[s][j], kj, 1.0);
                }
            }
            k.push(self.f(&xs, t + C[s] * h));
        }
        let mut x5 = x.clone();
        let mut e = DVector::zeros(x.len());
        for s in 0..7 {
            x5.axpy(h * B5[s], &k[s], 1.0);
            e.axpy(h * (B5[s] - B4[s]), &k[s], 1.0);
        }
        let err = (0..x.len())
            .map(|i| {
                let sc = self.atol + self.rtol * x[i].abs().max(x5[i].abs());
                (e[i] / sc).powi(2)
            })
            .sum::<f64>()
            / x.len() as f64;
        (x5, err.sqrt())
    }

    /// Integrates from `t0` to `t1` in place.
    fn advance(&mut self, x: &mut DVector<f64>, t0: f64, t1: f64) -> Result<()> {
        let mut t = t0;
        if let Some(h) = self.fixed {
            let n = ((t1 - t0) / h).round().max(1.0) as usize;
            let h = (t1 - t0) / n as f64;
            for _ in 0..n {
                *x = self.step(x, t, h).0;
                t += h;
            }
            return Ok(());
        }
        while t < t1 {
            let h = self.h.min(t1 - t);
            let (xn, err) = self.step(x, t, h);
            if err <= 1.0 && xn.iter().all(|v| v.is_finite()) {
                t = if t1 - (t + h) <= 1e-14 * t1.abs().max(1.0) { t1 } else { t + h };
                *x = xn;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                self.h = h * fac;
            } else {
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.5) } else { 0.1 };
                self.h = h * fac;
            }
            if self.h < 1e-14 * t.abs().max(1.0) {
                return Err(SsmError::Stiffness { t, h: self.h });
            }
        }
        Ok(())
    }
}

/// φ-function weights of ETDRK4 for one decay rate, by contour averaging
/// near the origin where the closed forms cancel.
fn etd_weights(z: Complex64, h: f64) -> [Complex64; 4] {
    let one = Complex64::new(1.0, 0.0);
    let direct = |z: Complex64| -> [Complex64; 4] {
        let ez = z.exp();
        let z3 = z * z * z;
        [
            ((z / 2.0).exp() - one) / z,
            (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3,
            (2.0 + z + ez * (z - 2.0)) / z3,
            (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3,
        ]
    };
    // the unit contour must stay away from the origin
    let w = if z.norm() < 0.5 {
        let m = 64;
        let mut acc = [Complex64::new(0.0, 0.0); 4];
        for j in 0..m {
            let r = z + Complex64::from_polar(1.0, 2.0 * PI * (j as f64 + 0.5) / m as f64);
            for (a, v) in acc.iter_mut().zip(direct(r)) {
                *a += v;
            }
        }
        acc.map(|a| a / m as f64)
    } else {
        direct(z)
    };
    w.map(|c| c * h)
}

/// `(support slot, power)` pairs of one monomial.
type Powers = Vec<(usize, i32)>;

/// ETDRK4 in modal coordinates, keeping one member of each conjugate pair.
///
/// Only the state components entering the nonlinearity are reconstructed per
/// stage, so a step costs a few passes over the modal vector.
struct Etd<'a> {
    mm: &'a ModalModel,
    eps: f64,
    omega: f64,
    h: f64,
    reps: Vec<usize>,
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    w: Vec<[Complex64; 4]>,
    /// Weighted rows of `T` for each state component in the nonlinearity.
    support_rows: Vec<Vec<Complex64>>,
    forcing: Vec<Complex64>,
    /// Distinct monomials `[(support slot, power)]`, each with the modal
    /// vector `Σ c T⁻¹[:, row]` of the terms sharing it.
    monomials: Vec<(Powers, Vec<Complex64>)>,
    xs: Vec<f64>,
    buf: [Vec<Complex64>; 7],
}

impl<'a> Etd<'a> {
    fn new(mm: &'a ModalModel, eps: f64, omega: f64, h: f64) -> Self {
        let mut reps = vec![];
        let mut weight = vec![];
        for (k, l) in mm.eigenvalues.iter().enumerate() {
            if l.im > 0.0 {
                reps.push(k);
                weight.push(2.0);
            } else if l.im == 0.0 {
                reps.push(k);
                weight.push(1.0);
            }
        }
        let mut support: Vec<usize> = mm.fos.nonlinear.iter().flat_map(|t| t.exponents.support().map(|(i, _)| i)).collect();
        support.sort_unstable();
        support.dedup();
        let mut monomials: Vec<(Powers, Vec<Complex64>)> = vec![];
        for t in &mm.fos.nonlinear {
            let pows: Vec<(usize, i32)> = t
                .exponents
                .support()
                .map(|(i, p)| (support.binary_search(&i).expect("support listed"), p as i32))
                .collect();
            let slot = match monomials.iter().position(|(m, _)| *m == pows) {
                Some(k) => k,
                None => {
                    monomials.push((pows, vec![Complex64::new(0.0, 0.0); reps.len()]));
                    monomials.len() - 1
                }
            };
            for (v, &k) in monomials[slot].1.iter_mut().zip(&reps) {
                *v += mm.t_inv[(k, t.row)] * t.coefficient;
            }
        }
        let lam: Vec<Complex64> = reps.iter().map(|&k| mm.eigenvalues[k]).collect();
        let nr = reps.len();
        Etd {
            mm,
            eps,
            omega,
            h,
            e: lam.iter().map(|l| (l * h).exp()).collect(),
            e2: lam.iter().map(|l| (l * h / 2.0).exp()).collect(),
            w: lam.iter().map(|l| etd_weights(l * h, h)).collect(),
            support_rows: support
                .iter()
                .map(|&s| reps.iter().zip(&weight).map(|(&k, &w)| mm.t[(s, k)] * w).collect())
                .collect(),
            forcing: reps.iter().map(|&k| mm.forcing_modal[k]).collect(),
            monomials,
            xs: vec![0.0; support.len()],
            buf: std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); nr]),
            reps,
        }
    }

    fn weight(&self, k: usize) -> f64 {
        if self.mm.eigenvalues[k].im > 0.0 {
            2.0
        } else {
            1.0
        }
    }

    fn physical_row(&self, q: &[Complex64], row: usize) -> f64 {
        self.reps.iter().zip(q).map(|(&k, z)| self.weight(k) * (self.mm.t[(row, k)] * z).re).sum()
    }

    fn to_physical(&self, q: &[Complex64]) -> DVector<f64> {
        DVector::from_fn(self.mm.dim(), |r, _| self.physical_row(q, r))
    }

    fn modal_of(&self, x: &DVector<f64>) -> Vec<Complex64> {
        self.reps
            .iter()
            .map(|&k| (0..x.len()).map(|j| self.mm.t_inv[(k, j)] * x[j]).sum())
            .collect()
    }

    /// Modal nonlinearity plus forcing, written into `out`.
    fn n(&mut self, q: &[Complex64], t: f64, out: &mut [Complex64]) {
        for (x, row) in self.xs.iter_mut().zip(&self.support_rows) {
            *x = row.iter().zip(q).map(|(a, b)| a.re * b.re - a.im * b.im).sum();
        }
        let f = self.eps * (self.omega * t).cos();
        for (o, c) in out.iter_mut().zip(&self.forcing) {
            *o = c * f;
        }
        for (pows, v) in &self.monomials {
            let g: f64 = pows.iter().map(|&(s, p)| self.xs[s].powi(p)).product();
            if g != 0.0 {
                for (o, c) in out.iter_mut().zip(v) {
                    *o += c * g;
                }
            }
        }
    }

    fn step(&mut self, q: &mut [Complex64], t: f64) {
        let h = self.h;
        let [mut nu, mut na, mut nb, mut nc, mut a, mut b, mut c] = std::mem::take(&mut self.buf);
        self.n(q, t, &mut nu);
        for i in 0..q.len() {
            a[i] = self.e2[i] * q[i] + self.w[i][0] * nu[i];
        }
        self.n(&a, t + h / 2.0, &mut na);
        for i in 0..q.len() {
            b[i] = self.e2[i] * q[i] + self.w[i][0] * na[i];
        }
        self.n(&b, t + h / 2.0, &mut nb);
        for i in 0..q.len() {
            c[i] = self.e2[i] * a[i] + self.w[i][0] * (2.0 * nb[i] - nu[i]);
        }
        self.n(&c, t + h, &mut nc);
        for i in 0..q.len() {
            let [_, f1, f2, f3] = self.w[i];
            q[i] = self.e[i] * q[i] + f1 * nu[i] + 2.0 * f2 * (na[i] + nb[i]) + f3 * nc[i];
        }
        self.buf = [nu, na, nb, nc, a, b, c];
    }
}

fn resolve_method(mm: &ModalModel, omega: f64, opts: &OracleOptions) -> Method {
    match opts.method {
        Method::Auto => {
            let h = 2.0 * PI / omega / opts.steps_per_period as f64;
            let rate = mm.eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
            // DOPRI5's stability region reaches about 3.3 along the negative axis
            if rate * h > 3.0 {
                Method::Etdrk4
            } else {
                Method::Dopri5
            }
        }
        m => m,
    }
}

/// One forcing-period stepper over either integrator.
enum Engine<'a> {
    Dopri { d: Dopri<'a>, x: DVector<f64> },
    Etd { e: Box<Etd<'a>>, q: Vec<Complex64> },
}

impl<'a> Engine<'a> {
    fn new(mm: &'a ModalModel, eps: f64, omega: f64, x0: &DVector<f64>, method: Method, opts: &OracleOptions) -> Self {
        let h = 2.0 * PI / omega / opts.steps_per_period as f64;
        match method {
            Method::Etdrk4 => {
                let e = Etd::new(mm, eps, omega, h);
                let q = e.modal_of(x0);
                Engine::Etd { e: Box::new(e), q }
            }
            _ => Engine::Dopri {
                d: Dopri { fos: &mm.fos, eps, omega, rtol: opts.rtol, atol: opts.atol, h: h / 4.0, fixed: None },
                x: x0.clone(),
            },
        }
    }

    /// Advances one sample interval and returns the monitored values.
    fn sample(&mut self, t: f64, dt: f64, monitors: &[usize], out: &mut [f64]) -> Result<()> {
        match self {
            Engine::Dopri { d, x } => {
                d.advance(x, t, t + dt)?;
                for (o, &m) in out.iter_mut().zip(monitors) {
                    *o = x[m];
                }
            }
            Engine::Etd { e, q } => {
                e.step(q, t);
                for (o, &m) in out.iter_mut().zip(monitors) {
                    *o = e.physical_row(q, m);
                }
            }
        }
        Ok(())
    }

    fn state(&self) -> DVector<f64> {
        match self {
            Engine::Dopri { x, .. } => x.clone(),
            Engine::Etd { e, q } => e.to_physical(q),
        }
    }
}

/// Trajectory of the full system sampled `opts.steps_per_period` times per
/// forcing period, from `x0` at `t = 0` to `t_end`.
pub fn integrate_full(
    mm: &ModalModel,
    eps: f64,
    omega: f64,
    x0: &DVector<f64>,
    t_end: f64,
    opts: &OracleOptions,
) -> Result<Trajectory> {
    if !(omega > 0.0) || !(t_end >= 0.0) || x0.len() != mm.dim() {
        return Err(SsmError::InvalidInput("integration needs omega > 0, t_end >= 0 and a full state".into()));
    }
    let method = resolve_method(mm, omega, opts);
    let mut eng = Engine::new(mm, eps, omega, x0, method, opts);
    let dt = 2.0 * PI / omega / opts.steps_per_period as f64;
    let n = (t_end / dt).round() as usize;
    let mut traj = Trajectory { t: vec![0.0], x: vec![x0.clone()] };
    let mut dummy = [];
    for k in 0..n {
        eng.sample(k as f64 * dt, dt, &[], &mut dummy)?;
        traj.t.push((k + 1) as f64 * dt);
        traj.x.push(eng.state());
    }
    Ok(traj)
}

/// DOPRI5 with a fixed step, for convergence studies.
pub fn integrate_fixed_step(fos: &FirstOrderSystem, eps: f64, omega: f64, x0: &DVector<f64>, t_end: f64, h: f64) -> Result<DVector<f64>> {
    let mut d = Dopri { fos, eps, omega, rtol: 0.0, atol: 0.0, h, fixed: Some(h) };
    let mut x = x0.clone();
    d.advance(&mut x, 0.0, t_end)?;
    Ok(x)
}

/// ETDRK4 end state with step `h`, for convergence studies.
pub fn integrate_etd(mm: &ModalModel, eps: f64, omega: f64, x0: &DVector<f64>, t_end: f64, h: f64) -> DVector<f64> {
    let mut e = Etd::new(mm, eps, omega, h);
    let mut q = e.modal_of(x0);
    let n = (t_end / h).round() as usize;
    for k in 0..n {
        e.step(&mut q, k as f64 * h);
    }
    e.to_physical(&q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub omega: f64,
    /// Maximum of `|x_m|` over the last simulated period, per monitor.
    pub amplitude: Vec<f64>,
    pub converged: bool,
    pub blow_up: bool,
    pub periods: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub eps: f64,
    pub direction: SweepDirection,
    pub warm_start: bool,
    pub monitors: Vec<usize>,
    pub method: Method,
    /// In the order visited.
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Frequencies at which no steady state was reached.
    pub fn nonconvergent(&self) -> Vec<f64> {
        self.points.iter().filter(|p| !p.converged).map(|p| p.omega).collect()
    }
}

/// Peak of `|x|` over a sampled period, refined by a parabola through the
/// largest sample and its neighbours.
fn period_peak(samples: &[f64]) -> f64 {
    let (k, m) = samples
        .iter()
        .map(|v| v.abs())
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
    if k == 0 || k + 1 >= samples.len() {
        return m;
    }
    let (y0, y1, y2) = (samples[k - 1].abs(), m, samples[k + 1].abs());
    let den = y0 - 2.0 * y1 + y2;
    if den >= 0.0 {
        return m;
    }
    let d = 0.5 * (y0 - y2) / den;
    (y1 - 0.25 * (y0 - y2) * d).max(m)
}

fn steady_state(
    mm: &ModalModel,
    eps: f64,
    omega: f64,
    x0: &DVector<f64>,
    monitors: &[usize],
    method: Method,
    opts: &OracleOptions,
) -> Result<(SweepPoint, Option<DVector<f64>>)> {
    let period = 2.0 * PI / omega;
    let spp = opts.steps_per_period;
    let dt = period / spp as f64;
    let decay = mm.lambda1().re.abs();
    let transient = (opts.transient_factor / decay / period).ceil() as usize;
    let threshold = if opts.tail_correction {
        opts.steady_tol * (Complex64::new(1.0, 0.0) - (mm.lambda1() * period).exp()).norm()
    } else {
        opts.steady_tol
    };
    let mut eng = Engine::new(mm, eps, omega, x0, method, opts);
    let mut vals = vec![0.0; monitors.len()];
    let mut samples = vec![vec![0.0; spp]; monitors.len()];
    let mut prev = samples.clone();
    let mut steady_run = 0;
    let mut history: Vec<Vec<f64>> = vec![];
    let mut t = 0.0;
    let mut periods = 0;
    let escaped = |x: &DVector<f64>| x.iter().any(|v| !v.is_finite() || v.abs() > opts.blowup);
    let total = transient + opts.max_periods;
    while periods < total {
        for k in 0..spp {
            eng.sample(t, dt, monitors, &mut vals)?;
            t = (periods * spp + k + 1) as f64 * dt;
            for (s, v) in samples.iter_mut().zip(&vals) {
                s[k] = *v;
            }
        }
        periods += 1;
        let state = eng.state();
        if escaped(&state) {
            let amplitude = history.last().cloned().unwrap_or_else(|| vec![f64::NAN; monitors.len()]);
            log::debug!("omega = {omega}: response escaped after {periods} periods");
            return Ok((SweepPoint { omega, amplitude, converged: false, blow_up: true, periods }, None));
        }
        if periods <= transient {
            continue;
        }
        let amp: Vec<f64> = samples.iter().map(|s| period_peak(s)).collect();
        if !history.is_empty() {
            let change = samples
                .iter()
                .zip(&prev)
                .zip(&amp)
                .map(|((s, p), a)| s.iter().zip(p).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / a.max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            steady_run = if change < threshold { steady_run + 1 } else { 0 };
        }
        std::mem::swap(&mut prev, &mut samples);
        history.push(amp);
        if history.len() >= opts.min_periods && steady_run >= opts.steady_count {
            let amplitude = history.pop().expect("measured period");
            return Ok((SweepPoint { omega, amplitude, converged: true, blow_up: false, periods }, Some(state)));
        }
    }
    let amplitude = history.pop().unwrap_or_else(|| vec![f64::NAN; monitors.len()]);
    Ok((SweepPoint { omega, amplitude, converged: false, blow_up: false, periods }, Some(eng.state())))
}

/// Steady-state amplitudes over a frequency grid.
///
/// With `warm_start` the grid is visited in `direction` and each run starts
/// from the previous final state (from rest after an escape). Without it every
/// point starts from rest and points run in parallel.
pub fn sweep(
    mm: &ModalModel,
    eps: f64,
    omegas: &[f64],
    monitors: &[usize],
    warm_start: bool,
    direction: SweepDirection,
    opts: &OracleOptions,
) -> Result<SweepResult> {
    if omegas.is_empty() || omegas.iter().any(|w| !(*w > 0.0)) || omegas.windows(2).any(|w| w[1] < w[0]) {
        return Err(SsmError::InvalidInput("frequency grid must be positive and ascending".into()));
    }
    if monitors.is_empty() || monitors.iter().any(|&m| m >= mm.dim()) {
        return Err(SsmError::InvalidInput("monitor index out of range".into()));
    }
    let order: Vec<f64> = match direction {
        SweepDirection::Up => omegas.to_vec(),
        SweepDirection::Down => omegas.iter().rev().copied().collect(),
    };
    let method = resolve_method(mm, order.iter().copied().fold(0.0, f64::max), opts);
    let zero = DVector::zeros(mm.dim());
    let points = if warm_start {
        let mut x = zero.clone();
        let mut out = vec![];
        for &w in &order {
            let (p, last) = steady_state(mm, eps, w, &x, monitors, method, opts)?;
            x = last.unwrap_or_else(|| zero.clone());
            out.push(p);
        }
        out
    } else {
        order
            .par_iter()
            .map(|&w| steady_state(mm, eps, w, &zero, monitors, method, opts).map(|r| r.0))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(SweepResult { eps, direction, warm_start, monitors: monitors.to_vec(), method, points })
}

/// `ρ = ε|c₁₀| / |λ₁ − iΩ|` for the linear reduced model.
pub fn linear_frc_closed_form(mm: &ModalModel, eps: f64, omega: f64) -> f64 {
    crate::reduced::linear_frc_rho(mm.lambda1(), leading_forcing_coefficient(mm), eps, omega)
}

/// Steady amplitude of coordinate `coord` for the linearized full system,
/// `ε |((iΩ − A)⁻¹ F)_coord|`.
pub fn linear_response_amplitude(fos: &FirstOrderSystem, eps: f64, omega: f64, coord: usize) -> Result<f64> {
    let n = fos.dim();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { Complex64::new(0.0, omega) } else { Complex64::new(0.0, 0.0) };
        d - fos.a[(i, j)]
    });
    let f = DVector::from_fn(n, |i, _| Complex64::new(fos.forcing[i], 0.0));
    let z = m.lu().solve(&f).ok_or_else(|| SsmError::InvalidInput("forcing frequency hits an eigenvalue".into()))?;
    Ok(eps * z[coord].norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{modal_decompose, to_first_order, MechanicalSystem};
    use crate::presets;

    fn oscillator() -> ModalModel {
        // ÿ + 0.1ẏ + 4y = ε cos Ωt
        let sys = MechanicalSystem::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.1),
            DMatrix::from_element(1, 1, 4.0),
            vec![],
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        modal_decompose(&to_first_order(&sys).unwrap(), 1).unwrap()
    }

    /// Free decay from `y(0) = 1, ẏ(0) = 0`.
    fn decay_exact(t: f64) -> f64 {
        let (z, w) = (0.05, (4.0f64 - 0.0025).sqrt());
        (-z * t).exp() * ((w * t).cos() + z / w * (w * t).sin())
    }

    #[test]
    fn linear_decay_matches_closed_form() {
        let mm = oscillator();
        let x0 = DVector::from_vec(vec![1.0, 0.0]);
        let tr = integrate_full(&mm, 0.0, 2.0, &x0, 100.0 * PI, &OracleOptions::default()).unwrap();
        let err = tr.t.iter().zip(&tr.x).map(|(t, x)| (x[0] - decay_exact(*t)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn zero_forcing_from_rest_stays_at_rest() {
        let mm = presets::shaw_pierre_modal();
        let tr = integrate_full(&mm, 0.0, 1.7, &DVector::zeros(4), 20.0, &OracleOptions::default()).unwrap();
        assert!(tr.x.iter().all(|x| x.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn step_halving_gives_high_order() {
        let mm = oscillator();
        let x0 = DVector::from_vec(vec![1.0, 0.0]);
        let t = 10.0;
        let exact = decay_exact(t);
        let e1 = (integrate_fixed_step(&mm.fos, 0.0, 1.0, &x0, t, 0.1).unwrap()[0] - exact).abs();
        let e2 = (integrate_fixed_step(&mm.fos, 0.0, 1.0, &x0, t, 0.05).unwrap()[0] - exact).abs();
        assert!(e1 / e2 > 8.0, "{}", e1 / e2);
        // ETDRK4 with forcing so that the quadrature matters
        let reference = integrate_etd(&mm, 1.0, 1.3, &x0, t, 1e-3)[0];
        let f1 = (integrate_etd(&mm, 1.0, 1.3, &x0, t, 0.2)[0] - reference).abs();
        let f2 = (integrate_etd(&mm, 1.0, 1.3, &x0, t, 0.1)[0] - reference).abs();
        assert!((8.0..32.0).contains(&(f1 / f2)), "{}", f1 / f2);
    }

    #[test]
    fn integrators_agree_on_nonlinear_system() {
        let mm = presets::shaw_pierre_modal();
        let x0 = DVector::from_vec(vec![0.1, -0.05, 0.0, 0.02]);
        let mut o = OracleOptions::default();
        o.method = Method::Dopri5;
        let a = integrate_full(&mm, 0.0027, 1.72, &x0, 40.0, &o).unwrap();
        let b = integrate_etd(&mm, 0.0027, 1.72, &x0, *a.t.last().unwrap(), 2.0 * PI / 1.72 / 2000.0);
        assert!((a.x.last().unwrap() - b).amax() < 1e-8);
    }

    #[test]
    fn etd_weights_are_smooth_through_zero() {
        let h = 0.5;
        let w0 = etd_weights(Complex64::new(0.0, 0.0), h);
        // limits: Q = h/2, f1 = f2·... = h/6, f2 = h/6, f3 = h/6
        assert!((w0[0] - h / 2.0).norm() < 1e-12);
        for w in &w0[1..] {
            assert!((w - h / 6.0).norm() < 1e-12, "{w}");
        }
        // Taylor series of the weights on both sides of the switch radius
        let fact = |n: i32| (1..=n).map(f64::from).product::<f64>();
        let inv = |n: i32| if n < 0 { 0.0 } else { 1.0 / fact(n) };
        for z in [Complex64::new(-0.45, 0.1), Complex64::new(0.3, -0.2), Complex64::new(-0.6, 0.3), Complex64::new(0.8, 0.0)] {
            let mut t = [Complex64::new(0.0, 0.0); 4];
            for n in 0..40 {
                let zn = z.powi(n);
                t[0] += zn / (2f64.powi(n + 1) * fact(n + 1));
                let m = n + 3;
                t[1] += zn * (4.0 * inv(m) - 3.0 * inv(m - 1) + inv(m - 2));
                t[2] += zn * (inv(m - 1) - 2.0 * inv(m));
                t[3] += zn * (4.0 * inv(m) - inv(m - 1));
            }
            let w = etd_weights(z, h);
            for k in 0..4 {
                assert!((w[k] - t[k] * h).norm() < 1e-12, "{z} {k}");
            }
    }
    }

    #[test]
    fn linear_sweep_matches_transfer_function() {
        let mm = presets::modal(&presets::shaw_pierre_linear());
        let omegas: Vec<f64> = (0..6).map(|k| 1.6 + 0.05 * k as f64).collect();
        let r = sweep(&mm, 0.001, &omegas, &[0], true, SweepDirection::Up, &OracleOptions::default()).unwrap();
        for p in &r.points {
            assert!(p.converged);
            let exact = linear_response_amplitude(&mm.fos, 0.001, p.omega, 0).unwrap();
            assert!((p.amplitude[0] - exact).abs() < 5e-3 * exact, "{} {}", p.amplitude[0], exact);
        }
    }

    #[test]
    fn cold_sweep_is_order_independent() {
        let mm = presets::shaw_pierre_modal();
        let omegas = [1.6, 1.9];
        let mut o = OracleOptions::default();
        o.transient_factor = 1.0;
        let up = sweep(&mm, 0.002, &omegas, &[0], false, SweepDirection::Up, &o).unwrap();
        let down = sweep(&mm, 0.002, &omegas, &[0], false, SweepDirection::Down, &o).unwrap();
        assert_eq!(up.points[0], down.points[1]);
        assert_eq!(up.points[1], down.points[0]);
    }

    #[test]
    fn free_decay_envelope_shrinks() {
        let mm = presets::shaw_pierre_modal();
        let x0 = DVector::from_vec(vec![0.05, 0.05, 0.0, 0.0]);
        let mut o = OracleOptions::default();
        o.steps_per_period = 100;
        let w = mm.lambda1().im;
        let tr = integrate_full(&mm, 0.0, w, &x0, 60.0 * 2.0 * PI / w, &o).unwrap();
        let peaks: Vec<f64> = tr.x.chunks(100).map(|c| c.iter().map(|x| x.amax()).fold(0.0, f64::max)).collect();
        assert!(peaks.windows(2).skip(5).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn rejects_bad_grids() {
        let mm = oscillator();
        let o = OracleOptions::default();
        assert!(sweep(&mm, 0.1, &[2.0, 1.0], &[0], true, SweepDirection::Up, &o).is_err());
        assert!(sweep(&mm, 0.1, &[1.0], &[5], true, SweepDirection::Up, &o).is_err());
        assert!(sweep(&mm, 0.1, &[], &[0], true, SweepDirection::Up, &o).is_err());
    }

    #[test]
    fn closed_form_limits() {
        let mm = presets::shaw_pierre_modal();
        let l = mm.lambda1();
        let c0 = leading_forcing_coefficient(&mm).norm();
        assert!((linear_frc_closed_form(&mm, 0.001, l.im) - 0.001 * c0 / l.re.abs()).abs() < 1e-15);
        assert!(linear_frc_closed_form(&mm, 0.001, 1e9) < 1e-12);
    }
}

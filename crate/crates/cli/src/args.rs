use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ssm-resolve", version, about = "Forced response curves, folds and isolas from spectral submanifolds")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Seed for randomized residual sampling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Only report errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    /// JSON file of tolerance settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub tol: TolFlags,
}

/// Tolerance overrides. Every field is optional here; unset values fall back
/// to the config file, then to the library defaults.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolFlags {
    /// Non-resonance margin in units of |Re λ₁|.
    #[arg(long = "tol-nonresonance", global = true)]
    pub nonresonance: Option<f64>,
    /// Jacobian real parts within this of zero are reported as folds.
    #[arg(long = "tol-fold", global = true)]
    pub fold: Option<f64>,
    /// Relative change between orders for a root to count as settled.
    #[arg(long = "tol-cauchy", global = true)]
    pub cauchy: Option<f64>,
    /// Fraction of the convergence radius within which roots are genuine.
    #[arg(long = "tol-radius-fraction", global = true)]
    pub radius_fraction: Option<f64>,
    /// Relative period-to-period change accepted as steady.
    #[arg(long = "tol-steady", global = true)]
    pub steady: Option<f64>,
    /// Relative tolerance of the adaptive integrator.
    #[arg(long = "tol-rtol", global = true)]
    pub rtol: Option<f64>,
    /// Absolute tolerance of the adaptive integrator.
    #[arg(long = "tol-atol", global = true)]
    pub atol: Option<f64>,
}

/// Fully resolved tolerances.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    pub nonresonance: f64,
    pub fold: f64,
    pub cauchy: f64,
    pub radius_fraction: f64,
    pub steady: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Tolerances {
    pub fn resolve(flags: &TolFlags, file: Option<&TolFlags>) -> CliResult<Self> {
        let oracle = ssm_core::oracle::OracleOptions::default();
        let pick = |f: fn(&TolFlags) -> Option<f64>, name: &str, default: f64| -> CliResult<f64> {
            let v = f(flags).or_else(|| file.and_then(f)).unwrap_or(default);
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::Usage(format!("tolerance {name} must be positive, got {v}")))
            }
        };
        Ok(Tolerances {
            nonresonance: pick(|t| t.nonresonance, "nonresonance", ssm_core::model::NONRESONANCE_TOL)?,
            fold: pick(|t| t.fold, "fold", ssm_core::reduced::FOLD_TOL)?,
            cauchy: pick(|t| t.cauchy, "cauchy", ssm_core::isola::CAUCHY_TOL)?,
            radius_fraction: pick(|t| t.radius_fraction, "radius_fraction", ssm_core::isola::RADIUS_FRACTION)?,
            steady: pick(|t| t.steady, "steady", oracle.steady_tol)?,
            rtol: pick(|t| t.rtol, "rtol", oracle.rtol)?,
            atol: pick(|t| t.atol, "atol", oracle.atol)?,
        })
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectrum, existence conditions and normal-form coefficients.
    Analyze(AnalyzeArgs),
    /// Write the finite-element cantilever as a system file.
    Beam(BeamArgs),
    /// Forced response curve with folds, stability and components.
    Frc(FrcArgs),
    /// Roots of a(ρ) across orders and the isola prediction.
    Isola(IsolaArgs),
    /// Frequency sweep of the full system by direct integration.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SystemArgs {
    /// System file (JSON, see docs/formats.md).
    #[arg(long)]
    #[serde(skip)]
    pub system: PathBuf,
    /// Master mode: 1 is the slowest-decaying complex pair.
    #[arg(long, default_value_t = 1)]
    pub mode: usize,
    /// Proceed even if the non-resonance conditions fail.
    #[arg(long)]
    pub skip_nonresonance: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub sys: SystemArgs,
    /// Expansion order 2M+1.
    #[arg(long, default_value_t = 3)]
    pub order: u32,
    /// Report file (JSON); printed to stdout when omitted.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Write the manifold and reduced-dynamics coefficients to this file.
    #[arg(long)]
    #[serde(skip)]
    pub dump_ssm: Option<PathBuf>,
    /// Include the forced coefficients at this frequency in the dump.
    #[arg(long, requires = "dump_ssm")]
    pub dump_omega: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BeamArgs {
    /// Beam parameters (JSON); the reference beam when omitted.
    #[arg(long)]
    #[serde(skip)]
    pub params: Option<PathBuf>,
    /// Number of finite elements; overrides the parameter file.
    #[arg(long)]
    pub elements: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FrcArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub sys: SystemArgs,
    #[arg(long)]
    pub eps: f64,
    /// Expansion order 2M+1.
    #[arg(long, default_value_t = 3)]
    pub order: u32,
    /// Order of the forced expansion; 1 keeps only c₁₀.
    #[arg(long, default_value_t = 1)]
    pub forced_order: u32,
    #[arg(long, default_value_t = 1.0)]
    pub rho_max: f64,
    #[arg(long, default_value_t = 2000)]
    pub n_rho: usize,
    #[arg(long)]
    pub omega_min: Option<f64>,
    #[arg(long)]
    pub omega_max: Option<f64>,
    /// Coordinate for the physical amplitude (name or index; default tip or y1).
    #[arg(long)]
    pub monitor: Option<String>,
    /// Points per period for the amplitude reconstruction.
    #[arg(long, default_value_t = 256)]
    pub n_phi: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IsolaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub sys: SystemArgs,
    /// Range of M, e.g. 1..25.
    #[arg(long, default_value = "1..25")]
    pub orders: String,
    #[arg(long)]
    pub eps: f64,
    /// Expansion order 2M+1 at which roots and folds are reported.
    #[arg(long, default_value_t = 3)]
    pub analysis_order: u32,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub roots_svg: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Ascending, each point warm-started from the previous one.
    Up,
    /// Descending, warm-started.
    Down,
    /// Every point from rest.
    Cold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Auto,
    Dopri5,
    Etdrk4,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub sys: SystemArgs,
    #[arg(long)]
    pub eps: f64,
    /// Frequency grid `start:stop:count`, endpoints included.
    #[arg(long)]
    pub omega: String,
    /// Comma-separated coordinates (names or indices).
    #[arg(long, default_value = "tip")]
    pub monitor: String,
    #[arg(long, value_enum, default_value_t = SweepMode::Up)]
    pub sweep: SweepMode,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 200)]
    pub steps_per_period: usize,
    /// Transient length in units of 1/|Re λ₁|.
    #[arg(long, default_value_t = 5.0)]
    pub transient_factor: f64,
    #[arg(long, default_value_t = 20)]
    pub min_periods: usize,
    #[arg(long, default_value_t = 400)]
    pub max_periods: usize,
    #[arg(long, default_value_t = 3)]
    pub steady_count: usize,
    /// Use the bare period-to-period test without the decay-rate scaling.
    #[arg(long)]
    pub no_tail_correction: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

/// `a..b` or `a..=b`, both inclusive.
pub fn parse_orders(s: &str) -> CliResult<std::ops::RangeInclusive<u32>> {
    let bad = || CliError::Usage(format!("orders must look like 1..25, got {s:?}"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let (a, b): (u32, u32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a == 0 || b < a {
        return Err(bad());
    }
    Ok(a..=b)
}

/// `start:stop:count` with `count ≥ 2` points, or a single frequency.
pub fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Usage(format!("frequency grid must look like 6.8:7.3:200, got {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| p.trim().parse::<f64>().map_err(|_| bad());
    match parts.as_slice() {
        [w] => Ok(vec![num(w)?]),
        [a, b, n] => {
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if n < 2 || !(b > a) {
                return Err(bad());
            }
            Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
        }
        _ => Err(bad()),
    }
}

pub fn check_order(order: u32) -> CliResult<()> {
    if order < 3 || order.is_multiple_of(2) {
        return Err(CliError::Usage(format!("order must be odd and at least 3, got {order}")));
    }
    Ok(())
}

pub fn check_eps(eps: f64) -> CliResult<()> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(CliError::Usage(format!("eps must be a non-negative number, got {eps}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_parse() {
        assert_eq!(parse_orders("1..25").unwrap(), 1..=25);
        assert_eq!(parse_orders("2..=4").unwrap(), 2..=4);
        assert!(parse_orders("0..3").is_err());
        assert!(parse_orders("5..3").is_err());
        assert!(parse_orders("x").is_err());
    }

    #[test]
    fn grid_parse() {
        let g = parse_grid("6.8:7.3:200").unwrap();
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], 6.8);
        assert!((g[199] - 7.3).abs() < 1e-15);
        assert_eq!(parse_grid("1.5").unwrap(), vec![1.5]);
        assert!(parse_grid("7:6:10").is_err());
        assert!(parse_grid("1:2:1").is_err());
    }

    #[test]
    fn tolerance_precedence() {
        let flags = TolFlags { fold: Some(1e-6), ..Default::default() };
        let file = TolFlags { fold: Some(1e-4), cauchy: Some(1e-2), ..Default::default() };
        let t = Tolerances::resolve(&flags, Some(&file)).unwrap();
        assert_eq!(t.fold, 1e-6);
        assert_eq!(t.cauchy, 1e-2);
        assert_eq!(t.radius_fraction, ssm_core::isola::RADIUS_FRACTION);
        let neg = TolFlags { steady: Some(-1.0), ..Default::default() };
        assert!(Tolerances::resolve(&neg, None).is_err());
    }

    #[test]
    fn order_checks() {
        assert!(check_order(3).is_ok());
        assert!(check_order(4).is_err());
        assert!(check_order(1).is_err());
        assert!(check_eps(-1.0).is_err());
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SsmError>;

/// A violated non-resonance inequality `a Re λ₁ + b Re λ₂ = Re λ_l`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ResonanceTriple {
    pub a: u32,
    pub b: u32,
    /// 1-based index into the sorted spectrum.
    pub l: usize,
}

#[derive(Debug, Error)]
pub enum SsmError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("origin is not asymptotically stable: eigenvalue {re:+.6e}{im:+.6e}i has non-negative real part")]
    UnstableOrigin { re: f64, im: f64 },

    #[error("matrix is not semisimple: eigenvector condition number {cond:.3e} exceeds {limit:.1e}")]
    NotSemisimple { cond: f64, limit: f64 },

    #[error("non-resonance condition violated for (a, b, l) = {}", fmt_triples(.violations))]
    NonResonance { violations: Vec<ResonanceTriple> },

    #[error("internal resonance in the autonomous solve: row {row}, multi-index {index}")]
    InternalResonance { row: usize, index: String },

    #[error("enslaved mode {row} is resonant with the forcing (|λ ± iΩ| = {magnitude:.3e})")]
    EnslavedResonance { row: usize, magnitude: f64 },

    #[error("near-resonant denominator in the forced solve: row {row}, multi-index {index}, harmonic {sign}")]
    NearResonance { row: usize, index: String, sign: char },

    #[error("polar chart is singular at rho = 0 (phase undefined)")]
    SingularPolarChart,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("integration became stiff at t = {t:.6}: step size {h:.3e}; use the exponential integrator")]
    Stiffness { t: f64, h: f64 },

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

fn fmt_triples(v: &[ResonanceTriple]) -> String {
    let parts: Vec<String> = v
        .iter()
        .take(8)
        .map(|t| format!("({}, {}, {})", t.a, t.b, t.l))
        .collect();
    let mut s = parts.join(", ");
    if v.len() > 8 {
        s.push_str(&format!(" and {} more", v.len() - 8));
    }
    s
}

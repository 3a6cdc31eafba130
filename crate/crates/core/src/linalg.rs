//! Dense eigen-decomposition of real nonsymmetric matrices.
//!
//! nalgebra provides the real Schur form but no eigenvectors for general
//! matrices, so eigenvectors come from shifted inverse iteration on the
//! balanced matrix.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, SsmError};

pub struct Eigen {
    pub values: Vec<Complex64>,
    /// Unit 2-norm columns; conjugate eigenvalues carry conjugate columns.
    pub vectors: DMatrix<Complex64>,
}

/// Diagonal similarity `D⁻¹ A D` equalizing row and column norms (powers of two).
fn balance(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let n = a.nrows();
    let mut b = a.clone();
    let mut d = vec![1.0; n];
    let radix = 2.0_f64;
    let sqrdx = radix * radix;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += b[(j, i)].abs();
                    r += b[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                d[i] *= f;
                for j in 0..n {
                    b[(i, j)] /= f;
                    b[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
    (b, d)
}

fn inverse_iteration(a: &DMatrix<Complex64>, mu: Complex64, scale: f64) -> Option<DVector<Complex64>> {
    let n = a.nrows();
    let mut shift = mu;
    for attempt in 0..4 {
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] -= shift;
        }
        let lu = b.lu();
        let mut v = DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.1 * ((i * 7919) % 13) as f64, 0.0));
        let mut ok = true;
        for _ in 0..3 {
            match lu.solve(&v) {
                Some(w) if w.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => {
                    let nrm = w.norm();
                    if nrm == 0.0 || !nrm.is_finite() {
                        ok = false;
                        break;
                    }
                    v = w / Complex64::new(nrm, 0.0);
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Some(v);
        }
        // exactly singular factorization: nudge the shift off the eigenvalue
        shift = mu + Complex64::new(scale * 1e-13 * 10f64.powi(attempt), scale * 1e-13 * 10f64.powi(attempt));
    }
    None
}

/// Eigenvalues and eigenvectors of a real square matrix.
pub fn eigen_real(a: &DMatrix<f64>) -> Result<Eigen> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(SsmError::InvalidInput("eigen-decomposition needs a nonempty square matrix".into()));
    }
    let (b, d) = balance(a);
    let schur = b
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| SsmError::InvalidInput("Schur iteration did not converge".into()))?;
    let raw: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();

    let bc: DMatrix<Complex64> = b.map(|x| Complex64::new(x, 0.0));
    let scale = b.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);

    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    let mut col = 0;
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mu = raw[i];
        let v = inverse_iteration(&bc, mu, scale)
            .ok_or_else(|| SsmError::InvalidInput(format!("inverse iteration failed for eigenvalue {mu}")))?;
        // undo balancing: v = D v'
        let mut v = DVector::from_fn(n, |k, _| v[k] * d[k]);
        let nrm = v.norm();
        v /= Complex64::new(nrm, 0.0);
        if mu.im == 0.0 {
            // real eigenvalue: the iteration stays real, drop rounding noise
            let v = v.map(|z| Complex64::new(z.re, 0.0));
            let nrm = v.norm();
            vectors.set_column(col, &(v / Complex64::new(nrm, 0.0)));
            values.push(mu);
            col += 1;
        } else {
            // pair with the conjugate eigenvalue from the Schur output
            let partner = (0..n)
                .filter(|&j| !used[j])
                .min_by(|&p, &q| {
                    (raw[p] - mu.conj())
                        .norm()
                        .partial_cmp(&(raw[q] - mu.conj()).norm())
                        .unwrap()
                })
                .ok_or_else(|| SsmError::InvalidInput("unpaired complex eigenvalue".into()))?;
            used[partner] = true;
            vectors.set_column(col, &v);
            vectors.set_column(col + 1, &v.map(|z| z.conj()));
            values.push(mu);
            values.push(mu.conj());
            col += 2;
        }
    }
    Ok(Eigen { values, vectors })
}

/// Complex roots of `Σ cₖ xᵏ` (ascending coefficients) from the balanced
/// companion matrix, each polished by a few Newton steps.
pub fn poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let deg = match coeffs.iter().rposition(|&c| c != 0.0) {
        Some(d) => d,
        None => return Err(SsmError::InvalidInput("zero polynomial has no isolated roots".into())),
    };
    if deg == 0 {
        return Ok(vec![]);
    }
    let lead = coeffs[deg];
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for k in 0..deg {
        comp[(0, k)] = -coeffs[deg - 1 - k] / lead;
        if k + 1 < deg {
            comp[(k + 1, k)] = 1.0;
        }
    }
    let (b, _) = balance(&comp);
    let schur = b
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| SsmError::InvalidInput("companion Schur iteration did not converge".into()))?;
    let eval = |z: Complex64| {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in coeffs[..=deg].iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    };
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|&z0| {
            let mut z = z0;
            for _ in 0..4 {
                let (p, dp) = eval(z);
                if dp.norm() == 0.0 {
                    break;
                }
                let next = z - p / dp;
                if !(next.re.is_finite() && next.im.is_finite()) || eval(next).0.norm() >= p.norm() {
                    break;
                }
                z = next;
            }
            z
        })
        .collect())
}

/// Frobenius-norm condition number `‖V‖‖V⁻¹‖`, infinite when singular.
pub fn condition_number(v: &DMatrix<Complex64>) -> f64 {
    match v.clone().try_inverse() {
        Some(inv) => v.norm() * inv.norm(),
        None => f64::INFINITY,
    }
}

pub fn to_complex(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|x| Complex64::new(x, 0.0))
}

pub fn is_symmetric(a: &DMatrix<f64>, rel_tol: f64) -> bool {
    let scale = a.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    (0..a.nrows()).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= rel_tol * scale))
}

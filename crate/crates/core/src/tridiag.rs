//! Eigenvalues of real symmetric tridiagonal matrices by the QL algorithm
//! with implicit Wilkinson shifts.

use thiserror::Error;

/// Sweeps allowed per eigenvalue before giving up.
pub const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("empty matrix")]
    Empty,
    #[error("off-diagonal has length {got}, expected {expected}")]
    Shape { expected: usize, got: usize },
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("eigenvalue {index} did not converge after {sweeps} QL sweeps")]
    NoConvergence { index: usize, sweeps: usize },
}

/// Ascending eigenvalues of the symmetric tridiagonal matrix with main
/// diagonal `diag` and sub/super-diagonal `offdiag`.
pub fn symmetric_tridiagonal_eigenvalues(
    diag: &[f64],
    offdiag: &[f64],
) -> Result<Vec<f64>, EigenError> {
    let n = diag.len();
    if n == 0 {
        return Err(EigenError::Empty);
    }
    if offdiag.len() + 1 != n {
        return Err(EigenError::Shape {
            expected: n - 1,
            got: offdiag.len(),
        });
    }
    if diag.iter().chain(offdiag).any(|x| !x.is_finite()) {
        return Err(EigenError::NonFinite);
    }

    let mut d = diag.to_vec();
    // e[i] couples d[i] and d[i+1]; the trailing slot is scratch.
    let mut e = offdiag.to_vec();
    e.push(0.0);

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m].abs() < f64::MIN_POSITIVE {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS_PER_EIGENVALUE {
                return Err(EigenError::NoConvergence { index: l, sweeps });
            }

            // Wilkinson shift from the leading 2×2 block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // underflow: the block splits, restart the sweep
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    d.sort_by(f64::total_cmp);
    Ok(d)
}

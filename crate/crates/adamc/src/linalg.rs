//! Dense helpers for the small symmetric matrices that appear in natural
//! parameters: Jacobi eigendecomposition and Cholesky factorization.
//!
//! Matrices are row-major `&[R]` slices of length `n * n`. Everything here is
//! sized for the low-dimensional parameter blocks of this crate (n of a few),
//! not for large-scale linear algebra.

use crate::error::{Error, Result};
use crate::real::Real;

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns of a row-major `n x n` matrix, so that
/// `a = q diag(w) qᵀ`.
pub fn sym_eigen<R: Real>(a: &[R], n: usize) -> Result<(Vec<R>, Vec<R>)> {
    debug_assert_eq!(a.len(), n * n);
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            context: "sym_eigen",
            details: "matrix has non-finite entries".to_string(),
        });
    }

    let mut m = a.to_vec();
    let mut q = identity::<R>(n);
    if n == 1 {
        return Ok((m, q));
    }

    let frob = frobenius(&m);
    let stop = R::epsilon() * frob * R::cast(n as f64);

    for _sweep in 0..64 {
        let mut off = R::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off = off + m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() <= stop || off == R::zero() {
            break;
        }

        for p in 0..n - 1 {
            for qi in (p + 1)..n {
                let apq = m[p * n + qi];
                if apq == R::zero() {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[qi * n + qi];
                let theta = (aqq - app) / (R::cast(2.0) * apq);
                // Smaller root of t^2 + 2 t theta - 1 = 0, for a stable rotation.
                let t = if theta >= R::zero() {
                    R::one() / (theta + (theta * theta + R::one()).sqrt())
                } else {
                    -R::one() / (-theta + (theta * theta + R::one()).sqrt())
                };
                let c = R::one() / (t * t + R::one()).sqrt();
                let s = t * c;

                m[p * n + p] = app - t * apq;
                m[qi * n + qi] = aqq + t * apq;
                m[p * n + qi] = R::zero();
                m[qi * n + p] = R::zero();
                for i in 0..n {
                    if i != p && i != qi {
                        let aip = m[i * n + p];
                        let aiq = m[i * n + qi];
                        m[i * n + p] = c * aip - s * aiq;
                        m[p * n + i] = m[i * n + p];
                        m[i * n + qi] = s * aip + c * aiq;
                        m[qi * n + i] = m[i * n + qi];
                    }
                }
                for i in 0..n {
                    let vip = q[i * n + p];
                    let viq = q[i * n + qi];
                    q[i * n + p] = c * vip - s * viq;
                    q[i * n + qi] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[i * n + i]
            .partial_cmp(&m[j * n + j])
            .expect("eigenvalues are finite")
    });
    let evals: Vec<R> = order.iter().map(|&i| m[i * n + i]).collect();
    let mut evecs = vec![R::zero(); n * n];
    for (dst, &src) in order.iter().enumerate() {
        for row in 0..n {
            evecs[row * n + dst] = q[row * n + src];
        }
    }
    Ok((evals, evecs))
}

/// Reconstruct `q diag(w) qᵀ`, symmetrized exactly.
pub fn from_eigen<R: Real>(evals: &[R], evecs: &[R], n: usize) -> Vec<R> {
    let mut out = vec![R::zero(); n * n];
    for i in 0..n {
        for j in i..n {
            let mut acc = R::zero();
            for k in 0..n {
                acc = acc + evecs[i * n + k] * evals[k] * evecs[j * n + k];
            }
            out[i * n + j] = acc;
            out[j * n + i] = acc;
        }
    }
    out
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<R: Real>(a: &[R], n: usize) -> Result<Vec<R>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![R::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut acc = a[i * n + j];
            for k in 0..j {
                acc = acc - l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(acc > R::zero()) || !acc.is_finite() {
                    return Err(Error::InvalidParameter {
                        reason: format!(
                            "matrix is not positive definite (pivot {} at index {})",
                            acc.to_f64_lossy(),
                            i
                        ),
                    });
                }
                l[i * n + j] = acc.sqrt();
            } else {
                l[i * n + j] = acc / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solve `l lᵀ x = b` given the Cholesky factor `l`.
pub fn cholesky_solve<R: Real>(l: &[R], n: usize, b: &[R]) -> Vec<R> {
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let lik = l[i * n + k];
            y[i] = y[i] - lik * y[k];
        }
        y[i] = y[i] / l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let lki = l[k * n + i];
            y[i] = y[i] - lki * y[k];
        }
        y[i] = y[i] / l[i * n + i];
    }
    y
}

/// Solve `lᵀ y = z` by back substitution (used to sample `N(μ, (l lᵀ)⁻¹)`).
pub fn solve_lower_transpose<R: Real>(l: &[R], n: usize, z: &[R]) -> Vec<R> {
    let mut y = z.to_vec();
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let lki = l[k * n + i];
            y[i] = y[i] - lki * y[k];
        }
        y[i] = y[i] / l[i * n + i];
    }
    y
}

/// Full inverse of `l lᵀ`, returned symmetric.
pub fn cholesky_inverse<R: Real>(l: &[R], n: usize) -> Vec<R> {
    let mut inv = vec![R::zero(); n * n];
    let mut e = vec![R::zero(); n];
    for col in 0..n {
        e.iter_mut().for_each(|x| *x = R::zero());
        e[col] = R::one();
        let x = cholesky_solve(l, n, &e);
        for row in 0..n {
            inv[row * n + col] = x[row];
        }
    }
    // Symmetrize to remove the column-by-column rounding skew.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (inv[i * n + j] + inv[j * n + i]) / R::cast(2.0);
            inv[i * n + j] = avg;
            inv[j * n + i] = avg;
        }
    }
    inv
}

/// `log det(l lᵀ) = 2 Σ log l_ii`.
pub fn cholesky_log_det<R: Real>(l: &[R], n: usize) -> R {
    let mut acc = R::zero();
    for i in 0..n {
        acc = acc + l[i * n + i].ln();
    }
    acc + acc
}

fn identity<R: Real>(n: usize) -> Vec<R> {
    let mut q = vec![R::zero(); n * n];
    for i in 0..n {
        q[i * n + i] = R::one();
    }
    q
}

fn frobenius<R: Real>(a: &[R]) -> R {
    a.iter().map(|&x| x * x).sum::<R>().sqrt()
}

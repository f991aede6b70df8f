//! Dense symmetric k x k solvers used by the per-row ridge updates.
//!
//! Factor ranks are tiny (k <= ~10), so everything works on row-major
//! slices and favors robustness over speed tricks: Cholesky on the
//! positive-definite path, a Jacobi eigendecomposition fallback when
//! lambda = 0 leaves the normal matrix semidefinite.

/// Accumulate the outer product `a += v v^T` into a row-major k x k buffer.
/// Only the upper triangle is written; call [`mirror_upper`] once at the end.
pub(crate) fn accumulate_outer(a: &mut [f64], k: usize, v: &[f64]) {
    debug_assert_eq!(a.len(), k * k);
    debug_assert_eq!(v.len(), k);
    for (r, &vr) in v.iter().enumerate() {
        let row = &mut a[r * k + r..r * k + k];
        for (acc, &vc) in row.iter_mut().zip(&v[r..]) {
            *acc += vr * vc;
        }
    }
}

/// Copy the upper triangle onto the lower one.
pub(crate) fn mirror_upper(a: &mut [f64], k: usize) {
    for r in 1..k {
        for c in 0..r {
            a[r * k + c] = a[c * k + r];
        }
    }
}

pub(crate) fn add_diagonal(a: &mut [f64], k: usize, value: f64) {
    for r in 0..k {
        a[r * k + r] += value;
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// In-place Cholesky factorization of a symmetric matrix, `a = l l^T`.
///
/// Overwrites the lower triangle of `a` with the factor (the strict upper
/// triangle is left untouched). Returns false when a pivot falls below
/// `1e-12` times the largest diagonal entry, i.e. the matrix is not
/// numerically positive definite; `a` is garbage in that case.
pub(crate) fn cholesky_in_place(a: &mut [f64], k: usize) -> bool {
    debug_assert_eq!(a.len(), k * k);
    let scale = (0..k).map(|r| a[r * k + r].abs()).fold(0.0f64, f64::max);
    let floor = 1e-12 * scale.max(1e-300);
    for r in 0..k {
        for c in 0..=r {
            let mut sum = a[r * k + c];
            for j in 0..c {
                sum -= a[r * k + j] * a[c * k + j];
            }
            if r == c {
                if sum <= floor || !sum.is_finite() {
                    return false;
                }
                a[r * k + r] = sum.sqrt();
            } else {
                a[r * k + c] = sum / a[c * k + c];
            }
        }
    }
    true
}

/// Cholesky factorization into a fresh buffer; `None` when not numerically
/// positive definite.
pub(crate) fn cholesky(a: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut l = a.to_vec();
    if !cholesky_in_place(&mut l, k) {
        return None;
    }
    // zero the stale upper triangle so the factor is a clean lower matrix
    for r in 0..k {
        for c in (r + 1)..k {
            l[r * k + c] = 0.0;
        }
    }
    Some(l)
}

/// Solve `l l^T x = b` in place given a Cholesky factor stored in the lower
/// triangle of `l`.
pub(crate) fn cholesky_solve_in_place(l: &[f64], k: usize, b: &mut [f64]) {
    for r in 0..k {
        let mut sum = b[r];
        for c in 0..r {
            sum -= l[r * k + c] * b[c];
        }
        b[r] = sum / l[r * k + r];
    }
    for r in (0..k).rev() {
        let mut sum = b[r];
        for c in r + 1..k {
            sum -= l[c * k + r] * b[c];
        }
        b[r] = sum / l[r * k + r];
    }
}

/// Solve `l y = b` for lower-triangular `l`.
pub(crate) fn forward_substitute(l: &[f64], k: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; k];
    for r in 0..k {
        let mut sum = b[r];
        for c in 0..r {
            sum -= l[r * k + c] * y[c];
        }
        y[r] = sum / l[r * k + r];
    }
    y
}

/// Solve `l l^T x = b` given the Cholesky factor `l`.
pub(crate) fn cholesky_solve(l: &[f64], k: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    cholesky_solve_in_place(l, k, &mut x);
    x
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvector `i` stored as
/// column `i` of the row-major matrix, so `a = v diag(e) v^T`.
pub(crate) fn symmetric_eigen(a: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(a.len(), k * k);
    let mut m = a.to_vec();
    let mut v = vec![0.0; k * k];
    for r in 0..k {
        v[r * k + r] = 1.0;
    }
    for _ in 0..64 {
        let off: f64 = (0..k)
            .flat_map(|p| ((p + 1)..k).map(move |q| (p, q)))
            .map(|(p, q)| m[p * k + q] * m[p * k + q])
            .sum();
        if off <= 1e-30 * (1.0 + (0..k).map(|r| m[r * k + r].abs()).fold(0.0f64, f64::max)) {
            break;
        }
        for p in 0..k {
            for q in (p + 1)..k {
                let apq = m[p * k + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * k + q] - m[p * k + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..k {
                    let mrp = m[r * k + p];
                    let mrq = m[r * k + q];
                    m[r * k + p] = c * mrp - s * mrq;
                    m[r * k + q] = s * mrp + c * mrq;
                }
                for col in 0..k {
                    let mpc = m[p * k + col];
                    let mqc = m[q * k + col];
                    m[p * k + col] = c * mpc - s * mqc;
                    m[q * k + col] = s * mpc + c * mqc;
                }
                for r in 0..k {
                    let vrp = v[r * k + p];
                    let vrq = v[r * k + q];
                    v[r * k + p] = c * vrp - s * vrq;
                    v[r * k + q] = s * vrp + c * vrq;
                }
            }
        }
    }
    let eigenvalues = (0..k).map(|r| m[r * k + r]).collect();
    (eigenvalues, v)
}

/// Minimum-norm least-squares solution of `a x = b` for symmetric
/// positive-semidefinite `a`, via the eigendecomposition pseudo-inverse.
pub(crate) fn pseudo_solve(a: &[f64], k: usize, b: &[f64]) -> Vec<f64> {
    let (eigenvalues, vectors) = symmetric_eigen(a, k);
    let largest = eigenvalues.iter().fold(0.0f64, |acc, &e| acc.max(e.abs()));
    let cutoff = 1e-12 * largest;
    let mut x = vec![0.0; k];
    for (i, &e) in eigenvalues.iter().enumerate() {
        if e.abs() <= cutoff {
            continue;
        }
        let mut proj = 0.0;
        for r in 0..k {
            proj += vectors[r * k + i] * b[r];
        }
        let coeff = proj / e;
        for r in 0..k {
            x[r] += coeff * vectors[r * k + i];
        }
    }
    x
}

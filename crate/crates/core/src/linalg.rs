//! Dense complex linear-algebra helpers shared by the library.
//!
//! Spectral computation is done by Jacobi iterations implemented here: a
//! cyclic two-sided Jacobi eigensolver for Hermitian matrices and a
//! one-sided Jacobi SVD. nalgebra supplies storage and arithmetic only;
//! its built-in complex SVD mis-reconstructs some well-conditioned
//! matrices at the 1e-4 level, which is far outside our tolerances.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

const MAX_SWEEPS: usize = 60;

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Largest singular value; 0.0 for empty matrices.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    svd(m).sigma.first().copied().unwrap_or(0.0)
}

/// All singular values, descending; empty matrices have none.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    svd(m).sigma
}

/// The unitary a complex Jacobi rotation applies on the right of a
/// column pair, diagonalizing the Hermitian 2x2 `[[app, apq], [conj(apq),
/// aqq]]`: `J = [[c e^{i phi}, s e^{i phi}], [-s, c]]` with `apq = |apq|
/// e^{i phi}`.
struct JacobiRotation {
    // column p receives  a_p * j11 + a_q * j21, column q likewise
    j11: Complex64,
    j12: Complex64,
    j21: Complex64,
    j22: Complex64,
}

fn jacobi_rotation(app: f64, aqq: f64, apq: Complex64) -> JacobiRotation {
    let b = apq.norm();
    let phase = apq / b;
    let tau = (aqq - app) / (2.0 * b);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    JacobiRotation {
        j11: phase * c,
        j12: phase * s,
        j21: Complex64::new(-s, 0.0),
        j22: Complex64::new(c, 0.0),
    }
}

pub struct HermEigen {
    /// Ascending real eigenvalues.
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the corresponding eigenvectors.
    pub vectors: CMat,
}

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix. The input is
/// symmetrized first so that rounding-level Hermiticity violations
/// cannot leak complex eigenvalues into the result.
pub fn herm_eigen(m: &CMat) -> HermEigen {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "herm_eigen requires a square matrix");
    if n == 0 {
        return HermEigen {
            values: Vec::new(),
            vectors: zeros(0, 0),
        };
    }
    let mut a = (m + m.adjoint()).scale(0.5);
    let mut v = identity(n);
    let scale: f64 = a
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = f64::EPSILON * scale;

    for _sweep in 0..MAX_SWEEPS {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].norm());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.norm() <= tol * 1e-3 {
                    continue;
                }
                let rot = jacobi_rotation(a[(p, p)].re, a[(q, q)].re, apq);
                // A <- J^* A J on rows/columns p, q
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * rot.j11 + aiq * rot.j21;
                    a[(i, q)] = aip * rot.j12 + aiq * rot.j22;
                }
                for i in 0..n {
                    let api = a[(p, i)];
                    let aqi = a[(q, i)];
                    a[(p, i)] = rot.j11.conj() * api + rot.j21.conj() * aqi;
                    a[(q, i)] = rot.j12.conj() * api + rot.j22.conj() * aqi;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * rot.j11 + viq * rot.j21;
                    v[(i, q)] = vip * rot.j12 + viq * rot.j22;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        vectors.set_column(new_col, &v.column(old_col));
    }
    HermEigen { values, vectors }
}

/// Applies a real scalar function to a Hermitian matrix through its
/// eigendecomposition.
pub fn herm_apply(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let eig = herm_eigen(m);
    let n = m.nrows();
    let mut result = zeros(n, n);
    for (i, &lambda) in eig.values.iter().enumerate() {
        let vcol = eig.vectors.column(i);
        result += (vcol * vcol.adjoint()) * Complex64::new(f(lambda), 0.0);
    }
    result
}

pub struct Svd {
    /// `rows x k` with `k = min(rows, cols)`; columns beyond the
    /// numerical rank are zero.
    pub u: CMat,
    /// Descending singular values, `k` of them.
    pub sigma: Vec<f64>,
    /// `cols x k`, orthonormal columns.
    pub v: CMat,
}

/// One-sided Jacobi SVD: `m = u diag(sigma) v^*` with singular values
/// sorted descending. Column norms are computed directly, so small
/// singular values keep high relative accuracy.
pub fn svd(m: &CMat) -> Svd {
    let (rows, cols) = m.shape();
    if rows.min(cols) == 0 {
        return Svd {
            u: zeros(rows, 0),
            sigma: Vec::new(),
            v: zeros(cols, 0),
        };
    }
    if rows >= cols {
        svd_tall(m)
    } else {
        let dec = svd_tall(&m.adjoint());
        Svd {
            u: dec.v,
            sigma: dec.sigma,
            v: dec.u,
        }
    }
}

fn svd_tall(m: &CMat) -> Svd {
    let (rows, cols) = m.shape();
    debug_assert!(rows >= cols);
    let mut a = m.clone();
    let mut v = identity(cols);
    let scale: f64 = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Svd {
            u: zeros(rows, cols),
            sigma: vec![0.0; cols],
            v,
        };
    }
    let tol = f64::EPSILON;

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let mut app: f64 = 0.0;
                let mut aqq: f64 = 0.0;
                let mut apq = Complex64::new(0.0, 0.0);
                for i in 0..rows {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    app += aip.norm_sqr();
                    aqq += aiq.norm_sqr();
                    apq += aip.conj() * aiq;
                }
                if apq.norm() <= tol * (app.sqrt() * aqq.sqrt()).max(f64::MIN_POSITIVE) {
                    continue;
                }
                rotated = true;
                let rot = jacobi_rotation(app, aqq, apq);
                for i in 0..rows {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * rot.j11 + aiq * rot.j21;
                    a[(i, q)] = aip * rot.j12 + aiq * rot.j22;
                }
                for i in 0..cols {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * rot.j11 + viq * rot.j21;
                    v[(i, q)] = vip * rot.j12 + viq * rot.j22;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let mut u = zeros(rows, cols);
    let mut v_sorted = zeros(cols, cols);
    let mut sigma = Vec::with_capacity(cols);
    let floor = f64::EPSILON * scale * rows.max(cols) as f64 * 1e-2;
    for (new_col, &old) in order.iter().enumerate() {
        let s = norms[old];
        sigma.push(s);
        v_sorted.set_column(new_col, &v.column(old));
        if s > floor {
            let col = a.column(old) / Complex64::new(s, 0.0);
            u.set_column(new_col, &col);
        }
        norms[old] = s;
    }
    Svd {
        u,
        sigma,
        v: v_sorted,
    }
}

/// Numerical rank with the rank-revealing convention: singular values
/// at or below `tol * sigma_max * max(rows, cols)` count as zero.
pub fn rank_with_tol(sigma: &[f64], rows: usize, cols: usize, tol: f64) -> usize {
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    if sigma_max == 0.0 {
        return 0;
    }
    let cutoff = tol * sigma_max * rows.max(cols) as f64;
    sigma.iter().filter(|&&s| s > cutoff).count()
}

/// Moore-Penrose pseudo-inverse with the same rank cutoff.
pub fn pinv(m: &CMat, tol: f64) -> CMat {
    let (rows, cols) = m.shape();
    let dec = svd(m);
    let r = rank_with_tol(&dec.sigma, rows, cols, tol);
    let mut result = zeros(cols, rows);
    for i in 0..r {
        let vi = dec.v.column(i);
        let ui = dec.u.column(i);
        result += (vi * ui.adjoint()) * Complex64::new(1.0 / dec.sigma[i], 0.0);
    }
    result
}

/// Orthogonal projection onto the span of the first `r` columns of `basis`.
pub fn projector_from_columns(basis: &CMat, r: usize) -> CMat {
    let n = basis.nrows();
    let mut p = zeros(n, n);
    for i in 0..r {
        let c = basis.column(i);
        p += c * c.adjoint();
    }
    p
}

/// Hermitian positive square root and inverse square root.
pub fn herm_sqrt(m: &CMat) -> CMat {
    herm_apply(m, |x| x.max(0.0).sqrt())
}

pub fn herm_inv_sqrt(m: &CMat) -> CMat {
    herm_apply(m, |x| 1.0 / x.max(f64::MIN_POSITIVE).sqrt())
}

/// Exact inverse for small well-conditioned matrices; `None` if singular.
pub fn try_inverse(m: &CMat) -> Option<CMat> {
    if m.nrows() == 0 {
        return Some(zeros(0, 0));
    }
    m.clone().try_inverse()
}

#[cfg(test)]
pub fn diff_norm(a: &CMat, b: &CMat) -> f64 {
    spectral_norm(&(a - b))
}

/// Kronecker product with the left factor's indices outer (slow).
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij != Complex64::new(0.0, 0.0) {
                for p in 0..br {
                    for q in 0..bc {
                        out[(i * br + p, j * bc + q)] = aij * b[(p, q)];
                    }
                }
            }
        }
    }
    out
}

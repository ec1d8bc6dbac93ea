//! Dense symmetric eigensolvers and exact exponential propagation.
//!
//! Two routes are provided. [`symmetric_eigen`] wraps nalgebra's
//! tridiagonal QR solver; its eigenvalues carry an absolute error of order
//! `eps * ||H||`. [`factor_eigen`] diagonalizes `H = G^T G` from the factor
//! `G` by one-sided (Hestenes) Jacobi, which keeps relative accuracy in the
//! tiny eigenvalues of strongly graded factors. Mapped Hamiltonians at low
//! temperature have metastable eigenvalues far below `eps`, and only the
//! factor route separates those from the true zero mode.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Eigenpairs sorted by ascending eigenvalue; `vectors` holds them as columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    fn sorted(values: Vec<f64>, vectors: DMatrix<f64>) -> Self {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let mut sorted = DMatrix::zeros(vectors.nrows(), n);
        for (dst, &src) in order.iter().enumerate() {
            let mut col = vectors.column(src).into_owned();
            // Fix the sign so that the largest component is positive.
            let lead = col
                .iter()
                .copied()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if lead < 0.0 {
                col.neg_mut();
            }
            sorted.set_column(dst, &col);
        }
        SpectralDecomposition {
            values: order.iter().map(|&i| values[i]).collect(),
            vectors: sorted,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn ground_vector(&self) -> DVector<f64> {
        self.vectors.column(0).into_owned()
    }

    /// Dense `exp(-i dt H) = V exp(-i dt Lambda) V^T`.
    pub fn propagator_matrix(&self, dt: f64) -> DMatrix<Complex64> {
        let n = self.dim();
        let v = &self.vectors;
        let mut u = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for (j, &lambda) in self.values.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -lambda * dt);
            for c in 0..n {
                let vc = v[(c, j)];
                if vc == 0.0 {
                    continue;
                }
                for r in 0..n {
                    u[(r, c)] += phase * (v[(r, j)] * vc);
                }
            }
        }
        u
    }

    /// `exp(-i dt H) psi`, exact up to the accuracy of the eigenpairs.
    pub fn propagate(&self, psi: &DVector<Complex64>, dt: f64) -> DVector<Complex64> {
        let n = self.dim();
        let v = &self.vectors;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
        for (j, c) in coeffs.iter_mut().enumerate() {
            let col = v.column(j);
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, p) in col.iter().zip(psi.iter()) {
                acc += p * *x;
            }
            *c = acc * Complex64::from_polar(1.0, -self.values[j] * dt);
        }
        let mut out = DVector::from_element(n, Complex64::new(0.0, 0.0));
        for (j, c) in coeffs.iter().enumerate() {
            for (o, x) in out.iter_mut().zip(v.column(j).iter()) {
                *o += c * *x;
            }
        }
        out
    }
}

/// Eigen-decomposition of a real symmetric matrix (LAPACK-style QR).
pub fn symmetric_eigen(h: &DMatrix<f64>) -> SpectralDecomposition {
    let eig = SymmetricEigen::new(h.clone());
    SpectralDecomposition::sorted(eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Eigen-decomposition of `G^T G` from its factor `G` by one-sided Jacobi.
///
/// Columns of `G` are rotated pairwise until mutually orthogonal; the
/// accumulated rotations are the eigenvectors and the squared column norms
/// the eigenvalues.
pub fn factor_eigen(factor: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    let (m, n) = factor.shape();
    let mut a = factor.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let tol = f64::EPSILON * (m.max(1) as f64);
    let mut converged = n < 2;
    let mut norms = vec![0.0; n];
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        for (j, x) in norms.iter_mut().enumerate() {
            *x = a.column(j).norm_squared();
        }
        let mut rotated = false;
        for i in 0..n - 1 {
            for j in i + 1..n {
                let (alpha, beta) = (norms[i], norms[j]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = a.column(i).dot(&a.column(j));
                if gamma == 0.0 || gamma.abs() <= tol * alpha.sqrt() * beta.sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                rotate_columns(a.as_mut_slice(), m, i, j, c, s);
                rotate_columns(v.as_mut_slice(), n, i, j, c, s);
                norms[i] = a.column(i).norm_squared();
                norms[j] = a.column(j).norm_squared();
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }
    let values = (0..n).map(|j| a.column(j).norm_squared()).collect();
    Ok(SpectralDecomposition::sorted(values, v))
}

/// Eigen-decomposition of `G^T G` for `G = diag(row_scale) T diag(col_scale)`
/// with `T` totally unimodular, e.g. the oriented incidence matrix of a graph.
///
/// Complete-pivoting elimination of such a `G` only ever forms products and
/// quotients of the scalings, because every Schur complement of `T` stays in
/// {-1, 0, 1}. This yields `G = X diag(d) Y^T` exactly, with `X` and `Y`
/// entrywise bounded by one. A QR factorization of `X diag(d)` followed by
/// one-sided Jacobi on `R Y^T` then resolves eigenvalues spread over hundreds
/// of orders of magnitude.
pub fn scaled_unimodular_eigen(
    signs: &DMatrix<f64>,
    row_scale: &[f64],
    col_scale: &[f64],
) -> Result<SpectralDecomposition> {
    let (m, n) = signs.shape();
    if row_scale.len() != m || col_scale.len() != n {
        return Err(Error::Parameter("scaling lengths do not match the sign matrix".into()));
    }
    if row_scale.iter().chain(col_scale).any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::Parameter("scalings must be finite and positive".into()));
    }
    let mut t = signs.clone();
    let mut row_free = vec![true; m];
    let mut col_free = vec![true; n];
    let mut pivots: Vec<(f64, DVector<f64>, DVector<f64>)> = Vec::new();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for j in (0..n).filter(|&j| col_free[j]) {
            for i in (0..m).filter(|&i| row_free[i]) {
                if t[(i, j)] != 0.0 {
                    let mag = row_scale[i] * col_scale[j];
                    if best.is_none_or(|(_, _, b)| mag > b) {
                        best = Some((i, j, mag));
                    }
                }
            }
        }
        let Some((p, q, _)) = best else { break };
        let tp = t[(p, q)];
        let mut x = DVector::zeros(m);
        let mut y = DVector::zeros(n);
        for i in 0..m {
            if row_free[i] && t[(i, q)] != 0.0 {
                x[i] = (row_scale[i] / row_scale[p]) * (t[(i, q)] / tp);
            }
        }
        for j in 0..n {
            if col_free[j] && t[(p, j)] != 0.0 {
                y[j] = (col_scale[j] / col_scale[q]) * (t[(p, j)] / tp);
            }
        }
        row_free[p] = false;
        col_free[q] = false;
        let targets: Vec<usize> = (0..m).filter(|&i| row_free[i] && t[(i, q)] != 0.0).collect();
        for i in targets {
            let f = t[(i, q)] / tp;
            for j in (0..n).filter(|&j| col_free[j]) {
                let v = t[(i, j)] - f * t[(p, j)];
                if v.abs() > 1.0 {
                    return Err(Error::Precondition("sign matrix is not totally unimodular".into()));
                }
                t[(i, j)] = v;
            }
        }
        pivots.push((row_scale[p] * tp * col_scale[q], x, y));
    }
    let r = pivots.len();
    if r == 0 {
        return factor_eigen(&DMatrix::zeros(0, n));
    }
    pivots.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
    let mut xd = DMatrix::zeros(m, r);
    let mut yt = DMatrix::zeros(r, n);
    for (k, (d, x, y)) in pivots.iter().enumerate() {
        xd.set_column(k, &(x * *d));
        yt.set_row(k, &y.transpose());
    }
    let upper = xd.qr().r();
    factor_eigen(&(upper * yt))
}

/// Applies `[c_i, c_j] <- [c c_i - s c_j, s c_i + c c_j]` to columns `i < j`
/// of a column-major buffer with `rows` rows.
fn rotate_columns(buf: &mut [f64], rows: usize, i: usize, j: usize, c: f64, s: f64) {
    let (head, tail) = buf.split_at_mut(j * rows);
    let ci = &mut head[i * rows..(i + 1) * rows];
    let cj = &mut tail[..rows];
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

/// Euclidean norm squared of a complex vector.
pub fn norm_sq(psi: &DVector<Complex64>) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum()
}

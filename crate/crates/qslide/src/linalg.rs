//! Dense symmetric and symmetric-tridiagonal eigensolvers.
//!
//! The chains and scattering graphs in this crate are real symmetric with
//! couplings that grow linearly in the chain length, so time evolution is
//! done by exact spectral decomposition rather than ODE stepping. The
//! kernels are classic EISPACK-style routines: Householder reduction to
//! tridiagonal form followed by the implicit-shift QL iteration. They are
//! strictly sequential, which keeps results bit-identical across runs and
//! worker counts.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;

use crate::error::{QslideError, Result};

/// Eigendecomposition of a real symmetric matrix.
///
/// `eigenvalues` ascending; column `n` of `eigenvectors` pairs with
/// `eigenvalues[n]`.
#[derive(Debug, Clone)]
pub struct EighResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Array2<f64>,
}

const MAX_QL_ITER: usize = 50;

/// Implicit-shift QL iteration on a tridiagonal matrix, accumulating the
/// rotations into `z`. `d` holds the diagonal, `e[i]` couples sites `i`
/// and `i+1` with `e[n-1]` used as workspace.
fn ql_implicit(d: &mut [f64], e: &mut [f64], z: &mut Array2<f64>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            // Look for a negligible off-diagonal element; e[n-1] = 0 is the sentinel.
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITER {
                return Err(QslideError::Numerical(format!(
                    "QL iteration failed to converge at row {l}"
                )));
            }
            // Wilkinson-style shift from the leading 2x2 block.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflowed = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // Rotation annihilated prematurely; restart the sweep.
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflowed = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..z.nrows() {
                    f = z[(k, i + 1)];
                    z[(k, i + 1)] = s * z[(k, i)] + c * f;
                    z[(k, i)] = c * z[(k, i)] - s * f;
                }
            }
            if underflowed {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Sort eigenvalues ascending and permute eigenvector columns to match.
fn sort_pairs(d: Vec<f64>, z: Array2<f64>) -> EighResult {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).expect("eigenvalue NaN"));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut eigenvectors = Array2::zeros((z.nrows(), n));
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.column_mut(dst).assign(&z.column(src));
    }
    EighResult {
        eigenvalues,
        eigenvectors,
    }
}

/// Eigendecomposition of a symmetric tridiagonal matrix given its diagonal
/// and off-diagonal (`offdiag[i]` couples sites `i` and `i+1`).
pub fn eigh_tridiagonal(diag: &[f64], offdiag: &[f64]) -> Result<EighResult> {
    let n = diag.len();
    if n == 0 {
        return Err(QslideError::InvalidSize("empty matrix".into()));
    }
    if offdiag.len() + 1 != n {
        return Err(QslideError::Shape(format!(
            "offdiag length {} does not match diagonal length {}",
            offdiag.len(),
            n
        )));
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(offdiag);
    let mut z = Array2::eye(n);
    ql_implicit(&mut d, &mut e, &mut z)?;
    Ok(sort_pairs(d, z))
}

/// Householder reduction of a symmetric matrix to tridiagonal form,
/// accumulating the orthogonal transformation so the QL stage yields
/// eigenvectors of the original matrix.
fn householder_tridiagonalize(a: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[(i, k)].abs()).sum();
            if scale == 0.0 {
                e[i] = a[(i, l)];
            } else {
                for k in 0..=l {
                    a[(i, k)] /= scale;
                    h += a[(i, k)] * a[(i, k)];
                }
                let mut f = a[(i, l)];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[(i, l)] = f - g;
                f = 0.0;
                for j in 0..=l {
                    a[(j, i)] = a[(i, j)] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[(j, k)] * a[(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g += a[(k, j)] * a[(i, k)];
                    }
                    e[j] = g / h;
                    f += e[j] * a[(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[(j, k)] -= f * e[k] + g * a[(i, k)];
                    }
                }
            }
        } else {
            e[i] = a[(i, l)];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    // Accumulate the Householder transformations.
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += a[(i, k)] * a[(k, j)];
                }
                for k in 0..i {
                    a[(k, j)] -= g * a[(k, i)];
                }
            }
        }
        d[i] = a[(i, i)];
        a[(i, i)] = 1.0;
        for j in 0..i {
            a[(j, i)] = 0.0;
            a[(i, j)] = 0.0;
        }
    }
}

/// Eigendecomposition of a dense real symmetric matrix.
pub fn eigh_dense(matrix: ArrayView2<f64>) -> Result<EighResult> {
    let n = matrix.nrows();
    if n == 0 {
        return Err(QslideError::InvalidSize("empty matrix".into()));
    }
    if matrix.ncols() != n {
        return Err(QslideError::Shape(format!(
            "matrix is {}x{}, expected square",
            n,
            matrix.ncols()
        )));
    }
    let mut a = matrix.to_owned();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    householder_tridiagonalize(&mut a, &mut d, &mut e);
    // QL expects the coupling between i and i+1 at e[i].
    for i in 0..n - 1 {
        e[i] = e[i + 1];
    }
    e[n - 1] = 0.0;
    ql_implicit(&mut d, &mut e, &mut a)?;
    Ok(sort_pairs(d, a))
}

impl EighResult {
    /// Apply exp(-i H dt) to `psi` through the spectral decomposition.
    pub fn evolve(&self, psi: &[Complex64], dt: f64) -> Result<Vec<Complex64>> {
        let n = self.eigenvalues.len();
        if psi.len() != n {
            return Err(QslideError::Shape(format!(
                "state length {} does not match matrix size {}",
                psi.len(),
                n
            )));
        }
        let v = self
            .eigenvectors
            .as_slice()
            .expect("eigenvector storage is contiguous");
        // c = V^T psi
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        for (i, &amp) in psi.iter().enumerate() {
            let row = &v[i * n..(i + 1) * n];
            for (ck, &vik) in c.iter_mut().zip(row) {
                *ck += amp * vik;
            }
        }
        // c_k <- exp(-i lambda_k dt) c_k
        for (ck, &lambda) in c.iter_mut().zip(&self.eigenvalues) {
            *ck *= Complex64::from_polar(1.0, -lambda * dt);
        }
        // psi' = V c
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (i, oi) in out.iter_mut().enumerate() {
            let row = &v[i * n..(i + 1) * n];
            let mut acc = Complex64::new(0.0, 0.0);
            for (&ck, &vik) in c.iter().zip(row) {
                acc += ck * vik;
            }
            *oi = acc;
        }
        Ok(out)
    }

    /// Largest |Hv - lambda v| over all pairs, relative to max |lambda|.
    pub fn residual(&self, matrix: ArrayView2<f64>) -> f64 {
        let n = self.eigenvalues.len();
        let scale = self
            .eigenvalues
            .iter()
            .fold(1.0f64, |m, &l| m.max(l.abs()));
        let mut worst = 0.0f64;
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            for i in 0..n {
                let mut hv = 0.0;
                for j in 0..n {
                    hv += matrix[(i, j)] * self.eigenvectors[(j, k)];
                }
                worst = worst.max((hv - lambda * self.eigenvectors[(i, k)]).abs());
            }
        }
        worst / scale
    }
}

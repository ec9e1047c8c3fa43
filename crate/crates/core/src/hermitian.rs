//! Helpers for Hermitian matrices: spectral decomposition, PSD projection
//! and the real coordinate map used by the convex solvers.
//!
//! The real coordinates of an n×n Hermitian matrix are laid out as the n
//! diagonal entries followed by `(Re, Im)` of every strictly upper entry in
//! row-major order, n² numbers in total.

use nalgebra::SymmetricEigen;

use crate::{c64, CMatrix, Error, Result};

/// Largest |A − A†| entry.
pub fn max_asymmetry(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// (A + A†)/2.
pub fn symmetrize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Real part of Tr{A† B}.
pub fn inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order; column k of the returned matrix is the k-th eigenvector.
pub fn eigh(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(symmetrize(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    SymmetricEigen::new(symmetrize(a))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Rebuilds V diag(λ) V†.
pub fn from_spectrum(values: &[f64], vectors: &CMatrix) -> CMatrix {
    let n = vectors.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in values.iter().enumerate() {
        if lam == 0.0 {
            continue;
        }
        let v = vectors.column(k);
        out += (&v * v.adjoint()).scale(lam);
    }
    out
}

/// Euclidean projection onto the PSD cone: negative eigenvalues set to zero.
pub fn project_psd(a: &CMatrix) -> CMatrix {
    let (values, vectors) = eigh(a);
    if values.iter().all(|&v| v >= 0.0) {
        return symmetrize(a);
    }
    let clipped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
    symmetrize(&from_spectrum(&clipped, &vectors))
}

/// Checks Hermiticity within `tol`.
pub fn require_hermitian(a: &CMatrix, tol: f64) -> Result<()> {
    let asym = max_asymmetry(a);
    if asym > tol {
        return Err(Error::NotHermitian(asym));
    }
    Ok(())
}

/// Checks Hermiticity and that the smallest eigenvalue is ≥ −`tol`.
pub fn require_psd(a: &CMatrix, tol: f64) -> Result<()> {
    require_hermitian(a, 1e-10_f64.max(tol))?;
    let lam = min_eigenvalue(a);
    if lam < -tol {
        return Err(Error::NotPsd(lam));
    }
    Ok(())
}

/// Number of real coordinates of an n×n Hermitian matrix.
pub fn param_count(n: usize) -> usize {
    n * n
}

/// Real coordinates of a Hermitian matrix (see module docs).
pub fn to_params(a: &CMatrix) -> Vec<f64> {
    let n = a.nrows();
    let mut out = Vec::with_capacity(n * n);
    out.extend((0..n).map(|i| a[(i, i)].re));
    for i in 0..n {
        for j in i + 1..n {
            out.push(a[(i, j)].re);
            out.push(a[(i, j)].im);
        }
    }
    out
}

pub fn from_params(x: &[f64], n: usize) -> CMatrix {
    assert_eq!(x.len(), n * n, "wrong parameter count");
    let mut a = CMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = c64(x[i], 0.0);
    }
    let mut k = n;
    for i in 0..n {
        for j in i + 1..n {
            let z = c64(x[k], x[k + 1]);
            a[(i, j)] = z;
            a[(j, i)] = z.conj();
            k += 2;
        }
    }
    a
}

/// Weights w such that Re Tr{A†B} = Σ_k w_k a_k b_k in real coordinates.
pub fn param_weights(n: usize) -> Vec<f64> {
    let mut w = vec![1.0; n];
    w.resize(n * n, 2.0);
    w
}

/// Coordinates φ such that Re Tr{Φᵀ G} = φ · to_params(G) for Hermitian G,
/// given a Hermitian-paired Φ (Φ_qp = conj Φ_pq).
pub fn sensitivity_params(phi: &CMatrix) -> Vec<f64> {
    let n = phi.nrows();
    let mut out = Vec::with_capacity(n * n);
    out.extend((0..n).map(|i| phi[(i, i)].re));
    for i in 0..n {
        for j in i + 1..n {
            // Φ_ij G_ij + Φ_ji G_ji = 2 Re(Φ_ij G_ij)
            out.push(2.0 * phi[(i, j)].re);
            out.push(-2.0 * phi[(i, j)].im);
        }
    }
    out
}

/// Inverse of [`sensitivity_params`] for gradients: if `y_k = ∂C/∂g_k` in
/// real coordinates, returns the Hermitian R with δC = Re Tr{R δG}.
pub fn gradient_from_params(y: &[f64], n: usize) -> CMatrix {
    let mut r = CMatrix::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = c64(y[i], 0.0);
    }
    let mut k = n;
    for i in 0..n {
        for j in i + 1..n {
            // δC = y_re δRe G_ij + y_im δIm G_ij, and Tr{RδG} contributes
            // 2 Re(R_ji δG_ij) = 2(Re R_ji δRe − Im R_ji δIm).
            let r_ji = c64(0.5 * y[k], -0.5 * y[k + 1]);
            r[(j, i)] = r_ji;
            r[(i, j)] = r_ji.conj();
            k += 2;
        }
    }
    r
}

//! Dense linear algebra helpers over complex matrices: Hermitian
//! eigendecompositions, singular values, solves, and matrix square roots.
//! These back both the measured quantities (frame bounds, operator norms)
//! and the independent oracles the tests compare against.

use crate::error::{Error, Result};
use crate::C64;
use nalgebra::{DMatrix, DVector};

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let eig = m.clone().symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Hermitian eigendecomposition `M = U diag(vals) U*`; eigenvalues ascending,
/// columns of `U` matching.
pub fn hermitian_eig(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap()
    });
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::<C64>::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Largest singular value (`ℓ² → ℓ²` operator norm).
pub fn operator_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Spectral norm of `M − I`.
pub fn deviation_from_identity(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut d = m.clone();
    for i in 0..n {
        d[(i, i)] -= C64::new(1.0, 0.0);
    }
    operator_norm(&d)
}

/// Dense linear solve `M X = B` via LU (the inverse oracle).
pub fn solve(m: &DMatrix<C64>, b: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    m.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Precondition("singular matrix in dense solve".into()))
}

/// Dense inverse via LU.
pub fn inverse(m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = m.nrows();
    solve(m, &DMatrix::<C64>::identity(n, n))
}

/// Hermitian square root `M^{1/2} = U diag(√λ) U*` (eigendecomposition
/// oracle); requires `λ_min ≥ −tol`.
pub fn hermitian_sqrt(m: &DMatrix<C64>, tol: f64) -> Result<DMatrix<C64>> {
    let (vals, vecs) = hermitian_eig(m);
    if vals.first().copied().unwrap_or(0.0) < -tol {
        return Err(Error::Precondition(format!(
            "matrix not PSD: λ_min = {}",
            vals[0]
        )));
    }
    apply_spectral(&vals, &vecs, |l| l.max(0.0).sqrt())
}

/// Hermitian inverse square root via the eigendecomposition.
pub fn hermitian_inv_sqrt(m: &DMatrix<C64>, tol: f64) -> Result<DMatrix<C64>> {
    let (vals, vecs) = hermitian_eig(m);
    if vals.first().copied().unwrap_or(0.0) <= tol {
        return Err(Error::Precondition(format!(
            "matrix not positive definite: λ_min = {:?}",
            vals.first()
        )));
    }
    apply_spectral(&vals, &vecs, |l| 1.0 / l.sqrt())
}

fn apply_spectral<F: Fn(f64) -> f64>(
    vals: &[f64],
    vecs: &DMatrix<C64>,
    f: F,
) -> Result<DMatrix<C64>> {
    let n = vals.len();
    let mut d = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = C64::new(f(vals[i]), 0.0);
    }
    Ok(vecs * d * vecs.adjoint())
}

/// Orthonormal column basis of the span of `gram`-described vectors:
/// given the Gram matrix `G` of a finite system, returns coefficient columns
/// `U` with `U* G U = I`, dropping eigenvalues below `droptol · λ_max`.
/// Also returns the kept eigenvalues (the subspace is the numerical span).
pub fn gram_orthonormal_basis(
    gram: &DMatrix<C64>,
    droptol: f64,
) -> Result<(DMatrix<C64>, Vec<f64>)> {
    let (vals, vecs) = hermitian_eig(gram);
    let lmax = vals.last().copied().unwrap_or(0.0);
    if lmax <= 0.0 {
        return Err(Error::Precondition("gram matrix has no positive mass".into()));
    }
    let kept: Vec<usize> = (0..vals.len())
        .filter(|&i| vals[i] > droptol * lmax)
        .collect();
    let mut u = DMatrix::<C64>::zeros(gram.nrows(), kept.len());
    let mut kept_vals = Vec::with_capacity(kept.len());
    for (c, &i) in kept.iter().enumerate() {
        let scale = 1.0 / vals[i].sqrt();
        u.set_column(c, &(vecs.column(i) * C64::new(scale, 0.0)));
        kept_vals.push(vals[i]);
    }
    Ok((u, kept_vals))
}

/// Frobenius norm of a complex matrix.
pub fn frobenius(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Max entrywise modulus difference between two matrices.
pub fn max_entry_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `ℓ²` norm of a complex vector.
pub fn vec_norm(v: &DVector<C64>) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

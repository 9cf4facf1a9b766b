//! Dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 10_000;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Max entrywise |A - A^dagger|.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            let d = (a[(i, j)] - a[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

pub fn max_abs_entry(a: &CMat) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Symmetrize `(A + A^dagger)/2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * cr(0.5)
}

/// Hermitian eigen-decomposition with eigenvalues sorted ascending.
pub fn eigh(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = a.nrows();
    let h = hermitian_part(a);
    let eig = SymmetricEigen::try_new(h, EIG_EPS, EIG_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

pub fn singular_values(a: &CMat) -> Result<DVector<f64>> {
    let svd = SVD::try_new(a.clone(), false, false, EIG_EPS, EIG_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    Ok(svd.singular_values)
}

/// Sup-operator norm (largest singular value).
pub fn op_norm(a: &CMat) -> f64 {
    match singular_values(a) {
        Ok(s) => s.iter().cloned().fold(0.0, f64::max),
        Err(_) => f64::NAN,
    }
}

/// Frobenius (Hilbert-Schmidt) norm.
pub fn frob_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Trace norm (sum of singular values).
pub fn trace_norm(a: &CMat) -> f64 {
    match singular_values(a) {
        Ok(s) => s.iter().sum(),
        Err(_) => f64::NAN,
    }
}

/// `exp(-i t H)` for Hermitian `H` via its eigen-decomposition.
pub fn expm_i_hermitian(h: &CMat, t: f64) -> Result<CMat> {
    let (vals, vecs) = eigh(h)?;
    let n = h.nrows();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let phase = Complex64::from_polar(1.0, -t * vals[j]);
        for i in 0..n {
            scaled[(i, j)] *= phase;
        }
    }
    Ok(scaled * vecs.adjoint())
}

/// Unitary factor of the polar decomposition `A = U |A|`.
pub fn polar_unitary(a: &CMat) -> Result<CMat> {
    let svd = SVD::try_new(a.clone(), true, true, EIG_EPS, EIG_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let u = svd.u.ok_or_else(|| Error::NumericalFailure("SVD lost U".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::NumericalFailure("SVD lost V^T".into()))?;
    Ok(u * v_t)
}

/// `||U^dagger U - I||` in sup norm.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let n = u.ncols();
    op_norm(&(u.adjoint() * u - identity(n)))
}

/// Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Random Hermitian matrix with entries of order `scale`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> CMat {
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = cr(scale * rng.gen_range(-1.0..1.0));
        for j in (i + 1)..n {
            let z = c(
                scale * rng.gen_range(-1.0..1.0),
                scale * rng.gen_range(-1.0..1.0),
            );
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Real part of the trace of a product, `Re Tr[A B]`, without forming the product.
pub fn re_trace_product(a: &CMat, b: &CMat) -> f64 {
    trace_product(a, b).re
}

/// `Tr[A B]` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Minimum eigenvalue of a real symmetric matrix.
pub fn min_eigenvalue_sym(g: &RMat) -> f64 {
    let sym = (g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Max |g_ij - g_ji|.
pub fn symmetry_defect(g: &RMat) -> f64 {
    (g - g.transpose()).amax()
}

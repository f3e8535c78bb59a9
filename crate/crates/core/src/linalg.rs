//! Dense complex linear-algebra kernels shared by the physics modules.
//!
//! Everything here works on `nalgebra` dynamic matrices of `Complex64`. The
//! dimensions in this crate stay small (a few thousand at most), so dense
//! storage is used throughout.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest entry modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff_vec(a: &CVector, b: &CVector) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch in max_abs_diff_vec");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    a.is_square() && max_abs_diff(a, &a.adjoint()) <= tol
}

pub fn is_unitary(a: &CMatrix, tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let n = a.nrows();
    max_abs_diff(&(a.adjoint() * a), &CMatrix::identity(n, n)) <= tol
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn one_norm(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues come back in
/// ascending order with matching eigenvector columns.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(a.clone());
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Singular values of `a` in descending order, computed by one-sided
/// (Hestenes) Jacobi rotations.
///
/// The stopping test is relative to the column norms, so small singular
/// values of graded matrices (entries spanning many orders of magnitude)
/// are resolved to high relative accuracy rather than to `eps * ||a||`.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut work = if a.ncols() > a.nrows() {
        a.adjoint()
    } else {
        a.clone()
    };
    let n = work.ncols();
    let m = work.nrows();
    let tol = f64::EPSILON * (m as f64).sqrt();

    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = ZERO;
                for r in 0..m {
                    let x = work[(r, p)];
                    let y = work[(r, q)];
                    alpha += x.norm_sqr();
                    beta += y.norm_sqr();
                    gamma += x.conj() * y;
                }
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for r in 0..m {
                    let x = work[(r, p)];
                    let y = work[(r, q)] * phase.conj();
                    work[(r, p)] = x * cs - y * sn;
                    work[(r, q)] = (x * sn + y * cs) * phase;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut values: Vec<f64> = (0..n).map(|j| work.column(j).norm()).collect();
    values.sort_by(|x, y| y.total_cmp(x));
    values
}

/// Dense matrix exponential `exp(scale * a)` by scaling and squaring with a
/// degree-13 Padé approximant.
pub fn expm(a: &CMatrix, scale: f64) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expm needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !scale.is_finite() || a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let a = a * c(scale, 0.0);

    const THETA_13: f64 = 5.371_920_351_148_152;
    const B: [f64; 14] = [
        64_764_752_532_480_000.0,
        32_382_376_266_240_000.0,
        7_771_770_303_897_600.0,
        1_187_353_796_428_800.0,
        129_060_195_264_000.0,
        10_559_470_521_600.0,
        670_442_572_800.0,
        33_522_128_640.0,
        1_323_241_920.0,
        40_840_800.0,
        960_960.0,
        16_380.0,
        182.0,
        1.0,
    ];

    let norm = one_norm(&a);
    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * c(0.5f64.powi(squarings), 0.0);

    let id = CMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| c(B[k], 0.0);

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::Numerical("singular Padé denominator in expm".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(r)
}

/// Column-stacking vectorization, `vec(rho)[i + n*j] = rho[(i, j)]`.
pub fn vectorize(rho: &CMatrix) -> CVector {
    CVector::from_column_slice(rho.as_slice())
}

pub fn unvectorize(v: &CVector, n: usize) -> CMatrix {
    CMatrix::from_column_slice(n, n, v.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn expm_zero_is_identity() {
        let z = CMatrix::zeros(4, 4);
        let e = expm(&z, 1.0).unwrap();
        assert!(max_abs_diff(&e, &CMatrix::identity(4, 4)) < 1e-15);
    }

    #[test]
    fn expm_diagonal_phases() {
        let phis = [0.3, -1.7, 2.9, 12.0];
        let d = CMatrix::from_diagonal(&CVector::from_iterator(4, phis.iter().map(|&p| c(0.0, p))));
        let e = expm(&d, 1.0).unwrap();
        for (k, &p) in phis.iter().enumerate() {
            assert_abs_diff_eq!(e[(k, k)].re, p.cos(), epsilon = 1e-13);
            assert_abs_diff_eq!(e[(k, k)].im, p.sin(), epsilon = 1e-13);
        }
    }

    #[test]
    fn expm_matches_nalgebra_reference() {
        let a = CMatrix::from_fn(5, 5, |i, j| c((i as f64 - j as f64) * 0.7, (i * j) as f64 * 0.13));
        let mine = expm(&a, 1.3).unwrap();
        let theirs = (&a * c(1.3, 0.0)).exp();
        let scale = one_norm(&theirs);
        assert!(max_abs_diff(&mine, &theirs) / scale < 1e-12);
    }

    #[test]
    fn expm_rejects_non_finite() {
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 1)] = c(f64::NAN, 0.0);
        assert!(matches!(expm(&a, 1.0), Err(Error::NonFinite)));
    }

    #[test]
    fn jacobi_matches_nalgebra_svd() {
        let a = CMatrix::from_fn(4, 6, |i, j| c((i + 2 * j) as f64 % 5.0 - 2.0, (i * j) as f64 * 0.1));
        let mine = singular_values(&a);
        let mut theirs: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
        theirs.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in mine.iter().zip(theirs.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobi_resolves_graded_singular_values() {
        // diag(1, 1e-20) rotated on the left by a unitary: the small value
        // must survive with relative accuracy.
        let (cs, sn) = (0.6, 0.8);
        let u = CMatrix::from_row_slice(2, 2, &[c(cs, 0.0), c(-sn, 0.0), c(sn, 0.0), c(cs, 0.0)]);
        let d = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(1e-20, 0.0)]);
        let sv = singular_values(&(u * d));
        assert_abs_diff_eq!(sv[0], 1.0, epsilon = 1e-15);
        assert!((sv[1] / 1e-20 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hermitian_eigen_sorted() {
        let a = CMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let (vals, vecs) = hermitian_eigen(&a);
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], 3.0, epsilon = 1e-14);
        let recon = &vecs * CMatrix::from_diagonal(&CVector::from_iterator(2, vals.iter().map(|&v| c(v, 0.0)))) * vecs.adjoint();
        assert!(max_abs_diff(&recon, &a) < 1e-13);
    }

    #[test]
    fn vectorize_round_trip() {
        let a = CMatrix::from_fn(3, 3, |i, j| c(i as f64, j as f64));
        let v = vectorize(&a);
        assert_eq!(v[1], a[(1, 0)]);
        assert_eq!(unvectorize(&v, 3), a);
    }
}

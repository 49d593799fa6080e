//! Dense linear-algebra kernels.
//!
//! Thin contracts over `nalgebra`: every routine checks its precondition and
//! verifies its post-condition before returning, so callers never see a
//! silently inaccurate factorization.

use nalgebra::{Cholesky, DMatrix, DVector, Schur, SymmetricEigen, LU};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::numerics;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

const EIGEN_MAX_ITER: usize = 10_000;

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Unitary; column `k` belongs to `values[k]`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// `V f(diag(lambda)) V^H` for a scalar function applied to the spectrum.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            for r in 0..d {
                scaled[(r, k)] *= w;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

pub fn max_abs_c(a: &CMatrix) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

pub fn max_abs_r(a: &RMatrix) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Max entrywise `|A - A^H|`.
pub fn hermitian_deviation(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn ensure_square(rows: usize, cols: usize) -> Result<()> {
    if rows != cols {
        return Err(Error::DimensionMismatch {
            expected: rows,
            found: cols,
        });
    }
    Ok(())
}

pub fn ensure_hermitian(a: &CMatrix) -> Result<()> {
    ensure_square(a.nrows(), a.ncols())?;
    let tolerance = numerics().hermitian_tol;
    let deviation = hermitian_deviation(a);
    if deviation > tolerance || !deviation.is_finite() {
        return Err(Error::NotHermitian {
            deviation,
            tolerance,
        });
    }
    Ok(())
}

/// `Tr[A B]` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        for k in 0..n {
            acc += a[(j, k)] * b[(k, j)];
        }
    }
    acc
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn hermitian_eigendecomposition(a: &CMatrix) -> Result<HermitianEigen> {
    ensure_hermitian(a)?;
    let n = a.nrows();
    // Symmetrize so the solver sees an exactly Hermitian input.
    let sym = (a + a.adjoint()).map(|z| z * 0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::ConvergenceFailure { dim: n })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }

    let tol = numerics().residual_tol;
    let scale = max_abs_c(a).max(1.0);
    let unitarity = max_abs_c(&(vectors.adjoint() * &vectors - CMatrix::identity(n, n)));
    let diag = CMatrix::from_diagonal(&DVector::from_iterator(
        n,
        values.iter().map(|&v| Complex64::new(v, 0.0)),
    ));
    let residual = max_abs_c(&(a * &vectors - &vectors * diag)) / scale;
    if unitarity > tol || residual > tol {
        return Err(Error::ConvergenceFailure { dim: n });
    }
    Ok(HermitianEigen { values, vectors })
}

/// Ascending eigenvalues of a real symmetric matrix.
pub fn symmetric_eigenvalues(a: &RMatrix) -> Result<Vec<f64>> {
    ensure_square(a.nrows(), a.ncols())?;
    let n = a.nrows();
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::ConvergenceFailure { dim: n })?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

fn condition_estimate(g: &RMatrix) -> f64 {
    match symmetric_eigenvalues(g) {
        Ok(v) if !v.is_empty() => {
            let lo = v.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
            let hi = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            if lo == 0.0 {
                f64::INFINITY
            } else {
                hi / lo
            }
        }
        _ => f64::INFINITY,
    }
}

fn solve_residual_ok(g: &RMatrix, x: &RMatrix, b: &RMatrix) -> bool {
    let r = max_abs_r(&(g * x - b));
    r.is_finite() && r <= numerics().residual_tol * max_abs_r(b).max(f64::MIN_POSITIVE)
}

/// Solve `G X = B` for symmetric positive definite `G`.
///
/// One step of iterative refinement is applied; the residual contract is
/// `max |G X - B| < residual_tol * max |B|`.
pub fn solve_linear(g: &RMatrix, b: &RMatrix) -> Result<RMatrix> {
    ensure_square(g.nrows(), g.ncols())?;
    if b.nrows() != g.nrows() {
        return Err(Error::DimensionMismatch {
            expected: g.nrows(),
            found: b.nrows(),
        });
    }
    let chol = Cholesky::new(g.clone()).ok_or_else(|| Error::SingularMatrix {
        condition_estimate: condition_estimate(g),
    })?;
    let mut x = chol.solve(b);
    let r = b - g * &x;
    x += chol.solve(&r);
    if !solve_residual_ok(g, &x, b) {
        return Err(Error::SingularMatrix {
            condition_estimate: condition_estimate(g),
        });
    }
    Ok(x)
}

/// Solve `A X = B` for a general nonsingular square `A` (partial-pivot LU).
pub fn solve_general(a: &RMatrix, b: &RMatrix) -> Result<RMatrix> {
    ensure_square(a.nrows(), a.ncols())?;
    if b.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    let lu = LU::new(a.clone());
    let singular = || Error::SingularMatrix {
        condition_estimate: condition_estimate(&(a.transpose() * a)).sqrt(),
    };
    let mut x = lu.solve(b).ok_or_else(singular)?;
    let r = b - a * &x;
    x += lu.solve(&r).ok_or_else(singular)?;
    if max_abs_r(&x).is_nan() {
        return Err(singular());
    }
    Ok(x)
}

fn norm_1(m: &RMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(t M)` by scaling and squaring with a Pade approximant.
///
/// Fails with `OverflowRisk` when `||t M||_1` exceeds
/// [`NumericsSettings::expm_norm_limit`](crate::numerics::NumericsSettings).
pub fn real_matrix_exponential(m: &RMatrix, t: f64) -> Result<RMatrix> {
    ensure_square(m.nrows(), m.ncols())?;
    let n = m.nrows();
    if m.iter().any(|x| !x.is_finite()) || !t.is_finite() {
        return Err(Error::InvalidInput(
            "non-finite matrix entry or time".into(),
        ));
    }
    if t == 0.0 || m.iter().all(|&x| x == 0.0) {
        return Ok(RMatrix::identity(n, n));
    }
    let scaled = m * t;
    let norm = norm_1(&scaled);
    let limit = numerics().expm_norm_limit;
    if norm > limit {
        return Err(Error::OverflowRisk { norm, limit });
    }
    Ok(scaled.exp())
}

/// Eigenvalues of a general real square matrix (Schur form).
pub fn general_eigenvalues(m: &RMatrix) -> Result<Vec<Complex64>> {
    ensure_square(m.nrows(), m.ncols())?;
    let n = m.nrows();
    let schur = Schur::try_new(m.clone(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::ConvergenceFailure { dim: n })?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest singular value.
pub fn spectral_norm(m: &RMatrix) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// Dimension of the real coordinate space of `d x d` Hermitian matrices.
pub fn hermitian_coord_dim(d: usize) -> usize {
    d * d
}

/// Coordinates of a Hermitian matrix in a basis orthonormal under
/// `<A, B> = Tr[A B]`: diagonal entries first, then `sqrt(2) Re A_jk` and
/// `sqrt(2) Im A_jk` for `j < k` in row-major order.
pub fn hermitian_coords(a: &CMatrix) -> RVector {
    let d = a.nrows();
    let mut out = RVector::zeros(hermitian_coord_dim(d));
    for j in 0..d {
        out[j] = a[(j, j)].re;
    }
    let off = d * (d - 1) / 2;
    let mut p = 0;
    for j in 0..d {
        for k in (j + 1)..d {
            out[d + p] = std::f64::consts::SQRT_2 * a[(j, k)].re;
            out[d + off + p] = std::f64::consts::SQRT_2 * a[(j, k)].im;
            p += 1;
        }
    }
    out
}

/// Inverse of [`hermitian_coords`].
pub fn from_hermitian_coords(c: &[f64], d: usize) -> CMatrix {
    debug_assert_eq!(c.len(), hermitian_coord_dim(d));
    let mut a = CMatrix::zeros(d, d);
    for j in 0..d {
        a[(j, j)] = Complex64::new(c[j], 0.0);
    }
    let off = d * (d - 1) / 2;
    let mut p = 0;
    for j in 0..d {
        for k in (j + 1)..d {
            let z = Complex64::new(c[d + p], c[d + off + p]) / std::f64::consts::SQRT_2;
            a[(j, k)] = z;
            a[(k, j)] = z.conj();
            p += 1;
        }
    }
    a
}

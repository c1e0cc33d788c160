//! Dense symmetric matrices and the handful of spectral kernels the solver
//! needs: Jordan products, Lyapunov-operator solves, matrix square roots,
//! log-determinants and the Nesterov-Todd scaling point.
//!
//! Everything here is eigendecomposition- or Cholesky-based. Matrix orders in
//! this crate are small (tens), so no structure is exploited.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Relative pivot floor for the Cholesky positive-definiteness test:
/// every pivot must exceed `PD_PIVOT_RTOL * trace(X) / m`.
pub const PD_PIVOT_RTOL: f64 = 1e-14;

/// Residual bound for [`lyapunov_solve`], relative to `max(1, ||C||_F)`.
pub const LYAPUNOV_RTOL: f64 = 1e-10;

/// Reconstruction bound for [`EigDecomp`], relative to `||A||_F`.
pub const EIG_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected order {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("matrix is not positive definite (lambda_min = {lambda_min:e})")]
    NotPositiveDefinite { lambda_min: f64 },
    #[error("non-finite entry in matrix")]
    NonFinite,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
}

/// A dense real symmetric matrix.
///
/// Symmetry is enforced at construction (inputs are averaged with their
/// transpose) and preserved by every operation exposed on the type.
#[derive(Clone, PartialEq)]
pub struct SymMat(DMatrix<f64>);

impl fmt::Debug for SymMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMat{}", self.0)
    }
}

impl SymMat {
    pub fn zeros(m: usize) -> Self {
        SymMat(DMatrix::zeros(m, m))
    }

    pub fn identity(m: usize) -> Self {
        SymMat(DMatrix::identity(m, m))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMat(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Builds a matrix from a function evaluated on the upper triangle
    /// (`i <= j`); the lower triangle is mirrored.
    pub fn from_upper_fn(m: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = f(i, j);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        SymMat(a)
    }

    /// Wraps a square matrix, replacing it by `(A + A^T) / 2`.
    pub fn from_matrix(a: DMatrix<f64>) -> Result<Self, LinalgError> {
        if a.nrows() != a.ncols() {
            return Err(LinalgError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self::symmetrize(a))
    }

    /// `(A + A^T) / 2` without the finiteness check. Internal use on products
    /// of finite symmetric matrices.
    pub(crate) fn symmetrize(a: DMatrix<f64>) -> Self {
        let t = a.transpose();
        SymMat((a + t) * 0.5)
    }

    /// Builds a matrix from its upper triangle listed row by row:
    /// `(0,0), (0,1), .., (0,m-1), (1,1), .., (m-1,m-1)`.
    pub fn from_upper_row_major(m: usize, upper: &[f64]) -> Result<Self, LinalgError> {
        let expected = m * (m + 1) / 2;
        if upper.len() != expected {
            return Err(LinalgError::Dimension {
                expected,
                found: upper.len(),
            });
        }
        if upper.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let mut it = upper.iter();
        Ok(Self::from_upper_fn(m, |_, _| *it.next().unwrap()))
    }

    pub fn to_upper_row_major(&self) -> Vec<f64> {
        let m = self.order();
        let mut out = Vec::with_capacity(m * (m + 1) / 2);
        for i in 0..m {
            for j in i..m {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Trace inner product `X • Y = Tr(XY)`.
    pub fn dot(&self, other: &SymMat) -> f64 {
        debug_assert_eq!(self.order(), other.order());
        self.0.dot(&other.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &SymMat) -> SymMat {
        SymMat(&self.0 + &other.0 * alpha)
    }

    /// Congruence `P X P^T` for a square (not necessarily symmetric) `P`.
    pub fn congruence(&self, p: &DMatrix<f64>) -> SymMat {
        Self::symmetrize(p * &self.0 * p.transpose())
    }

    /// Congruence `P^T X P`.
    pub fn congruence_t(&self, p: &DMatrix<f64>) -> SymMat {
        Self::symmetrize(p.transpose() * &self.0 * p)
    }

    /// Symmetric eigendecomposition with ascending eigenvalues.
    pub fn eig(&self) -> EigDecomp {
        let SymmetricEigen {
            eigenvalues,
            eigenvectors,
        } = SymmetricEigen::new(self.0.clone());
        let m = self.order();
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
        let values = DVector::from_iterator(m, idx.iter().map(|&k| eigenvalues[k]));
        let vectors = DMatrix::from_fn(m, m, |i, j| eigenvectors[(i, idx[j])]);
        EigDecomp { values, vectors }
    }

    pub fn lambda_min(&self) -> f64 {
        self.eig().values[0]
    }

    /// Cholesky factor `L` (lower, `X = L L^T`) if `X` passes the
    /// positive-definiteness test.
    pub fn cholesky(&self) -> Option<DMatrix<f64>> {
        cholesky_with_tol(self, PD_PIVOT_RTOL)
    }

    pub fn is_pd(&self) -> bool {
        self.cholesky().is_some()
    }

    fn check_order(&self, other: &SymMat) -> Result<(), LinalgError> {
        if self.order() != other.order() {
            return Err(LinalgError::Dimension {
                expected: self.order(),
                found: other.order(),
            });
        }
        Ok(())
    }
}

/// Cholesky test with a configurable relative pivot floor.
pub fn cholesky_with_tol(x: &SymMat, pivot_rtol: f64) -> Option<DMatrix<f64>> {
    let m = x.order();
    if m == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let tr = x.trace();
    if !(tr > 0.0) {
        return None;
    }
    let floor = pivot_rtol * tr / m as f64;
    let chol = nalgebra::Cholesky::new(x.0.clone())?;
    let l = chol.unpack();
    if (0..m).all(|i| l[(i, i)] * l[(i, i)] > floor) {
        Some(l)
    } else {
        None
    }
}

impl Add for &SymMat {
    type Output = SymMat;
    fn add(self, rhs: &SymMat) -> SymMat {
        SymMat(&self.0 + &rhs.0)
    }
}

impl Sub for &SymMat {
    type Output = SymMat;
    fn sub(self, rhs: &SymMat) -> SymMat {
        SymMat(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &SymMat {
    type Output = SymMat;
    fn mul(self, rhs: f64) -> SymMat {
        SymMat(&self.0 * rhs)
    }
}

impl Neg for &SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        SymMat(-&self.0)
    }
}

impl Serialize for SymMat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_upper_row_major().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let upper = Vec::<f64>::deserialize(d)?;
        // m(m+1)/2 = len
        let m = (((8 * upper.len() + 1) as f64).sqrt() as usize - 1) / 2;
        SymMat::from_upper_row_major(m, &upper).map_err(serde::de::Error::custom)
    }
}

/// Eigendecomposition `A = Q diag(lambda) Q^T`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigDecomp {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigDecomp {
    pub fn reconstruct(&self) -> SymMat {
        self.map(|l| l)
    }

    /// Spectral function `Q diag(f(lambda)) Q^T`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMat {
        let q = &self.vectors;
        let mut scaled = q.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        SymMat::symmetrize(scaled * q.transpose())
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }
}

/// Jordan product `(XY + YX) / 2`.
pub fn jordan(x: &SymMat, y: &SymMat) -> Result<SymMat, LinalgError> {
    x.check_order(y)?;
    Ok(SymMat::symmetrize(&x.0 * &y.0))
}

fn require_pd(eig: &EigDecomp) -> Result<(), LinalgError> {
    let lambda_min = eig.min();
    if lambda_min > 0.0 {
        Ok(())
    } else {
        Err(LinalgError::NotPositiveDefinite { lambda_min })
    }
}

/// Inverse of the Lyapunov operator `Z -> X∘Z` for a fixed `X ≻ 0`, reusable
/// across many right-hand sides.
#[derive(Debug, Clone)]
pub struct LyapunovSolver {
    eig: EigDecomp,
}

impl LyapunovSolver {
    pub fn new(x: &SymMat) -> Result<Self, LinalgError> {
        let eig = x.eig();
        require_pd(&eig)?;
        Ok(Self { eig })
    }

    pub fn order(&self) -> usize {
        self.eig.values.len()
    }

    pub fn eig(&self) -> &EigDecomp {
        &self.eig
    }

    /// Solves `X∘Z = C` for `Z`.
    pub fn solve(&self, c: &SymMat) -> Result<SymMat, LinalgError> {
        if c.order() != self.order() {
            return Err(LinalgError::Dimension {
                expected: self.order(),
                found: c.order(),
            });
        }
        let q = &self.eig.vectors;
        let mut hat = self.to_eigenbasis(c);
        self.divide_in_eigenbasis(&mut hat);
        Ok(SymMat::symmetrize(q * hat * q.transpose()))
    }

    /// `Q^T C Q`.
    pub(crate) fn to_eigenbasis(&self, c: &SymMat) -> DMatrix<f64> {
        let q = &self.eig.vectors;
        q.transpose() * &c.0 * q
    }

    /// Elementwise `Z_ij = 2 C_ij / (lambda_i + lambda_j)` in the eigenbasis.
    pub(crate) fn divide_in_eigenbasis(&self, hat: &mut DMatrix<f64>) {
        let lam = &self.eig.values;
        let m = lam.len();
        for j in 0..m {
            for i in 0..m {
                hat[(i, j)] *= 2.0 / (lam[i] + lam[j]);
            }
        }
    }
}

/// Unique `Z` with `X∘Z = C` for `X ≻ 0`.
pub fn lyapunov_solve(x: &SymMat, c: &SymMat) -> Result<SymMat, LinalgError> {
    x.check_order(c)?;
    LyapunovSolver::new(x)?.solve(c)
}

/// Principal square root of a positive definite matrix.
pub fn sqrt_pd(x: &SymMat) -> Result<SymMat, LinalgError> {
    let eig = x.eig();
    require_pd(&eig)?;
    Ok(eig.map(f64::sqrt))
}

/// `X^{-1/2}` for `X ≻ 0`.
pub fn inv_sqrt_pd(x: &SymMat) -> Result<SymMat, LinalgError> {
    let eig = x.eig();
    require_pd(&eig)?;
    Ok(eig.map(|l| 1.0 / l.sqrt()))
}

/// Inverse of a positive definite matrix through its Cholesky factor.
pub fn inv_pd(x: &SymMat) -> Result<SymMat, LinalgError> {
    let chol =
        nalgebra::Cholesky::new(x.0.clone()).ok_or_else(|| LinalgError::NotPositiveDefinite {
            lambda_min: x.lambda_min(),
        })?;
    Ok(SymMat::symmetrize(chol.inverse()))
}

/// `log det X` via Cholesky, or `None` when `X` fails the PD test.
pub fn logdet_pd(x: &SymMat) -> Option<f64> {
    let l = x.cholesky()?;
    Some(2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Nesterov-Todd scaling point: the unique `W ≻ 0` with `W V W = F`,
/// `W = F^{1/2} (F^{1/2} V F^{1/2})^{-1/2} F^{1/2}`.
pub fn nt_scaling_point(f: &SymMat, v: &SymMat) -> Result<SymMat, LinalgError> {
    f.check_order(v)?;
    let f_half = sqrt_pd(f)?;
    let inner = v.congruence(f_half.as_matrix());
    let inner_inv_half = inv_sqrt_pd(&inner)?;
    Ok(inner_inv_half.congruence(f_half.as_matrix()))
}

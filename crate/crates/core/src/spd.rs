//! Symmetric positive-definite matrices and their spectral functions.
//!
//! Every matrix root in this crate goes through a full symmetric
//! eigendecomposition `A = Q diag(λ) Qᵀ`, after which `f(A) = Q diag(f(λ)) Qᵀ`.
//! Dimensions in the target workloads are small (tens of rows), so the exact
//! spectral route is preferred over Newton–Schulz style iterations.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check.
pub const SYM_TOL: f64 = 1e-9;

/// Smallest admissible eigenvalue, relative to the largest one, for
/// operations that invert.
pub const PD_FLOOR: f64 = 1e-12;

/// A symmetric positive-definite `d × d` matrix.
///
/// Construction through [`SpdMatrix::new`] checks symmetry (relative to the
/// Frobenius norm) and strict positivity of the smallest eigenvalue.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DMatrix<f64>", into = "DMatrix<f64>")]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        check_square(&matrix)?;
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = matrix.norm().max(1.0);
        let d = matrix.nrows();
        for i in 0..d {
            for j in (i + 1)..d {
                let gap = (matrix[(i, j)] - matrix[(j, i)]).abs();
                if gap > SYM_TOL * scale {
                    return Err(Error::NotSpd(format!(
                        "entries ({i},{j}) and ({j},{i}) differ by {gap:e}"
                    )));
                }
            }
        }
        let sym = symmetrize(&matrix);
        let min_eig = SymmetricEigen::new(sym.clone()).eigenvalues.min();
        if !(min_eig > 0.0) {
            return Err(Error::NotSpd(format!("smallest eigenvalue is {min_eig:e}")));
        }
        Ok(SpdMatrix(sym))
    }

    /// Wraps a matrix known to be symmetric positive definite by construction.
    /// The input is re-symmetrized but not otherwise checked.
    pub(crate) fn from_symmetric_unchecked(matrix: DMatrix<f64>) -> Self {
        SpdMatrix(symmetrize(&matrix))
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix(DMatrix::identity(dim, dim))
    }

    /// Diagonal matrix; every entry must be strictly positive.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if let Some(v) = diag.iter().find(|v| **v <= 0.0) {
            return Err(Error::NotSpd(format!("diagonal entry {v:e} is not positive")));
        }
        Ok(SpdMatrix(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag))))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        SpdMatrix::new(matrix_from_rows(rows)?)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Principal square root `B` with `B·B = A`.
    pub fn sqrt(&self) -> SpdMatrix {
        SpdMatrix(spectral_map(&self.0, |l| l.max(0.0).sqrt()))
    }

    /// Inverse principal square root `B` with `B·A·B = I`.
    pub fn inv_sqrt(&self) -> Result<SpdMatrix> {
        let eig = SymmetricEigen::new(self.0.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        let floor = PD_FLOOR * max.abs();
        if !(min > floor) {
            return Err(Error::IllConditioned { min_eig: min, floor });
        }
        Ok(SpdMatrix(recompose(&eig, |l| 1.0 / l.sqrt())))
    }

    /// `‖A − B‖_F`.
    pub fn frobenius_distance(&self, other: &SpdMatrix) -> f64 {
        (&self.0 - &other.0).norm()
    }
}

impl fmt::Debug for SpdMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("SpdMatrix").field(&self.to_rows()).finish()
    }
}

impl TryFrom<DMatrix<f64>> for SpdMatrix {
    type Error = Error;

    fn try_from(m: DMatrix<f64>) -> Result<Self> {
        SpdMatrix::new(m)
    }
}

impl From<SpdMatrix> for DMatrix<f64> {
    fn from(m: SpdMatrix) -> Self {
        m.0
    }
}

impl AsRef<DMatrix<f64>> for SpdMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

pub fn sqrt_spd(a: &SpdMatrix) -> SpdMatrix {
    a.sqrt()
}

pub fn inv_sqrt_spd(a: &SpdMatrix) -> Result<SpdMatrix> {
    a.inv_sqrt()
}

/// Symmetrizes `a` and, when its smallest eigenvalue is at or below
/// `PD_FLOOR · λ_max`, shifts the spectrum by `jitter + |λ_min|`.
pub fn ensure_spd(a: &DMatrix<f64>, jitter: f64) -> Result<SpdMatrix> {
    check_square(a)?;
    if a.iter().any(|v| !v.is_finite()) || !jitter.is_finite() {
        return Err(Error::NonFinite);
    }
    if !(jitter > 0.0) {
        return Err(Error::InvalidConfig(format!("jitter must be positive, got {jitter}")));
    }
    let sym = symmetrize(a);
    let eig = SymmetricEigen::new(sym.clone());
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    if min > PD_FLOOR * max.max(0.0) && min > 0.0 {
        return Ok(SpdMatrix(sym));
    }
    let shift = jitter + min.abs();
    let d = sym.nrows();
    Ok(SpdMatrix(sym + DMatrix::identity(d, d) * shift))
}

/// `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Applies `f` to the eigenvalues of the symmetric matrix `a`.
pub(crate) fn spectral_map(a: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    recompose(&SymmetricEigen::new(a.clone()), f)
}

fn recompose(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let q = &eig.eigenvectors;
    let mut scaled = q.clone();
    for (j, l) in eig.eigenvalues.iter().enumerate() {
        let fl = f(*l);
        scaled.column_mut(j).scale_mut(fl);
    }
    symmetrize(&(scaled * q.transpose()))
}

fn check_square(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if a.nrows() == 0 {
        return Err(Error::NotSpd("matrix is empty".into()));
    }
    Ok(())
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

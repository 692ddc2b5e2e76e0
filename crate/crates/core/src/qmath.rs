//! Dense complex linear algebra for small operators.
//!
//! Everything here works on square matrices of dimension at most a few tens.
//! Spectral work (PSD checks, trace norms, exponentials) goes through a single
//! Hermitian eigendecomposition backed by `nalgebra`.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance for structural checks (Hermiticity, unit trace, positivity, unitarity).
pub const STRUCTURAL_TOL: f64 = 1e-10;

/// Minimum Choi eigenvalue still counted as completely positive.
pub const CP_THRESHOLD: f64 = 1e-9;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense square complex matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix({}x{}) ", self.dim(), self.dim())?;
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl ComplexMatrix {
    pub fn from_dmatrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::InvalidMatrix(format!(
                "expected a nonempty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self(m))
    }

    /// Builds a matrix from `dim * dim` entries in row-major order.
    pub fn from_row_major(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Self::from_dmatrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: bad.len(),
            });
        }
        let flat: Vec<C64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(dim, &flat)
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| c(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn diag(values: &[f64]) -> Self {
        let v = DVector::from_iterator(values.len(), values.iter().map(|&x| c(x, 0.0)));
        Self(DMatrix::from_diagonal(&v))
    }

    /// Matrix unit `E_ij` with a single one at `(i, j)`.
    pub fn unit(dim: usize, i: usize, j: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(i, j)] = c(1.0, 0.0);
        Self(m)
    }

    /// `|u⟩⟨v|`
    pub fn outer(u: &DVector<C64>, v: &DVector<C64>) -> Self {
        Self(u * v.adjoint())
    }

    pub fn pauli_x() -> Self {
        Self::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).expect("static")
    }

    pub fn pauli_y() -> Self {
        Self::from_rows(&[
            vec![c(0.0, 0.0), c(0.0, -1.0)],
            vec![c(0.0, 1.0), c(0.0, 0.0)],
        ])
        .expect("static")
    }

    pub fn pauli_z() -> Self {
        Self::diag(&[1.0, -1.0])
    }

    pub fn hadamard() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_real_rows(&[&[s, s], &[s, -s]]).expect("static")
    }

    /// Phase gate `diag(1, i)`.
    pub fn phase_s() -> Self {
        Self::from_rows(&[
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 1.0)],
        ])
        .expect("static")
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        self.0
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn conjugate(&self) -> Self {
        Self(self.0.conjugate())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(c(s, 0.0))
    }

    /// Largest entrywise modulus of `self - other`. Panics on dimension mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "max_abs_diff on mismatched dims");
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.dim() == other.dim() && self.max_abs_diff(other) <= tol
    }

    /// Largest entrywise deviation from the conjugate transpose.
    pub fn hermiticity_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        (&self.adjoint() * self).approx_eq(&Self::identity(self.dim()), tol)
    }

    /// `(A + A†) / 2`
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * c(0.5, 0.0))
    }

    /// `U A U†`
    pub fn conjugate_by(&self, u: &Self) -> Self {
        Self(&u.0 * &self.0 * u.0.adjoint())
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

/// Kronecker product; entry `(i*db + k, j*db + l)` is `a[i,j] * b[k,l]`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix(a.0.kronecker(&b.0))
}

/// Which tensor factor survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    System,
    Environment,
}

pub fn partial_trace(
    m: &ComplexMatrix,
    dim_s: usize,
    dim_e: usize,
    keep: Keep,
) -> Result<ComplexMatrix> {
    if dim_s == 0 || dim_e == 0 || m.dim() != dim_s * dim_e {
        return Err(Error::Dimension {
            expected: dim_s * dim_e,
            found: m.dim(),
        });
    }
    let out = match keep {
        Keep::System => DMatrix::from_fn(dim_s, dim_s, |i, j| {
            (0..dim_e)
                .map(|k| m.0[(i * dim_e + k, j * dim_e + k)])
                .sum()
        }),
        Keep::Environment => DMatrix::from_fn(dim_e, dim_e, |k, l| {
            (0..dim_s)
                .map(|i| m.0[(i * dim_e + k, i * dim_e + l)])
                .sum()
        }),
    };
    Ok(ComplexMatrix(out))
}

/// Spectrum of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigenSystem {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in eigenvalue order.
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigenSystem {
    /// `V f(Λ) V†`
    pub fn map_spectrum(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let v = &self.eigenvectors.0;
        let d = DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&l| f(l)),
        );
        ComplexMatrix(v * DMatrix::from_diagonal(&d) * v.adjoint())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }
}

pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<HermitianEigenSystem> {
    let dev = m.hermiticity_deviation();
    if dev > STRUCTURAL_TOL {
        return Err(Error::ContractViolation(format!(
            "eigendecomposition requires a Hermitian matrix (deviation {dev:e})"
        )));
    }
    let eig = m.hermitian_part().0.symmetric_eigen();
    let mut order: Vec<usize> = (0..m.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.dim(), m.dim(), |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEigenSystem {
        eigenvalues,
        eigenvectors: ComplexMatrix(vectors),
    })
}

/// `exp(-i h t)` for Hermitian `h`.
pub fn matrix_exponential_unitary(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eigen(h)?;
    Ok(eig.map_spectrum(|l| C64::from_polar(1.0, -l * t)))
}

/// `|A| = V |Λ| V†` for Hermitian `A`.
pub fn matrix_abs(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(hermitian_eigen(m)?.map_spectrum(|l| c(l.abs(), 0.0)))
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    Ok(hermitian_eigen(m)?
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .sum())
}

/// Column-stacking vectorization: entry `(i, j)` lands at `j * dim + i`.
pub fn vectorize(m: &ComplexMatrix) -> DVector<C64> {
    DVector::from_column_slice(m.0.as_slice())
}

pub fn unvectorize(v: &DVector<C64>) -> Result<ComplexMatrix> {
    let dim = (v.len() as f64).sqrt().round() as usize;
    if dim * dim != v.len() {
        return Err(Error::Dimension {
            expected: dim * dim,
            found: v.len(),
        });
    }
    ComplexMatrix::from_dmatrix(DMatrix::from_column_slice(dim, dim, v.as_slice()))
}

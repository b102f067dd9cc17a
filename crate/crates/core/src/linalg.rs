//! Dense symmetric matrices and their spectra.
//!
//! `SymMatrix` is the carrier for Euclidean Hessians, Riemannian Hessians in
//! chart coordinates, and the gradient-correction matrix of the half-space
//! model. Symmetry is enforced exactly on construction so that downstream
//! eigen-decompositions never see a skew part.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { inner: DMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Self { inner: DMatrix::identity(n, n) }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self { inner: DMatrix::from_diagonal(&DVector::from_column_slice(d)) }
    }

    /// Builds from row-major entries; rejects any asymmetry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Argument("matrix rows must all have length N".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::from_matrix(m)
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Argument(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols())));
        }
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::Argument(format!(
                        "matrix not symmetric at ({i},{j}): {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        Ok(Self { inner: m })
    }

    /// Builds from the upper triangle of `f(i, j)`, mirrored.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self { inner: m }
    }

    /// Symmetric part `(m + mᵀ)/2` of an arbitrary square matrix.
    pub fn symmetrize(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        Self::from_fn(n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { inner: &self.inner * s }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { inner: &self.inner + &other.inner }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { inner: &self.inner - &other.inner }
    }

    pub fn neg(&self) -> Self {
        Self { inner: -&self.inner }
    }

    /// `v ᵀ M v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += v[i] * self.inner[(i, j)] * v[j];
            }
        }
        s
    }

    pub fn eigenvalues(&self) -> Spectrum {
        let mut vals: Vec<f64> = SymmetricEigen::new(self.inner.clone()).eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        Spectrum { eigenvalues: vals }
    }

    /// Eigenvalues in ascending order with matching orthonormal eigenvectors
    /// stored as the columns of the returned matrix.
    pub fn eigen_decomposition(&self) -> (Spectrum, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.inner.clone());
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vecs = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        (Spectrum { eigenvalues: vals }, vecs)
    }
}

/// Eigenvalues of a symmetric matrix, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
}

impl Spectrum {
    /// Sorts the given values; callers may pass any order.
    pub fn from_unsorted(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Self { eigenvalues: values }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Contract-level entry point: spectrum of a symmetric matrix.
pub fn eigenvalues(m: &SymMatrix) -> Spectrum {
    m.eigenvalues()
}

/// Determinant by LU factorization.
pub fn determinant(m: &DMatrix<f64>) -> f64 {
    m.clone().lu().determinant()
}

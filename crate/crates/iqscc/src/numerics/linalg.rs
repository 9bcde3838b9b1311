//! Hermitian matrices, solves, and principal eigenpairs over complex vectors.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::NumericsError;

/// Complex column vector. Constructors in this crate guarantee dimension > 0.
pub type ComplexVector = DVector<Complex64>;

/// A complex Hermitian matrix with an optional positive-semidefiniteness tag.
///
/// Hermitian symmetry (entry(i,j) = conj(entry(j,i)) within 1e-12 absolute)
/// is validated on construction through [`HermitianMatrix::new`]; builders
/// that produce Hermitian results by construction skip the check and
/// symmetrize away floating-point residue instead.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: DMatrix<Complex64>,
    psd: bool,
}

impl HermitianMatrix {
    /// Validate Hermitian symmetry and wrap. The PSD flag starts unset.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self, NumericsError> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(NumericsError::DimensionMismatch(format!(
                "expected square nonempty matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut max_asym = 0.0f64;
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                let d = (m[(i, j)] - m[(j, i)].conj()).norm();
                if d > max_asym {
                    max_asym = d;
                }
            }
        }
        if max_asym > 1e-12 {
            return Err(NumericsError::NotHermitian(max_asym));
        }
        Ok(Self { m: symmetrize(m), psd: false })
    }

    /// Zero matrix, trivially PSD.
    pub fn zeros(n: usize) -> Self {
        Self { m: DMatrix::zeros(n, n), psd: true }
    }

    /// `s * I`, PSD when s >= 0.
    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self {
            m: DMatrix::from_diagonal_element(n, n, Complex64::new(s, 0.0)),
            psd: s >= 0.0,
        }
    }

    /// Rank-one `scale * v v^H`, PSD when scale >= 0.
    pub fn from_outer(v: &ComplexVector, scale: f64) -> Self {
        let m = (v * v.adjoint()).scale(scale);
        Self { m: symmetrize(m), psd: scale >= 0.0 }
    }

    /// Wrap a product known to be Hermitian up to floating-point residue
    /// (e.g. `B V B^H` with V Hermitian); symmetrizes without the 1e-12 check.
    pub fn from_congruence(m: DMatrix<Complex64>, psd: bool) -> Self {
        Self { m: symmetrize(m), psd }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.m
    }

    /// Trace; real for a Hermitian matrix.
    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    /// `Re(v^H M v)` — exact value of the (real) quadratic form.
    pub fn quadratic_form(&self, v: &ComplexVector) -> f64 {
        (v.adjoint() * &self.m * v)[(0, 0)].re
    }

    /// Elementwise sum; PSD flag survives only if both operands carry it.
    pub fn add(&self, other: &Self) -> Self {
        Self { m: &self.m + &other.m, psd: self.psd && other.psd }
    }

    /// `self + s * I`.
    pub fn add_scaled_identity(&self, s: f64) -> Self {
        let mut m = self.m.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += Complex64::new(s, 0.0);
        }
        Self { m, psd: self.psd && s >= 0.0 }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: self.m.scale(s), psd: self.psd && s >= 0.0 }
    }

    /// Whether this value was tagged PSD on construction.
    pub fn is_psd_tagged(&self) -> bool {
        self.psd
    }

    /// Eigenvalue check of the PSD tag: smallest eigenvalue must be
    /// >= -1e-9 x the largest eigenvalue magnitude.
    pub fn psd_within_tolerance(&self) -> bool {
        let eigs = self.m.clone().symmetric_eigen().eigenvalues;
        let max_abs = eigs.iter().fold(0.0f64, |acc, &e| acc.max(e.abs()));
        let min = eigs.iter().fold(f64::INFINITY, |acc, &e| acc.min(e));
        min >= -1e-9 * max_abs
    }

    /// Eigenvalues sorted descending.
    pub fn eigenvalues_desc(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| b.partial_cmp(a).unwrap());
        e
    }
}

fn symmetrize(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let adj = m.adjoint();
    let mut s = (m + adj).scale(0.5);
    for i in 0..s.nrows() {
        s[(i, i)] = Complex64::new(s[(i, i)].re, 0.0);
    }
    s
}

/// Cholesky factorization that actually certifies positive definiteness:
/// the complex-field factorization alone would happily take complex square
/// roots of negative pivots, so the factor's diagonal is checked to be
/// (numerically) real and positive.
pub(crate) fn cholesky_pd(
    m: DMatrix<Complex64>,
) -> Option<nalgebra::Cholesky<Complex64, nalgebra::Dyn>> {
    let n = m.nrows();
    let chol = m.cholesky()?;
    let l = chol.l_dirty();
    for i in 0..n {
        let d = l[(i, i)];
        if !(d.re > 0.0) || d.im.abs() > 1e-8 * d.re {
            return None;
        }
    }
    Some(chol)
}

/// Solve `M x = b` for Hermitian positive-definite M via the Cholesky
/// factorization (diagonal pivots, no permutation — the model matrices all
/// include a `sigma_n^2 I` term and stay well conditioned).
pub fn hermitian_solve(m: &HermitianMatrix, b: &ComplexVector) -> Result<ComplexVector, NumericsError> {
    if b.len() != m.dim() {
        return Err(NumericsError::DimensionMismatch(format!(
            "matrix dim {} vs vector dim {}",
            m.dim(),
            b.len()
        )));
    }
    let chol = cholesky_pd(m.m.clone()).ok_or(NumericsError::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

/// Largest eigenvalue and a unit eigenvector of a Hermitian matrix.
pub fn principal_eigenpair(m: &HermitianMatrix) -> (f64, ComplexVector) {
    let eig = m.m.clone().symmetric_eigen();
    let mut best = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    let v = eig.eigenvectors.column(best).clone_owned();
    let norm = v.norm();
    (eig.eigenvalues[best], v.unscale(norm))
}

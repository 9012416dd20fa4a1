//! Dense complex-Hermitian linear algebra.
//!
//! Everything in the crate is expressed with [`CMatrix`] / [`CVector`]
//! (nalgebra matrices over `Complex64`). Bipartite spaces use the composite
//! index `i = iA * dim_b + iB` throughout.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;

/// Relative tolerance on `max|A - A†|` accepted before symmetrizing.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatlinError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not Hermitian: max|A - A^H| = {defect:e} exceeds {tol:e}")]
    NotHermitian { defect: f64, tol: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not positive definite (lambda_min = {lambda_min:e})")]
    NotPositiveDefinite { lambda_min: f64 },
    #[error("invalid bipartite dimensions {dim_a}x{dim_b}")]
    InvalidDims { dim_a: usize, dim_b: usize },
}

pub type Result<T> = std::result::Result<T, MatlinError>;

/// Dimensions of a bipartite space `A ⊗ B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BipartiteDims {
    pub dim_a: usize,
    pub dim_b: usize,
}

impl BipartiteDims {
    pub fn new(dim_a: usize, dim_b: usize) -> Result<Self> {
        if dim_a == 0 || dim_b == 0 {
            return Err(MatlinError::InvalidDims { dim_a, dim_b });
        }
        Ok(Self { dim_a, dim_b })
    }

    pub fn total(&self) -> usize {
        self.dim_a * self.dim_b
    }

    #[inline]
    pub fn index(&self, i_a: usize, i_b: usize) -> usize {
        i_a * self.dim_b + i_b
    }
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn diag(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { real(values[i]) } else { real(0.0) })
}

/// `|ψ⟩⟨ψ|`
pub fn outer(psi: &CVector) -> CMatrix {
    psi * psi.adjoint()
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

/// Hilbert-Schmidt inner product `Re Tr(A† B)`.
pub fn inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// `max_ij |A_ij|`
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn is_real(a: &CMatrix) -> bool {
    a.iter().all(|z| z.im == 0.0)
}

pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Hermitian flag check used for data invariants: `max|A - A†| ≤ 1e-12 · max(1, ‖A‖_F)`.
pub fn is_hermitian(a: &CMatrix) -> bool {
    a.is_square() && hermiticity_defect(a) <= 1e-12 * a.norm().max(1.0)
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

fn ensure_square(a: &CMatrix) -> Result<usize> {
    if !a.is_square() {
        return Err(MatlinError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    Ok(a.nrows())
}

/// Checks the Hermiticity pre-condition and returns the symmetrized matrix.
pub fn symmetrized(a: &CMatrix) -> Result<CMatrix> {
    ensure_square(a)?;
    if !is_finite(a) {
        return Err(MatlinError::NonFinite);
    }
    let defect = hermiticity_defect(a);
    let tol = HERMITIAN_TOL * a.norm();
    if defect > tol {
        return Err(MatlinError::NotHermitian { defect, tol });
    }
    Ok(hermitian_part(a))
}

/// Kronecker product, `(A⊗B)[(i·rB+k),(j·cB+l)] = A[i,j]·B[k,l]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `Tr_A(M)` for an operator on `A ⊗ B`.
pub fn partial_trace_a(m: &CMatrix, dims: BipartiteDims) -> Result<CMatrix> {
    let n = ensure_square(m)?;
    if n != dims.total() {
        return Err(MatlinError::DimensionMismatch { expected: dims.total(), found: n });
    }
    let db = dims.dim_b;
    let mut out = CMatrix::zeros(db, db);
    for ia in 0..dims.dim_a {
        let off = ia * db;
        out += m.view((off, off), (db, db));
    }
    Ok(out)
}

/// `Tr_A(|ψ⟩⟨ψ|)` without forming the `(dA·dB)²` outer product.
///
/// Zero amplitudes are skipped, so product-basis states such as the subset
/// states cost `O(Σ_iA nnz(row)²)`.
pub fn reduced_state(psi: &CVector, dims: BipartiteDims) -> Result<CMatrix> {
    if psi.len() != dims.total() {
        return Err(MatlinError::DimensionMismatch { expected: dims.total(), found: psi.len() });
    }
    let db = dims.dim_b;
    let mut out = CMatrix::zeros(db, db);
    let mut support: Vec<(usize, Complex64)> = Vec::with_capacity(db);
    for ia in 0..dims.dim_a {
        support.clear();
        support.extend(
            (0..db)
                .map(|ib| (ib, psi[ia * db + ib]))
                .filter(|(_, z)| *z != Complex64::new(0.0, 0.0)),
        );
        for &(i, zi) in &support {
            for &(j, zj) in &support {
                out[(i, j)] += zi * zj.conj();
            }
        }
    }
    Ok(out)
}

/// Hermitian eigendecomposition, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl Eigh {
    pub fn lambda_min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn lambda_max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `V · f(Λ) · V†`
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let scaled = CMatrix::from_fn(self.vectors.nrows(), self.vectors.ncols(), |i, j| {
            self.vectors[(i, j)] * f(self.values[j])
        });
        scaled * self.vectors.adjoint()
    }
}

fn sorted_pairs(values: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    order
}

fn real_part(a: &CMatrix) -> RMatrix {
    RMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].re)
}

pub fn eigh(a: &CMatrix) -> Result<Eigh> {
    let h = symmetrized(a)?;
    let n = h.nrows();
    if n == 0 {
        return Ok(Eigh { values: DVector::zeros(0), vectors: CMatrix::zeros(0, 0) });
    }
    // Real input takes the (cheaper) real symmetric path.
    let (values, vectors) = if is_real(&h) {
        let e = real_part(&h).symmetric_eigen();
        (e.eigenvalues, e.eigenvectors.map(real))
    } else {
        let e = h.symmetric_eigen();
        (e.eigenvalues, e.eigenvectors)
    };
    let order = sorted_pairs(&values);
    let values = DVector::from_iterator(n, order.iter().map(|&k| values[k]));
    let vectors = CMatrix::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    Ok(Eigh { values, vectors })
}

pub fn is_diagonal(a: &CMatrix) -> bool {
    a.is_square() && (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| i == j || a[(i, j)] == Complex64::new(0.0, 0.0)))
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(a: &CMatrix) -> Result<DVector<f64>> {
    let h = symmetrized(a)?;
    let mut values: Vec<f64> = if is_diagonal(&h) {
        h.diagonal().iter().map(|z| z.re).collect()
    } else if is_real(&h) {
        real_part(&h).symmetric_eigenvalues().iter().copied().collect()
    } else {
        h.symmetric_eigenvalues().iter().copied().collect()
    };
    values.sort_by(f64::total_cmp);
    Ok(DVector::from_vec(values))
}

pub fn lambda_min(a: &CMatrix) -> Result<f64> {
    Ok(eigvalsh(a)?.iter().copied().fold(f64::INFINITY, f64::min))
}

pub fn lambda_max(a: &CMatrix) -> Result<f64> {
    Ok(eigvalsh(a)?.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Outcome of [`psd_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsdStatus {
    CertifiedPsd { lambda_min: f64 },
    Violated { lambda_min: f64 },
}

impl PsdStatus {
    pub fn is_psd(&self) -> bool {
        matches!(self, PsdStatus::CertifiedPsd { .. })
    }

    pub fn lambda_min(&self) -> f64 {
        match *self {
            PsdStatus::CertifiedPsd { lambda_min } | PsdStatus::Violated { lambda_min } => lambda_min,
        }
    }
}

/// Default PSD tolerance `1e-9 · n · max(1, ‖A‖_F)`.
pub fn default_psd_tol(a: &CMatrix) -> f64 {
    1e-9 * a.nrows() as f64 * a.norm().max(1.0)
}

/// Certifies `λ_min(A) ≥ -tol`.
pub fn psd_check(a: &CMatrix, tol: f64) -> Result<PsdStatus> {
    let lambda_min = lambda_min(a)?;
    Ok(if lambda_min >= -tol {
        PsdStatus::CertifiedPsd { lambda_min }
    } else {
        PsdStatus::Violated { lambda_min }
    })
}

/// Inverse of a positive definite Hermitian matrix.
pub fn inverse_pd(a: &CMatrix) -> Result<CMatrix> {
    let h = symmetrized(a)?;
    let n = h.nrows();
    if is_diagonal(&h) {
        let d = h.diagonal();
        if d.iter().all(|z| z.re > 0.0) {
            return Ok(CMatrix::from_diagonal(&d.map(|z| real(1.0 / z.re))));
        }
    } else if is_real(&h) {
        if let Some(chol) = real_part(&h).cholesky() {
            return Ok(chol.inverse().map(real));
        }
    } else if let Some(chol) = h.clone().cholesky() {
        return Ok(hermitian_part(&chol.inverse()));
    }
    let lambda_min = if n == 0 { 0.0 } else { lambda_min(&h)? };
    Err(MatlinError::NotPositiveDefinite { lambda_min })
}

/// Block-diagonal direct sum `A ⊕ B`.
pub fn direct_sum(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = CMatrix::zeros(ra + rb, ca + cb);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((ra, ca), (rb, cb)).copy_from(b);
    out
}

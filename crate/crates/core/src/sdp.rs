//! Standard-form semidefinite programs over block-diagonal variables.
//!
//! ```text
//!   primal:  maximize ⟨C, X⟩  subject to ⟨A_i, X⟩ = b_i,  X ⪰ 0
//!   dual:    minimize ⟨b, y⟩  subject to Σ_i y_i A_i − C = S,  S ⪰ 0
//! ```
//!
//! `X`, `C`, `A_i` and `S` are block diagonal. Constraint maps are stored
//! sparsely per block since every program built by this crate (POVM
//! completeness, partial-trace equalities) touches only a few entries of each
//! block.
//!
//! Problems carry a [`Field`]: `Real` programs optimize over real symmetric
//! blocks and require real data, `Complex` programs optimize over Hermitian
//! blocks and are solved through the real embedding
//! `H ↦ [[Re H, −Im H], [Im H, Re H]]`.

mod ipm;

use std::collections::HashMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::matlin::{self, CMatrix};

pub use ipm::SolverOptions;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("block {block} has size {found}, expected {expected}")]
    BlockSize { block: usize, expected: usize, found: usize },
    #[error("block index {0} out of range")]
    NoSuchBlock(usize),
    #[error("{what} is not Hermitian (defect {defect:e})")]
    NotHermitian { what: String, defect: f64 },
    #[error("{0} has non-finite entries")]
    NonFinite(String),
    #[error("real program carries complex data in {0}")]
    ComplexDataInRealProgram(String),
    #[error("constraint maps are linearly dependent (near constraint {index})")]
    DependentConstraints { index: usize },
    #[error("numerical breakdown at iteration {iteration}: {reason}")]
    NumericalBreakdown { iteration: usize, reason: String },
    #[error(transparent)]
    Linalg(#[from] matlin::MatlinError),
}

pub type Result<T> = std::result::Result<T, SdpError>;

/// Scalar field of the matrix variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Real,
    Complex,
}

/// Hermitian matrix stored as the full list of its non-zero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitian {
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
    /// `k` when the matrix is `I_k ⊗ F` and the first `len/k` entries are `F`.
    kron: usize,
}

impl SparseHermitian {
    pub fn new(dim: usize) -> Self {
        Self { dim, entries: Vec::new(), kron: 1 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    /// Adds `v` at `(i, j)` and `conj(v)` at `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(i < self.dim && j < self.dim, "entry ({i},{j}) outside {0}x{0}", self.dim);
        self.kron = 1;
        if i == j {
            self.entries.push((i, i, Complex64::new(v.re, 0.0)));
        } else {
            self.entries.push((i, j, v));
            self.entries.push((j, i, v.conj()));
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::new(dim);
        for i in 0..dim {
            m.add(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_dense(a: &CMatrix) -> Self {
        let dim = a.nrows();
        let entries = (0..dim)
            .flat_map(|j| (0..dim).map(move |i| (i, j)))
            .filter_map(|(i, j)| {
                let v = a[(i, j)];
                (v != Complex64::new(0.0, 0.0)).then_some((i, j, v))
            })
            .collect();
        Self { dim, entries, kron: 1 }
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            out[(i, j)] += v;
        }
        out
    }

    /// `I_k ⊗ self`
    pub fn kron_identity(&self, k: usize) -> Self {
        let n = self.dim;
        let entries = (0..k)
            .flat_map(|a| self.entries.iter().map(move |&(i, j, v)| (a * n + i, a * n + j, v)))
            .collect();
        Self { dim: k * n, entries, kron: k * self.kron }
    }

    /// `(k, F)` with `self = I_k ⊗ F`, as far as construction recorded it.
    pub fn kron_factor(&self) -> (usize, &[(usize, usize, Complex64)]) {
        (self.kron, &self.entries[..self.entries.len() / self.kron])
    }

    /// `Re Tr(A† X)`
    pub fn inner(&self, x: &CMatrix) -> f64 {
        self.entries.iter().map(|&(i, j, v)| (v.conj() * x[(i, j)]).re).sum()
    }

    fn is_real(&self) -> bool {
        self.entries.iter().all(|e| e.2.im == 0.0)
    }
}

/// Orthogonal basis of the Hermitian (or real symmetric) `n × n` matrices:
/// `E_ii`, `E_ij + E_ji` and, for the complex field, `i(E_ij − E_ji)`.
///
/// `⟨F, M⟩` recovers `M_ii`, `2 Re M_ij` and `2 Im M_ij` respectively.
pub fn hermitian_basis(n: usize, field: Field) -> Vec<SparseHermitian> {
    let mut basis = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in i..n {
            let mut f = SparseHermitian::new(n);
            f.add(i, j, Complex64::new(1.0, 0.0));
            basis.push(f);
            if i != j && field == Field::Complex {
                let mut f = SparseHermitian::new(n);
                f.add(i, j, Complex64::new(0.0, 1.0));
                basis.push(f);
            }
        }
    }
    basis
}

/// One block's contribution to a constraint map.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTerm {
    pub block: usize,
    pub matrix: SparseHermitian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    field: Field,
    blocks: Vec<usize>,
    objective: Vec<CMatrix>,
    constraints: Vec<Vec<BlockTerm>>,
    rhs: Vec<f64>,
}

impl SdpProblem {
    pub fn builder(field: Field, blocks: Vec<usize>) -> SdpBuilder {
        let objective = blocks.iter().map(|&n| CMatrix::zeros(n, n)).collect();
        SdpBuilder {
            problem: SdpProblem { field, blocks, objective, constraints: Vec::new(), rhs: Vec::new() },
        }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn objective(&self) -> &[CMatrix] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Vec<BlockTerm>] {
        &self.constraints
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn num_constraints(&self) -> usize {
        self.rhs.len()
    }

    /// `⟨C, X⟩`
    pub fn objective_value(&self, x: &[CMatrix]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| matlin::inner(c, x)).sum()
    }

    /// `𝒜(X)`
    pub fn apply(&self, x: &[CMatrix]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|terms| terms.iter().map(|t| t.matrix.inner(&x[t.block])).sum())
            .collect()
    }

    /// `𝒜*(y) = Σ_i y_i A_i`
    pub fn adjoint(&self, y: &[f64]) -> Vec<CMatrix> {
        let mut out: Vec<CMatrix> = self.blocks.iter().map(|&n| CMatrix::zeros(n, n)).collect();
        for (terms, &yi) in self.constraints.iter().zip(y) {
            for t in terms {
                for &(i, j, v) in t.matrix.entries() {
                    out[t.block][(i, j)] += v * yi;
                }
            }
        }
        out
    }

    /// Dual slack `S = 𝒜*(y) − C`.
    pub fn dual_slack(&self, y: &[f64]) -> Vec<CMatrix> {
        self.adjoint(y).into_iter().zip(&self.objective).map(|(a, c)| a - c).collect()
    }

    fn validate(&self) -> Result<()> {
        for (k, (c, &n)) in self.objective.iter().zip(&self.blocks).enumerate() {
            if c.nrows() != n || c.ncols() != n {
                return Err(SdpError::BlockSize { block: k, expected: n, found: c.nrows() });
            }
            if !matlin::is_finite(c) {
                return Err(SdpError::NonFinite(format!("objective block {k}")));
            }
            let defect = matlin::hermiticity_defect(c);
            if defect > 1e-12 * c.norm().max(1.0) {
                return Err(SdpError::NotHermitian { what: format!("objective block {k}"), defect });
            }
            if self.field == Field::Real && !matlin::is_real(c) {
                return Err(SdpError::ComplexDataInRealProgram(format!("objective block {k}")));
            }
        }
        for (i, terms) in self.constraints.iter().enumerate() {
            for t in terms {
                let n = *self.blocks.get(t.block).ok_or(SdpError::NoSuchBlock(t.block))?;
                if t.matrix.dim() != n {
                    return Err(SdpError::BlockSize { block: t.block, expected: n, found: t.matrix.dim() });
                }
                if t.matrix.entries().iter().any(|e| !(e.2.re.is_finite() && e.2.im.is_finite())) {
                    return Err(SdpError::NonFinite(format!("constraint {i}")));
                }
                if self.field == Field::Real && !t.matrix.is_real() {
                    return Err(SdpError::ComplexDataInRealProgram(format!("constraint {i}")));
                }
            }
        }
        if let Some(i) = self.rhs.iter().position(|b| !b.is_finite()) {
            return Err(SdpError::NonFinite(format!("rhs entry {i}")));
        }
        self.check_rank()
    }

    /// Linear independence of the constraint maps via a Cholesky factorization
    /// of their Gram matrix.
    fn check_rank(&self) -> Result<()> {
        let m = self.rhs.len();
        if m == 0 {
            return Ok(());
        }
        let mut by_entry: HashMap<(usize, usize, usize), Vec<(usize, Complex64)>> = HashMap::new();
        for (i, terms) in self.constraints.iter().enumerate() {
            for t in terms {
                let dense: HashMap<(usize, usize), Complex64> =
                    t.matrix.entries().iter().fold(HashMap::new(), |mut acc, &(r, c, v)| {
                        *acc.entry((r, c)).or_default() += v;
                        acc
                    });
                for ((r, c), v) in dense {
                    by_entry.entry((t.block, r, c)).or_default().push((i, v));
                }
            }
        }
        let mut gram = nalgebra::DMatrix::<f64>::zeros(m, m);
        for list in by_entry.values() {
            for &(i, vi) in list {
                for &(j, vj) in list {
                    gram[(i, j)] += (vi.conj() * vj).re;
                }
            }
        }
        let scale = gram.diagonal().iter().copied().fold(0.0, f64::max);
        if let Some(i) = (0..m).find(|&i| gram[(i, i)] <= 1e-14 * scale) {
            return Err(SdpError::DependentConstraints { index: i });
        }
        match gram.cholesky() {
            Some(chol) => {
                let l = chol.l();
                let worst = (0..m)
                    .min_by(|&a, &b| (l[(a, a)] * l[(a, a)]).total_cmp(&(l[(b, b)] * l[(b, b)])))
                    .unwrap_or(0);
                if l[(worst, worst)] * l[(worst, worst)] <= 1e-12 * scale {
                    return Err(SdpError::DependentConstraints { index: worst });
                }
                Ok(())
            }
            None => Err(SdpError::DependentConstraints { index: m - 1 }),
        }
    }
}

pub struct SdpBuilder {
    problem: SdpProblem,
}

impl SdpBuilder {
    pub fn objective(mut self, block: usize, c: CMatrix) -> Self {
        assert!(block < self.problem.blocks.len(), "objective block {block} out of range");
        self.problem.objective[block] = c;
        self
    }

    pub fn constraint(mut self, terms: Vec<BlockTerm>, rhs: f64) -> Self {
        self.problem.constraints.push(terms);
        self.problem.rhs.push(rhs);
        self
    }

    pub fn push_constraint(&mut self, terms: Vec<BlockTerm>, rhs: f64) {
        self.problem.constraints.push(terms);
        self.problem.rhs.push(rhs);
    }

    pub fn build(self) -> Result<SdpProblem> {
        self.problem.validate()?;
        Ok(self.problem)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    MaxIters,
    InfeasibleDetected,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: Vec<CMatrix>,
    pub y: Vec<f64>,
    pub s: Vec<CMatrix>,
    pub primal_value: f64,
    pub dual_value: f64,
    /// `dual_value − primal_value`
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub status: SdpStatus,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

/// Solves `prob` to the relative duality-gap target with default options.
pub fn solve(prob: &SdpProblem, gap_target: f64) -> Result<SdpSolution> {
    solve_with(prob, &SolverOptions { gap_target, ..SolverOptions::default() })
}

pub fn solve_with(prob: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    ipm::solve(prob, opts)
}

/// Diagnostic output of [`verify_feasible_pair`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// `‖𝒜(X) − b‖₂`
    pub primal_residual: f64,
    /// `min_k λ_min(X_k)`
    pub primal_psd_margin: f64,
    /// `min_k λ_min(S_k)`, `S = 𝒜*(y) − C`
    pub dual_psd_margin: f64,
    /// `⟨b, y⟩ − ⟨C, X⟩`
    pub gap: f64,
    pub primal_ok: bool,
    pub dual_ok: bool,
}

/// Checks a primal/dual pair against `prob` using only matrix algebra.
///
/// Feasibility requires a primal residual of at most `1e-8·(1+‖b‖)` and PSD
/// margins of at least `-psd_tol` (default `1e-9`).
pub fn verify_feasible_pair(
    prob: &SdpProblem,
    x: &[CMatrix],
    y: &[f64],
    psd_tol: Option<f64>,
) -> Result<FeasibilityReport> {
    let tol = psd_tol.unwrap_or(1e-9);
    if x.len() != prob.blocks.len() {
        return Err(SdpError::BlockSize { block: x.len(), expected: prob.blocks.len(), found: x.len() });
    }
    for (k, (xk, &n)) in x.iter().zip(&prob.blocks).enumerate() {
        if xk.nrows() != n || xk.ncols() != n {
            return Err(SdpError::BlockSize { block: k, expected: n, found: xk.nrows() });
        }
    }
    let ax = prob.apply(x);
    let primal_residual = ax.iter().zip(&prob.rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let b_norm = prob.rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
    let primal_psd_margin = min_lambda(x)?;
    let dual_psd_margin = min_lambda(&prob.dual_slack(y))?;
    let dual_value: f64 = prob.rhs.iter().zip(y).map(|(b, y)| b * y).sum();
    let gap = dual_value - prob.objective_value(x);
    Ok(FeasibilityReport {
        primal_residual,
        primal_psd_margin,
        dual_psd_margin,
        gap,
        primal_ok: primal_residual <= 1e-8 * (1.0 + b_norm) && primal_psd_margin >= -tol,
        dual_ok: dual_psd_margin >= -tol,
    })
}

fn min_lambda(blocks: &[CMatrix]) -> Result<f64> {
    let mut worst = f64::INFINITY;
    for b in blocks {
        if b.nrows() > 0 {
            worst = worst.min(matlin::lambda_min(b)?);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests;

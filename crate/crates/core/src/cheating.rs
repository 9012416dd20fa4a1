//! Cheating probabilities of DRIC protocols.
//!
//! Bob's optimal cheating is minimum-error discrimination of the reduced
//! states `ρ_a` (uniform priors). Alice's is the SDP over `σ` on `B` and
//! `σ_a` on `A ⊗ B` with `Tr_A σ_a = σ`. Lower bounds come from explicit
//! strategies, upper bounds from dual certificates; the solver sits in
//! between.

use num_complex::Complex64;
use num_integer::binomial;
use thiserror::Error;

use crate::matlin::{self, CMatrix, CVector, MatlinError};
use crate::protocol::{self, DricProtocol, Origin, ProtocolError};
use crate::sdp::{self, BlockTerm, Field, SdpError, SdpProblem, SdpSolution, SdpStatus, SolverOptions, SparseHermitian};

/// Largest `dimB` for which Bob's SDP is solved.
pub const BOB_SOLVE_CAP: usize = 64;
/// Largest `dimA · dimB` for which Alice's SDP is solved.
pub const ALICE_SOLVE_CAP: usize = 576;
/// Largest `dimA · dimB` for which operator-form certificates are checked by
/// forming `I ⊗ Z_a − |ψ_a⟩⟨ψ_a|/D` explicitly.
pub const OPERATOR_CHECK_CAP: usize = 1024;
/// Default PSD tolerance for certificate verification.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Tolerance for POVM completeness and strategy consistency.
pub const STRATEGY_TOL: f64 = 1e-10;

/// Default regularization `ε = 1e-8 / D`, so the certified slack `ε·D` is `1e-8`.
pub fn default_eps(d: usize) -> f64 {
    1e-8 / d as f64
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheatError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Linalg(#[from] MatlinError),
    #[error("{what} dimension {dim} exceeds the cap {cap}")]
    DimensionCap { what: &'static str, dim: usize, cap: usize },
    #[error("ε must be positive, got {0}")]
    NonPositiveEps(f64),
    #[error("expected {expected} operators of size {size}, got {found}")]
    Shape { expected: usize, size: usize, found: String },
    #[error("violated: {constraint} (margin {margin:.3e})")]
    Violated { constraint: String, margin: f64 },
    #[error("Z_{index} is not positive definite (λ_min = {lambda_min:.3e})")]
    NotPositiveDefinite { index: usize, lambda_min: f64 },
}

pub type Result<T> = std::result::Result<T, CheatError>;

fn field_of(p: &DricProtocol) -> Field {
    if p.is_real() {
        Field::Real
    } else {
        Field::Complex
    }
}

fn check_shape(ops: &[CMatrix], expected: usize, size: usize) -> Result<()> {
    if ops.len() != expected || ops.iter().any(|m| m.shape() != (size, size)) {
        let found = ops.iter().map(|m| format!("{}x{}", m.nrows(), m.ncols())).collect::<Vec<_>>().join(",");
        return Err(CheatError::Shape { expected, size, found: format!("{} [{found}]", ops.len()) });
    }
    Ok(())
}

/// A POVM `{M_a}` on Bob's register; outcome `a` is his guess.
#[derive(Debug, Clone, PartialEq)]
pub struct BobStrategy {
    pub measurement: Vec<CMatrix>,
}

impl BobStrategy {
    /// `(1/D) Σ_a ⟨M_a, ρ_a⟩`
    pub fn value(&self, rhos: &[CMatrix]) -> f64 {
        let d = rhos.len() as f64;
        self.measurement.iter().zip(rhos).map(|(m, r)| matlin::inner(m, r)).sum::<f64>() / d
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let n = self.measurement.first().map_or(0, |m| m.nrows());
        check_shape(&self.measurement, self.measurement.len(), n)?;
        let total = self.measurement.iter().fold(CMatrix::zeros(n, n), |acc, m| acc + m);
        let defect = matlin::max_abs(&(total - matlin::identity(n)));
        if defect > tol {
            return Err(CheatError::Violated { constraint: "Σ_a M_a = I".into(), margin: -defect });
        }
        for (a, m) in self.measurement.iter().enumerate() {
            let lmin = matlin::lambda_min(m)?;
            if lmin < -tol {
                return Err(CheatError::Violated { constraint: format!("M_{} ⪰ 0", a + 1), margin: lmin });
            }
        }
        Ok(())
    }
}

/// A state on `A ⊗ B`, kept as a vector when pure.
#[derive(Debug, Clone, PartialEq)]
pub enum BipartiteState {
    Pure(CVector),
    Mixed(CMatrix),
}

impl BipartiteState {
    /// `⟨ψ|σ|ψ⟩`
    pub fn overlap(&self, psi: &CVector) -> f64 {
        match self {
            BipartiteState::Pure(phi) => phi.dotc(psi).norm_sqr(),
            BipartiteState::Mixed(m) => psi.dotc(&(m * psi)).re,
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            BipartiteState::Pure(phi) => phi.norm_squared(),
            BipartiteState::Mixed(m) => matlin::trace(m).re,
        }
    }

    pub fn reduced(&self, dims: matlin::BipartiteDims) -> std::result::Result<CMatrix, MatlinError> {
        match self {
            BipartiteState::Pure(phi) => matlin::reduced_state(phi, dims),
            BipartiteState::Mixed(m) => matlin::partial_trace_a(m, dims),
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            BipartiteState::Pure(phi) => matlin::outer(phi),
            BipartiteState::Mixed(m) => m.clone(),
        }
    }

    fn lambda_min(&self) -> std::result::Result<f64, MatlinError> {
        match self {
            BipartiteState::Pure(_) => Ok(0.0),
            BipartiteState::Mixed(m) => matlin::lambda_min(m),
        }
    }
}

/// Alice's cheating state: `σ` is what Bob holds after the first message,
/// `σ_a` the joint state after she reveals `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct AliceStrategy {
    pub sigma: CMatrix,
    pub sigma_a: Vec<BipartiteState>,
}

impl AliceStrategy {
    /// `(1/D) Σ_a ⟨σ_a, |ψ_a⟩⟨ψ_a|⟩`
    pub fn value(&self, p: &DricProtocol) -> f64 {
        let d = p.outcomes() as f64;
        self.sigma_a.iter().zip(p.states()).map(|(s, psi)| s.overlap(psi)).sum::<f64>() / d
    }

    pub fn check(&self, p: &DricProtocol, tol: f64) -> Result<()> {
        let violated = |constraint: String, margin: f64| Err(CheatError::Violated { constraint, margin });
        if self.sigma_a.len() != p.outcomes() {
            return Err(CheatError::Shape {
                expected: p.outcomes(),
                size: p.dims().total(),
                found: self.sigma_a.len().to_string(),
            });
        }
        let tr = matlin::trace(&self.sigma).re;
        if (tr - 1.0).abs() > tol {
            return violated("Tr σ = 1".into(), -(tr - 1.0).abs());
        }
        let lmin = matlin::lambda_min(&self.sigma)?;
        if lmin < -tol {
            return violated("σ ⪰ 0".into(), lmin);
        }
        for (a, s) in self.sigma_a.iter().enumerate() {
            let lmin = s.lambda_min()?;
            if lmin < -tol {
                return violated(format!("σ_{} ⪰ 0", a + 1), lmin);
            }
            let defect = matlin::max_abs(&(s.reduced(p.dims())? - &self.sigma));
            if defect > tol {
                return violated(format!("Tr_A σ_{} = σ", a + 1), -defect);
            }
        }
        Ok(())
    }
}

/// Feasible point of Bob's dual: `X ⪰ ρ_a / D` for all `a`, value `Tr X`.
#[derive(Debug, Clone, PartialEq)]
pub struct BobCertificate {
    pub x: CMatrix,
}

impl BobCertificate {
    pub fn value(&self) -> f64 {
        matlin::trace(&self.x).re
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CertificateForm {
    /// `s·I ⪰ Σ Z_a` and `I_A ⊗ Z_a ⪰ |ψ_a⟩⟨ψ_a| / D`.
    Operator,
    /// `s·I ⪰ Σ Z_a`, `Z_a ≻ 0` and `⟨Z_a⁻¹, ρ_a⟩ ≤ D`; `eps` is the
    /// regularization the certificate was built with.
    Inverse { eps: f64 },
}

/// Feasible point of Alice's dual, value `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct AliceCertificate {
    pub s: f64,
    pub z: Vec<CMatrix>,
    pub form: CertificateForm,
    /// Known excess of `s` over the value the construction targets.
    pub slack: f64,
}

impl AliceCertificate {
    pub fn value(&self) -> f64 {
        self.s
    }

    /// Same `s` and `Z_a`, checked in operator form.
    pub fn to_operator_form(&self) -> Self {
        Self { form: CertificateForm::Operator, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verification {
    /// Certified upper bound (`Tr X` or `s`).
    pub value: f64,
    /// Smallest slack over all checked constraints.
    pub worst_margin: f64,
}

/// Checks `X ⪰ ρ_a/D` for every `a` and returns `Tr X`.
pub fn verify_bob_certificate(p: &DricProtocol, cert: &BobCertificate, tol: f64) -> Result<Verification> {
    let d = p.outcomes() as f64;
    check_shape(std::slice::from_ref(&cert.x), 1, p.dims().dim_b)?;
    let mut worst = f64::INFINITY;
    for (a, rho) in protocol::reduced_states(p).iter().enumerate() {
        let margin = matlin::lambda_min(&(&cert.x - rho.unscale(d)))?;
        if margin < -tol {
            return Err(CheatError::Violated { constraint: format!("X ⪰ ρ_{}/D", a + 1), margin });
        }
        worst = worst.min(margin);
    }
    Ok(Verification { value: cert.value(), worst_margin: worst })
}

/// Checks Alice's dual constraints in the certificate's form and returns `s`.
pub fn verify_alice_certificate(p: &DricProtocol, cert: &AliceCertificate, tol: f64) -> Result<Verification> {
    let d = p.outcomes();
    let dims = p.dims();
    check_shape(&cert.z, d, dims.dim_b)?;
    let total = cert.z.iter().fold(CMatrix::zeros(dims.dim_b, dims.dim_b), |acc, z| acc + z);
    let mut worst = matlin::lambda_min(&(matlin::identity(dims.dim_b).scale(cert.s) - total))?;
    if worst < -tol {
        return Err(CheatError::Violated { constraint: "s·I ⪰ Σ_a Z_a".into(), margin: worst });
    }
    let operator = cert.form == CertificateForm::Operator;
    if operator && dims.total() <= OPERATOR_CHECK_CAP {
        let eye_a = matlin::identity(dims.dim_a);
        for (a, z) in cert.z.iter().enumerate() {
            let lhs = matlin::kron(&eye_a, z) - p.projector(a).unscale(d as f64);
            let margin = matlin::lambda_min(&lhs)?;
            if margin < -tol {
                return Err(CheatError::Violated { constraint: format!("I ⊗ Z_{} ⪰ |ψ_{0}⟩⟨ψ_{0}|/D", a + 1), margin });
            }
            worst = worst.min(margin);
        }
        return Ok(Verification { value: cert.s, worst_margin: worst });
    }
    // Inverse form. For positive definite Z_a this is equivalent to the
    // operator form, which is how large operator-form certificates are checked.
    let rhos = protocol::reduced_states(p);
    for (a, (z, rho)) in cert.z.iter().zip(&rhos).enumerate() {
        let inv = match matlin::inverse_pd(z) {
            Ok(inv) => inv,
            Err(MatlinError::NotPositiveDefinite { .. }) if operator => {
                return Err(CheatError::DimensionCap {
                    what: "operator-form check",
                    dim: dims.total(),
                    cap: OPERATOR_CHECK_CAP,
                });
            }
            Err(MatlinError::NotPositiveDefinite { lambda_min }) => {
                return Err(CheatError::NotPositiveDefinite { index: a + 1, lambda_min });
            }
            Err(e) => return Err(e.into()),
        };
        let margin = d as f64 - matlin::inner(&inv, rho);
        if margin < -tol * d as f64 {
            return Err(CheatError::Violated { constraint: format!("⟨Z_{}⁻¹, ρ_{0}⟩ ≤ D", a + 1), margin });
        }
        worst = worst.min(margin);
    }
    Ok(Verification { value: cert.s, worst_margin: worst })
}

/// `max Σ_a p_a ⟨M_a, ρ_a⟩` over POVMs `{M_a}`, one block per state.
pub fn discrimination_sdp(states: &[CMatrix], priors: &[f64]) -> Result<SdpProblem> {
    let n = states.first().map_or(0, |r| r.nrows());
    check_shape(states, priors.len(), n)?;
    let field = if states.iter().all(matlin::is_real) { Field::Real } else { Field::Complex };
    let mut builder = SdpProblem::builder(field, vec![n; states.len()]);
    for (k, (rho, &pk)) in states.iter().zip(priors).enumerate() {
        builder = builder.objective(k, rho.scale(pk));
    }
    for f in sdp::hermitian_basis(n, field) {
        let rhs = f.inner(&matlin::identity(n));
        let terms = (0..states.len()).map(|k| BlockTerm { block: k, matrix: f.clone() }).collect();
        builder.push_constraint(terms, rhs);
    }
    Ok(builder.build()?)
}

/// Bob's cheating SDP: discrimination of the `ρ_a` with uniform priors.
pub fn bob_sdp(p: &DricProtocol) -> Result<SdpProblem> {
    let dim = p.dims().dim_b;
    if dim > BOB_SOLVE_CAP {
        return Err(CheatError::DimensionCap { what: "Bob SDP", dim, cap: BOB_SOLVE_CAP });
    }
    let d = p.outcomes();
    discrimination_sdp(&protocol::reduced_states(p), &vec![1.0 / d as f64; d])
}

/// Alice's cheating SDP. Block 0 is `σ`, block `a` is `σ_a`; constraints are
/// `⟨I ⊗ F, σ_a⟩ − ⟨F, σ⟩ = 0` for a basis `F` of Hermitian operators on `B`
/// (grouped by `a`), then `Tr σ = 1`.
pub fn alice_sdp(p: &DricProtocol) -> Result<SdpProblem> {
    let dims = p.dims();
    if dims.total() > ALICE_SOLVE_CAP {
        return Err(CheatError::DimensionCap { what: "Alice SDP", dim: dims.total(), cap: ALICE_SOLVE_CAP });
    }
    let d = p.outcomes();
    let field = field_of(p);
    let mut blocks = vec![dims.dim_b];
    blocks.extend(std::iter::repeat_n(dims.total(), d));
    let mut builder = SdpProblem::builder(field, blocks);
    for a in 0..d {
        builder = builder.objective(a + 1, p.projector(a).unscale(d as f64));
    }
    let basis = sdp::hermitian_basis(dims.dim_b, field);
    for a in 0..d {
        for f in &basis {
            let mut neg = SparseHermitian::new(dims.dim_b);
            for &(i, j, v) in f.entries().iter().filter(|e| e.0 <= e.1) {
                neg.add(i, j, -v);
            }
            let terms = vec![
                BlockTerm { block: a + 1, matrix: f.kron_identity(dims.dim_a) },
                BlockTerm { block: 0, matrix: neg },
            ];
            builder.push_constraint(terms, 0.0);
        }
    }
    builder.push_constraint(vec![BlockTerm { block: 0, matrix: SparseHermitian::identity(dims.dim_b) }], 1.0);
    Ok(builder.build()?)
}

/// Solver output for one party, with extracted strategy and certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct Solved<S, C> {
    pub primal: f64,
    pub dual: f64,
    pub status: SdpStatus,
    pub iterations: usize,
    pub strategy: S,
    pub certificate: C,
}

pub fn solve_bob(p: &DricProtocol, opts: &SolverOptions) -> Result<Solved<BobStrategy, BobCertificate>> {
    let prob = bob_sdp(p)?;
    let sol = sdp::solve_with(&prob, opts)?;
    let x = prob.adjoint(&sol.y).swap_remove(0);
    Ok(solved(&sol, BobStrategy { measurement: sol.x.clone() }, BobCertificate { x }))
}

pub fn solve_alice(p: &DricProtocol, opts: &SolverOptions) -> Result<Solved<AliceStrategy, AliceCertificate>> {
    let prob = alice_sdp(p)?;
    let sol = sdp::solve_with(&prob, opts)?;
    let n = p.dims().dim_b;
    let basis = sdp::hermitian_basis(n, prob.field());
    let z = (0..p.outcomes())
        .map(|a| {
            basis.iter().zip(&sol.y[a * basis.len()..]).fold(CMatrix::zeros(n, n), |acc, (f, &y)| acc + f.to_dense().scale(y))
        })
        .collect();
    let s = *sol.y.last().expect("trace constraint");
    let strategy = AliceStrategy {
        sigma: sol.x[0].clone(),
        sigma_a: sol.x[1..].iter().cloned().map(BipartiteState::Mixed).collect(),
    };
    Ok(solved(&sol, strategy, AliceCertificate { s, z, form: CertificateForm::Operator, slack: 0.0 }))
}

fn solved<S, C>(sol: &SdpSolution, strategy: S, certificate: C) -> Solved<S, C> {
    Solved {
        primal: sol.primal_value,
        dual: sol.dual_value,
        status: sol.status,
        iterations: sol.iterations,
        strategy,
        certificate,
    }
}

fn subset_family(d: usize, m: usize) -> Result<(usize, Vec<Vec<usize>>)> {
    let n = protocol::subset_dimension(d, m)? as usize;
    Ok((n, protocol::subsets(d, m)))
}

fn indicator(family: &[Vec<usize>], a: usize, inside: f64, outside: f64) -> CMatrix {
    let diag: Vec<f64> = family.iter().map(|s| if s.contains(&a) { inside } else { outside }).collect();
    matlin::diag(&diag)
}

/// Measure `S` in the computational basis and guess uniformly within it:
/// `M_a = (1/m) Σ_{S ∋ a} |S⟩⟨S|`, value `1/m`.
pub fn subset_bob_strategy(d: usize, m: usize) -> Result<BobStrategy> {
    let (_, family) = subset_family(d, m)?;
    let measurement = (1..=d).map(|a| indicator(&family, a, 1.0 / m as f64, 0.0)).collect();
    Ok(BobStrategy { measurement })
}

/// `X = I / (D · C(D−1, m−1))`, value `1/m`.
pub fn subset_bob_certificate(d: usize, m: usize) -> Result<BobCertificate> {
    let (n, _) = subset_family(d, m)?;
    let c = binomial(d as u64 - 1, m as u64 - 1) as f64;
    Ok(BobCertificate { x: matlin::identity(n).unscale(d as f64 * c) })
}

/// Send half of `|T_m⟩ = C(D,m)^{-1/2} Σ_S |S⟩|S⟩` and reveal it for every
/// `a`; value `m/D`.
pub fn subset_alice_strategy(d: usize, m: usize) -> Result<AliceStrategy> {
    let (n, _) = subset_family(d, m)?;
    let dims = matlin::BipartiteDims::new(n, n)?;
    let amp = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
    let mut t = CVector::zeros(n * n);
    for s in 0..n {
        t[dims.index(s, s)] = amp;
    }
    Ok(AliceStrategy { sigma: matlin::identity(n).unscale(n as f64), sigma_a: vec![BipartiteState::Pure(t); d] })
}

/// `Z_a = (1/D) Σ_{S ∋ a} |S⟩⟨S| + ε Σ_{S ∌ a} |S⟩⟨S|`, `s = m/D + εD`.
pub fn subset_alice_certificate(d: usize, m: usize, eps: f64) -> Result<AliceCertificate> {
    if !(eps > 0.0) {
        return Err(CheatError::NonPositiveEps(eps));
    }
    let (_, family) = subset_family(d, m)?;
    let z = (1..=d).map(|a| indicator(&family, a, 1.0 / d as f64, eps)).collect();
    let slack = eps * d as f64;
    Ok(AliceCertificate { s: m as f64 / d as f64 + slack, z, form: CertificateForm::Inverse { eps }, slack })
}

/// Alice commits to one state `φ` for every `a`. The best such `φ` is the
/// top eigenvector of the Gram matrix mapped back through `Ψ = [ψ_1 … ψ_D]`,
/// with value `λ_max(G)/D`.
pub fn fixed_state_attack(p: &DricProtocol) -> Result<AliceStrategy> {
    let eig = matlin::eigh(&p.gram())?;
    let v = eig.vectors.column(p.outcomes() - 1);
    let mut phi = CVector::zeros(p.dims().total());
    for (a, psi) in p.states().iter().enumerate() {
        phi.axpy(v[a], psi, Complex64::new(1.0, 0.0));
    }
    let phi = phi.unscale(phi.norm());
    let sigma = matlin::reduced_state(&phi, p.dims())?;
    Ok(AliceStrategy { sigma, sigma_a: vec![BipartiteState::Pure(phi); p.outcomes()] })
}

/// Bob's strategy read off an Alice certificate: raise `Z_1` by
/// `s·I − Σ Z_a` and normalize `M_a = Z_a / s`. Its value is at least
/// `1/(s·D)` whenever the certificate is feasible.
pub fn kitaev_bob_strategy(cert: &AliceCertificate) -> BobStrategy {
    let n = cert.z.first().map_or(0, |z| z.nrows());
    let total = cert.z.iter().fold(CMatrix::zeros(n, n), |acc, z| acc + z);
    let mut z = cert.z.clone();
    if let Some(first) = z.first_mut() {
        *first += matlin::identity(n).scale(cert.s) - total;
    }
    BobStrategy { measurement: z.into_iter().map(|m| m.unscale(cert.s)).collect() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisMode {
    /// Closed-form strategies and certificates only.
    ClosedFormIfKnown,
    /// Solver values only.
    Solve,
    Both,
}

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub mode: AnalysisMode,
    /// Alice certificate regularization; defaults to [`default_eps`].
    pub eps: Option<f64>,
    pub tol: f64,
    pub solver: SolverOptions,
}

impl AnalysisOptions {
    pub fn new(mode: AnalysisMode) -> Self {
        Self { mode, eps: None, tol: DEFAULT_TOL, solver: SolverOptions::default() }
    }
}

/// Strategies and certificates available without solving.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnownAnalysis {
    pub bob_strategy: Option<BobStrategy>,
    pub bob_certificate: Option<BobCertificate>,
    pub alice_strategy: Option<AliceStrategy>,
    pub alice_certificate: Option<AliceCertificate>,
}

/// Closed forms for subset protocols; the fixed-state attack for Alice
/// otherwise.
pub fn closed_forms(p: &DricProtocol, eps: f64) -> Result<KnownAnalysis> {
    match p.origin() {
        Origin::Subset { m } => {
            let (d, m) = (p.outcomes(), *m);
            Ok(KnownAnalysis {
                bob_strategy: Some(subset_bob_strategy(d, m)?),
                bob_certificate: Some(subset_bob_certificate(d, m)?),
                alice_strategy: Some(subset_alice_strategy(d, m)?),
                alice_certificate: Some(subset_alice_certificate(d, m, eps)?),
            })
        }
        _ => Ok(KnownAnalysis { alice_strategy: Some(fixed_state_attack(p)?), ..Default::default() }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverValue {
    pub primal: f64,
    pub dual: f64,
    pub status: SdpStatus,
    pub iterations: usize,
}

impl<S, C> From<&Solved<S, C>> for SolverValue {
    fn from(s: &Solved<S, C>) -> Self {
        Self { primal: s.primal, dual: s.dual, status: s.status, iterations: s.iterations }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheatReport {
    pub d: usize,
    pub label: String,
    pub p_bob_lower: f64,
    pub p_bob_upper: f64,
    pub p_alice_lower: f64,
    pub p_alice_upper: f64,
    pub bob_strategy: Option<BobStrategy>,
    pub bob_certificate: Option<BobCertificate>,
    pub alice_strategy: Option<AliceStrategy>,
    pub alice_certificate: Option<AliceCertificate>,
    pub bob_solver: Option<SolverValue>,
    pub alice_solver: Option<SolverValue>,
    /// Excess of Alice's certified bound over its target value.
    pub certified_slack: f64,
    /// `p_alice_lower · p_bob_lower`
    pub kitaev_product: f64,
    pub notes: Vec<String>,
}

impl CheatReport {
    pub fn max_cheat_upper(&self) -> f64 {
        self.p_bob_upper.max(self.p_alice_upper)
    }

    /// `lower ≤ solver ≤ upper` within `tol` for each party that was solved,
    /// and `lower ≤ upper` for both.
    pub fn sandwich_holds(&self, tol: f64) -> bool {
        let inside = |lo: f64, hi: f64, v: Option<SolverValue>| {
            lo <= hi + tol && v.is_none_or(|v| lo <= v.primal + tol && v.primal <= hi + tol)
        };
        inside(self.p_bob_lower, self.p_bob_upper, self.bob_solver)
            && inside(self.p_alice_lower, self.p_alice_upper, self.alice_solver)
    }
}

pub fn analyze(p: &DricProtocol, mode: AnalysisMode) -> Result<CheatReport> {
    analyze_with(p, &AnalysisOptions::new(mode), KnownAnalysis::default())
}

/// Bounds from strategies (lower) and certificates (upper), with `known`
/// taking precedence over built-in closed forms. Missing bounds fall back to
/// the solver when it runs, else to the trivial `1/D` and `1`.
pub fn analyze_with(p: &DricProtocol, opts: &AnalysisOptions, known: KnownAnalysis) -> Result<CheatReport> {
    let d = p.outcomes();
    let rhos = protocol::reduced_states(p);
    let mut notes = Vec::new();
    let mut report = CheatReport {
        d,
        label: p.label().to_string(),
        p_bob_lower: 1.0 / d as f64,
        p_bob_upper: 1.0,
        p_alice_lower: 1.0 / d as f64,
        p_alice_upper: 1.0,
        bob_strategy: None,
        bob_certificate: None,
        alice_strategy: None,
        alice_certificate: None,
        bob_solver: None,
        alice_solver: None,
        certified_slack: 0.0,
        kitaev_product: 0.0,
        notes: Vec::new(),
    };
    let mut have = [false; 4];

    if opts.mode != AnalysisMode::Solve {
        let builtin = closed_forms(p, opts.eps.unwrap_or_else(|| default_eps(d)))?;
        let k = KnownAnalysis {
            bob_strategy: known.bob_strategy.or(builtin.bob_strategy),
            bob_certificate: known.bob_certificate.or(builtin.bob_certificate),
            alice_strategy: known.alice_strategy.or(builtin.alice_strategy),
            alice_certificate: known.alice_certificate.or(builtin.alice_certificate),
        };
        if let Some(s) = k.bob_strategy {
            s.check(STRATEGY_TOL)?;
            report.p_bob_lower = s.value(&rhos);
            report.bob_strategy = Some(s);
            have[0] = true;
        }
        if let Some(c) = k.bob_certificate {
            report.p_bob_upper = verify_bob_certificate(p, &c, opts.tol)?.value;
            report.bob_certificate = Some(c);
            have[1] = true;
        }
        if let Some(s) = k.alice_strategy {
            s.check(p, DEFAULT_TOL)?;
            report.p_alice_lower = s.value(p);
            report.alice_strategy = Some(s);
            have[2] = true;
        }
        if let Some(c) = k.alice_certificate {
            report.p_alice_upper = verify_alice_certificate(p, &c, opts.tol)?.value;
            report.certified_slack = c.slack;
            report.alice_certificate = Some(c);
            have[3] = true;
        }
    }

    if opts.mode != AnalysisMode::ClosedFormIfKnown {
        match solve_bob(p, &opts.solver) {
            Ok(sol) => {
                report.bob_solver = Some((&sol).into());
                if !have[0] {
                    report.p_bob_lower = sol.primal;
                    report.bob_strategy = Some(sol.strategy);
                    have[0] = true;
                }
                if !have[1] {
                    report.p_bob_upper = sol.dual;
                    report.bob_certificate = Some(sol.certificate);
                    have[1] = true;
                }
            }
            Err(CheatError::DimensionCap { what, dim, cap }) => {
                notes.push(format!("{what} skipped: dimension {dim} > {cap}"));
            }
            Err(e) => return Err(e),
        }
        match solve_alice(p, &opts.solver) {
            Ok(sol) => {
                report.alice_solver = Some((&sol).into());
                if !have[2] {
                    report.p_alice_lower = sol.primal;
                    report.alice_strategy = Some(sol.strategy);
                    have[2] = true;
                }
                if !have[3] {
                    report.p_alice_upper = sol.dual;
                    report.alice_certificate = Some(sol.certificate);
                    have[3] = true;
                }
            }
            Err(CheatError::DimensionCap { what, dim, cap }) => {
                notes.push(format!("{what} skipped: dimension {dim} > {cap}"));
            }
            Err(e) => return Err(e),
        }
    }

    for (flag, what) in have.iter().zip(["Bob lower bound", "Bob upper bound", "Alice lower bound", "Alice upper bound"]) {
        if !flag {
            notes.push(format!("{what} is trivial"));
        }
    }
    report.kitaev_product = report.p_alice_lower * report.p_bob_lower;
    report.notes = notes;
    Ok(report)
}

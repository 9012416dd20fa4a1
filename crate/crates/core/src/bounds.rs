//! Closed-form bounds in exact arithmetic, and the witness-based lower bound
//! for minimum-error state discrimination.

use num_integer::Roots;
use num_traits::ToPrimitive;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::cheating::{self, AliceCertificate, CheatError};
use crate::matlin::{self, CMatrix, MatlinError};
use crate::sdp::{self, SolverOptions};
use crate::Rational;

fn floor_sqrt(d: usize) -> usize {
    d.sqrt()
}

fn ceil_sqrt(d: usize) -> usize {
    let f = d.sqrt();
    if f * f == d {
        f
    } else {
        f + 1
    }
}

fn r(n: usize, d: usize) -> Rational {
    Rational::new(n as i64, d as i64)
}

/// Classical subset protocol with the better of `m = ⌊√D⌋`, `⌈√D⌉`:
/// `min{⌈√D⌉/D, 1/⌊√D⌋}`.
pub fn lemma1_bound(d: usize) -> Rational {
    r(ceil_sqrt(d), d).min(r(1, floor_sqrt(d)))
}

/// `1/√D`
pub fn kitaev_bound(d: usize) -> f64 {
    1.0 / (d as f64).sqrt()
}

/// `⌊100/√D⌋`, computed exactly as the largest `k` with `k²·D ≤ 10⁴`.
pub fn kitaev_pct(d: usize) -> i64 {
    (10_000 / d).sqrt() as i64
}

/// `(P_A*, P_B*) = ((D+1)/(2D), (2D−1)/D²)` of the three-message protocol.
pub fn three_message_values(d: usize) -> (Rational, Rational) {
    (r(d + 1, 2 * d), r(2 * d - 1, d * d))
}

pub fn three_message_bound(d: usize) -> Rational {
    let (a, b) = three_message_values(d);
    a.max(b)
}

/// `min{(D + ⌊√D⌋)/(D(⌊√D⌋ + 1)), (1 + ⌈√D⌉)/(D + ⌈√D⌉)}`
pub fn theorem1_bound(d: usize) -> Rational {
    let (f, c) = (floor_sqrt(d), ceil_sqrt(d));
    r(d + f, d * (f + 1)).min(r(1 + c, d + c))
}

/// `⌊100·v⌋`
pub fn truncated_pct(v: Rational) -> i64 {
    (v * Rational::from_integer(100)).floor().to_integer()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsRow {
    pub d: usize,
    pub three_message: Rational,
    pub classical: Rational,
    pub quantum: Rational,
    pub kitaev: f64,
}

impl BoundsRow {
    pub fn new(d: usize) -> Self {
        Self { d, three_message: three_message_bound(d), classical: lemma1_bound(d), quantum: theorem1_bound(d), kitaev: kitaev_bound(d) }
    }

    /// Truncated percentages in table order: three-message, classical, quantum, Kitaev.
    pub fn percentages(&self) -> [i64; 4] {
        [truncated_pct(self.three_message), truncated_pct(self.classical), truncated_pct(self.quantum), kitaev_pct(self.d)]
    }
}

pub fn bounds_table(d_min: usize, d_max: usize) -> Vec<BoundsRow> {
    (d_min.max(2)..=d_max).map(BoundsRow::new).collect()
}

pub const ROW_NAMES: [&str; 4] = ["Three-message protocol", "Classical subset protocol", "Quantum protocol", "Kitaev lower bound"];

/// Published truncated percentages for `D = 2..=10`.
pub const PUBLISHED: [[i64; 9]; 4] = [
    [75, 66, 62, 60, 58, 57, 56, 55, 55],
    [100, 66, 50, 50, 50, 42, 37, 33, 33],
    [75, 60, 50, 46, 44, 40, 36, 33, 32],
    [70, 57, 50, 44, 40, 37, 35, 33, 31],
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableMismatch {
    pub d: usize,
    pub row: &'static str,
    pub expected: i64,
    pub found: i64,
}

/// Compares rows with `2 ≤ D ≤ 10` against [`PUBLISHED`].
pub fn check_published(rows: &[BoundsRow]) -> Vec<TableMismatch> {
    let mut out = Vec::new();
    for row in rows.iter().filter(|row| (2..=10).contains(&row.d)) {
        for (k, found) in row.percentages().into_iter().enumerate() {
            let expected = PUBLISHED[k][row.d - 2];
            if expected != found {
                out.push(TableMismatch { d: row.d, row: ROW_NAMES[k], expected, found });
            }
        }
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsdError {
    #[error("ensemble is empty")]
    Empty,
    #[error("{states} states but {priors} priors")]
    Count { states: usize, priors: usize },
    #[error("state {index} is not a density matrix: {reason}")]
    NotDensity { index: usize, reason: String },
    #[error("priors must be nonnegative and sum to 1 (sum {sum})")]
    Priors { sum: f64 },
    #[error("witness {index}: ⟨W, ρ⟩ = {value} exceeds 1")]
    WitnessTooLarge { index: usize, value: f64 },
    #[error("witness {index} is not positive definite")]
    WitnessNotPd { index: usize },
    #[error("dimension {dim} exceeds the solver cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("solver stopped without reaching optimality: {0}")]
    NotOptimal(String),
    #[error(transparent)]
    Cheat(#[from] CheatError),
    #[error(transparent)]
    Linalg(#[from] MatlinError),
}

pub type Result<T> = std::result::Result<T, QsdError>;

/// States `ρ_i` with priors `p_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct QsdEnsemble {
    states: Vec<CMatrix>,
    priors: Vec<f64>,
}

impl QsdEnsemble {
    pub fn new(states: Vec<CMatrix>, priors: Vec<f64>) -> Result<Self> {
        if states.is_empty() {
            return Err(QsdError::Empty);
        }
        if states.len() != priors.len() {
            return Err(QsdError::Count { states: states.len(), priors: priors.len() });
        }
        let n = states[0].nrows();
        for (index, rho) in states.iter().enumerate() {
            let bad = |reason: String| Err(QsdError::NotDensity { index: index + 1, reason });
            if rho.shape() != (n, n) {
                return bad(format!("shape {:?}, expected {n}x{n}", rho.shape()));
            }
            if !matlin::is_finite(rho) || matlin::hermiticity_defect(rho) > 1e-10 {
                return bad("not Hermitian".into());
            }
            let tr = matlin::trace(rho).re;
            if (tr - 1.0).abs() > 1e-10 {
                return bad(format!("trace {tr}"));
            }
            let lmin = matlin::lambda_min(rho)?;
            if lmin < -1e-10 {
                return bad(format!("λ_min {lmin:.3e}"));
            }
        }
        let sum: f64 = priors.iter().sum();
        if priors.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(QsdError::Priors { sum });
        }
        Ok(Self { states, priors })
    }

    pub fn uniform(states: Vec<CMatrix>) -> Result<Self> {
        let n = states.len();
        Self::new(states, vec![1.0 / n as f64; n])
    }

    pub fn states(&self) -> &[CMatrix] {
        &self.states
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].nrows()
    }

    pub fn with_priors(&self, priors: Vec<f64>) -> Result<Self> {
        Self::new(self.states.clone(), priors)
    }
}

/// `max Σ p_i ⟨M_i, ρ_i⟩` over POVMs.
pub fn qsd_optimum(e: &QsdEnsemble) -> Result<f64> {
    qsd_optimum_with(e, &SolverOptions::default())
}

pub fn qsd_optimum_with(e: &QsdEnsemble, opts: &SolverOptions) -> Result<f64> {
    if e.dim() > cheating::BOB_SOLVE_CAP {
        return Err(QsdError::DimensionCap { dim: e.dim(), cap: cheating::BOB_SOLVE_CAP });
    }
    let prob = cheating::discrimination_sdp(e.states(), e.priors())?;
    let sol = sdp::solve_with(&prob, opts).map_err(CheatError::from)?;
    if !sol.is_optimal() {
        return Err(QsdError::NotOptimal(format!("{:?} after {} iterations", sol.status, sol.iterations)));
    }
    Ok(sol.primal_value)
}

/// `λ_min((Σ_i W_i⁻¹)⁻¹) = 1/λ_max(Σ_i W_i⁻¹)` for positive definite `W_i`
/// with `⟨W_i, ρ_i⟩ ≤ 1`. A lower bound on the discrimination optimum for
/// every choice of priors, which is why only the states are taken.
pub fn qsd_lower_bound(witnesses: &[CMatrix], states: &[CMatrix]) -> Result<f64> {
    if witnesses.is_empty() {
        return Err(QsdError::Empty);
    }
    if witnesses.len() != states.len() {
        return Err(QsdError::Count { states: states.len(), priors: witnesses.len() });
    }
    let mut worst: Option<(usize, f64)> = None;
    for (index, (w, rho)) in witnesses.iter().zip(states).enumerate() {
        let value = matlin::inner(w, rho);
        if value > 1.0 + 1e-10 && worst.is_none_or(|(_, v)| value > v) {
            worst = Some((index + 1, value));
        }
    }
    if let Some((index, value)) = worst {
        return Err(QsdError::WitnessTooLarge { index, value });
    }
    let n = witnesses[0].nrows();
    let mut total = CMatrix::zeros(n, n);
    for (index, w) in witnesses.iter().enumerate() {
        let inv = matlin::inverse_pd(w).map_err(|_| QsdError::WitnessNotPd { index: index + 1 })?;
        total += inv;
    }
    Ok(1.0 / matlin::lambda_max(&total)?)
}

/// `W_a = (D·Z_a)⁻¹`, so that `⟨W_a, ρ_a⟩ = ⟨Z_a⁻¹, ρ_a⟩/D ≤ 1`.
pub fn certificate_to_qsd_witness(cert: &AliceCertificate, d: usize) -> Result<Vec<CMatrix>> {
    cert.z
        .iter()
        .enumerate()
        .map(|(index, z)| {
            matlin::inverse_pd(&z.scale(d as f64)).map_err(|_| QsdError::WitnessNotPd { index: index + 1 })
        })
        .collect()
}

fn gaussian_vector(rng: &mut impl Rng, n: usize) -> nalgebra::DVector<num_complex::Complex64> {
    nalgebra::DVector::from_fn(n, |_, _| {
        num_complex::Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    })
}

/// Random ensemble: each state mixes `1..=dim` Haar-random pure states with
/// uniform random weights; priors are uniform random weights, normalized.
pub fn random_ensemble(rng: &mut impl Rng, n: usize, dim: usize) -> QsdEnsemble {
    let states = (0..n)
        .map(|_| {
            let rank = rng.gen_range(1..=dim);
            let weights: Vec<f64> = (0..rank).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let mut rho = CMatrix::zeros(dim, dim);
            for w in weights {
                let v = gaussian_vector(rng, dim);
                rho += matlin::outer(&v.unscale(v.norm())).scale(w / total);
            }
            matlin::hermitian_part(&rho)
        })
        .collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut priors: Vec<f64> = raw.iter().map(|p| p / total).collect();
    let head: f64 = priors[..n - 1].iter().sum();
    priors[n - 1] = 1.0 - head;
    QsdEnsemble::new(states, priors).expect("random ensemble is valid")
}

/// Random positive definite witnesses scaled to `⟨W_i, ρ_i⟩ = 1`.
pub fn random_witnesses(rng: &mut impl Rng, states: &[CMatrix]) -> Vec<CMatrix> {
    states
        .iter()
        .map(|rho| {
            let n = rho.nrows();
            let g = CMatrix::from_fn(n, n, |_, _| {
                num_complex::Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
            });
            let w = matlin::hermitian_part(&(&g * g.adjoint())) + matlin::identity(n).scale(0.1);
            w.unscale(matlin::inner(&w, rho))
        })
        .collect()
}

/// `r` as `f64`.
pub fn to_f64(v: Rational) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

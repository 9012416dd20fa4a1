//! Die-rolling protocols: integer-commitment (DRIC) state families, the
//! subset-state construction, the classical subset protocol, and honest
//! execution.
//!
//! A DRIC protocol is fully described by `D` pure states `|ψ_a⟩ ∈ A ⊗ B`.
//! Alice sends `B`, Bob answers with `b`, Alice reveals `a` and `A`, and Bob
//! accepts after projecting onto `|ψ_a⟩`. Outcomes use the bijective map
//! `d = ((a − 1 + b − 1) mod D) + 1` over 1-based `a`, `b`.

use itertools::Itertools;
use num_complex::Complex64;
use num_integer::binomial;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::matlin::{self, BipartiteDims, CMatrix, CVector};
use crate::Rational;

/// Largest subset-basis dimension `C(D, m)` built by default.
pub const DEFAULT_DIMENSION_CAP: u64 = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("need at least two outcomes, got D = {0}")]
    TooFewOutcomes(usize),
    #[error("subset size m = {m} must satisfy 1 <= m <= D = {d}")]
    SubsetSizeOutOfRange { d: usize, m: usize },
    #[error("state dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: u64, cap: u64 },
    #[error("expected {expected} states, got {found}")]
    StateCount { expected: usize, found: usize },
    #[error("state {index} has {found} amplitudes, expected {expected}")]
    StateDimension { index: usize, expected: usize, found: usize },
    #[error("state {index} is not normalized (norm {norm})")]
    NotNormalized { index: usize, norm: f64 },
    #[error("state {index} has non-finite amplitudes")]
    NonFinite { index: usize },
    #[error(transparent)]
    Linalg(#[from] matlin::MatlinError),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

/// How a protocol was obtained; used to look up closed-form analyses.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Subset { m: usize },
    /// One `|⊥,⊥⟩` direction mixed in with weight `t` (reduces Bob's cheating).
    ReduceBob { t: f64, base: Box<Origin> },
    /// Labelled `|⊥_a,⊥_a⟩` directions mixed in with weight `t` (reduces Alice's cheating).
    ReduceAlice { t: f64, base: Box<Origin> },
    Custom,
}

impl Origin {
    pub fn describe(&self) -> String {
        match self {
            Origin::Subset { m } => format!("subset(m={m})"),
            Origin::ReduceBob { t, base } => format!("reduce-bob(t={t:.6}, {})", base.describe()),
            Origin::ReduceAlice { t, base } => format!("reduce-alice(t={t:.6}, {})", base.describe()),
            Origin::Custom => "custom".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DricProtocol {
    d: usize,
    dims: BipartiteDims,
    states: Vec<CVector>,
    label: String,
    origin: Origin,
}

impl DricProtocol {
    /// Validates and wraps a state family. Each state must have unit norm
    /// within `1e-12`, which gives honest completeness `⟨ψ_a|Π_a|ψ_a⟩ = 1`.
    pub fn new(d: usize, dims: BipartiteDims, states: Vec<CVector>, label: impl Into<String>) -> Result<Self> {
        Self::with_origin(d, dims, states, label, Origin::Custom)
    }

    pub fn with_origin(
        d: usize,
        dims: BipartiteDims,
        states: Vec<CVector>,
        label: impl Into<String>,
        origin: Origin,
    ) -> Result<Self> {
        if d < 2 {
            return Err(ProtocolError::TooFewOutcomes(d));
        }
        if states.len() != d {
            return Err(ProtocolError::StateCount { expected: d, found: states.len() });
        }
        for (index, psi) in states.iter().enumerate() {
            if psi.len() != dims.total() {
                return Err(ProtocolError::StateDimension { index, expected: dims.total(), found: psi.len() });
            }
            if psi.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(ProtocolError::NonFinite { index });
            }
            let norm = psi.norm();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(ProtocolError::NotNormalized { index, norm });
            }
        }
        Ok(Self { d, dims, states, label: label.into(), origin })
    }

    pub fn outcomes(&self) -> usize {
        self.d
    }

    pub fn dims(&self) -> BipartiteDims {
        self.dims
    }

    pub fn states(&self) -> &[CVector] {
        &self.states
    }

    pub fn state(&self, a: usize) -> &CVector {
        &self.states[a]
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    pub fn is_real(&self) -> bool {
        self.states.iter().all(|psi| psi.iter().all(|z| z.im == 0.0))
    }

    /// `G[a, a'] = ⟨ψ_a|ψ_a'⟩`
    pub fn gram(&self) -> CMatrix {
        CMatrix::from_fn(self.d, self.d, |i, j| self.states[i].dotc(&self.states[j]))
    }

    /// `Π_a = |ψ_a⟩⟨ψ_a|` (dense, `(dA·dB)²` entries).
    pub fn projector(&self, a: usize) -> CMatrix {
        matlin::outer(&self.states[a])
    }

    /// Probability that honest Bob accepts an honest reveal of `a`.
    pub fn acceptance_probability(&self, a: usize) -> f64 {
        self.states[a].norm_squared().powi(2)
    }
}

/// `ρ_a = Tr_A(|ψ_a⟩⟨ψ_a|)` for every `a`.
pub fn reduced_states(p: &DricProtocol) -> Vec<CMatrix> {
    p.states
        .iter()
        .map(|psi| matlin::reduced_state(psi, p.dims).expect("state dimensions are validated"))
        .collect()
}

/// All `m`-subsets of `{1..=d}` in lexicographic order.
pub fn subsets(d: usize, m: usize) -> Vec<Vec<usize>> {
    (1..=d).combinations(m).collect()
}

fn check_subset_params(d: usize, m: usize) -> Result<()> {
    if d < 2 {
        return Err(ProtocolError::TooFewOutcomes(d));
    }
    if m == 0 || m > d {
        return Err(ProtocolError::SubsetSizeOutOfRange { d, m });
    }
    Ok(())
}

/// Dimension `C(D, m)` of the subset basis after validating `(D, m)`.
pub fn subset_dimension(d: usize, m: usize) -> Result<u64> {
    check_subset_params(d, m)?;
    Ok(binomial(d as u64, m as u64))
}

/// Subset-state protocol:
/// `|ψ_a⟩ = C(D−1, m−1)^{-1/2} Σ_{S ∋ a} |S⟩|S⟩` on `A = B = ℂ^{C(D,m)}`.
pub fn build_subset_protocol(d: usize, m: usize) -> Result<DricProtocol> {
    build_subset_protocol_capped(d, m, DEFAULT_DIMENSION_CAP)
}

pub fn build_subset_protocol_capped(d: usize, m: usize, cap: u64) -> Result<DricProtocol> {
    let dim = subset_dimension(d, m)?;
    if dim > cap {
        return Err(ProtocolError::DimensionCap { dim, cap });
    }
    let n = dim as usize;
    let dims = BipartiteDims::new(n, n)?;
    let amp = 1.0 / (binomial(d as u64 - 1, m as u64 - 1) as f64).sqrt();
    let family = subsets(d, m);
    let states = (1..=d)
        .map(|a| {
            let mut psi = CVector::zeros(n * n);
            for (s, subset) in family.iter().enumerate() {
                if subset.contains(&a) {
                    psi[dims.index(s, s)] = Complex64::new(amp, 0.0);
                }
            }
            psi
        })
        .collect();
    DricProtocol::with_origin(d, dims, states, format!("subset D={d} m={m}"), Origin::Subset { m })
}

/// `d = ((a − 1 + b − 1) mod D) + 1` for 1-based `a`, `b`.
pub fn outcome(d: usize, a: usize, b: usize) -> usize {
    (a - 1 + b - 1) % d + 1
}

/// Classical protocol: Bob announces a uniformly random `m`-subset `S`,
/// Alice picks `d ∈ S` uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassicalSubsetProtocol {
    d: usize,
    m: usize,
}

impl ClassicalSubsetProtocol {
    pub fn new(d: usize, m: usize) -> Result<Self> {
        check_subset_params(d, m)?;
        Ok(Self { d, m })
    }

    pub fn outcomes(&self) -> usize {
        self.d
    }

    pub fn subset_size(&self) -> usize {
        self.m
    }
}

/// Exact `(P_A*, P_B*) = (m/D, 1/m)` of the classical subset protocol.
pub fn classical_cheat_values(p: &ClassicalSubsetProtocol) -> (Rational, Rational) {
    (Rational::new(p.m as i64, p.d as i64), Rational::new(1, p.m as i64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HonestTranscript {
    pub a: usize,
    pub b: usize,
    pub d: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassicalTranscript {
    pub subset: Vec<usize>,
    pub d: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transcript {
    Dric(HonestTranscript),
    Classical(ClassicalTranscript),
}

impl Transcript {
    pub fn outcome(&self) -> usize {
        match self {
            Transcript::Dric(t) => t.d,
            Transcript::Classical(t) => t.d,
        }
    }

    pub fn accepted(&self) -> bool {
        match self {
            Transcript::Dric(t) => t.accepted,
            Transcript::Classical(t) => t.accepted,
        }
    }
}

/// A protocol that can be executed with both parties honest.
pub trait HonestRun {
    fn outcomes(&self) -> usize;
    fn run_honest(&self, rng: &mut ChaCha8Rng) -> Transcript;
}

impl HonestRun for DricProtocol {
    fn outcomes(&self) -> usize {
        self.d
    }

    fn run_honest(&self, rng: &mut ChaCha8Rng) -> Transcript {
        let a = rng.gen_range(1..=self.d);
        let b = rng.gen_range(1..=self.d);
        let accepted = rng.gen::<f64>() < self.acceptance_probability(a - 1);
        Transcript::Dric(HonestTranscript { a, b, d: outcome(self.d, a, b), accepted })
    }
}

impl HonestRun for ClassicalSubsetProtocol {
    fn outcomes(&self) -> usize {
        self.d
    }

    fn run_honest(&self, rng: &mut ChaCha8Rng) -> Transcript {
        let mut subset: Vec<usize> =
            rand::seq::index::sample(rng, self.d, self.m).into_iter().map(|i| i + 1).collect();
        subset.sort_unstable();
        let d = subset[rng.gen_range(0..self.m)];
        Transcript::Classical(ClassicalTranscript { subset, d, accepted: true })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    /// `histogram[d − 1]` counts accepted runs with outcome `d`.
    pub histogram: Vec<u64>,
    pub aborts: u64,
    pub transcripts: Vec<Transcript>,
}

impl SimulationReport {
    pub fn trials(&self) -> u64 {
        self.transcripts.len() as u64
    }

    /// Pearson statistic of the accepted outcomes against the uniform law.
    pub fn chi_square(&self) -> f64 {
        let total: u64 = self.histogram.iter().sum();
        let expected = total as f64 / self.histogram.len() as f64;
        self.histogram.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
    }
}

/// Runs `trials` honest executions with a `ChaCha8` stream seeded by `seed`.
pub fn simulate_honest<P: HonestRun + ?Sized>(p: &P, seed: u64, trials: usize) -> SimulationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut histogram = vec![0u64; p.outcomes()];
    let mut aborts = 0;
    let transcripts: Vec<Transcript> = (0..trials)
        .map(|_| {
            let t = p.run_honest(&mut rng);
            if t.accepted() {
                histogram[t.outcome() - 1] += 1;
            } else {
                aborts += 1;
            }
            t
        })
        .collect();
    SimulationReport { histogram, aborts, transcripts }
}

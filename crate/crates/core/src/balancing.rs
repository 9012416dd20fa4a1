//! Trading one party's cheating probability against the other's.
//!
//! Mixing an orthogonal direction into every commitment state with weight
//! `t` helps the party it is shared with: a common `|⊥,⊥⟩` (reduce-Bob)
//! makes all states overlap more, so Alice gains and Bob loses; a labelled
//! `|⊥_a,⊥_a⟩` (reduce-Alice) makes them more distinguishable, so the reverse.
//! Dual certificates carry over in closed form, and the `t` equating the two
//! resulting bounds gives `(D·max − min)/(D·|β − α| + D − 1)`.

use num_complex::Complex64;
use num_integer::Roots;
use num_traits::{Num, ToPrimitive};
use thiserror::Error;

use crate::cheating::{self, AliceCertificate, BobCertificate, CertificateForm, CheatError};
use crate::matlin::{self, BipartiteDims, CMatrix, CVector, MatlinError};
use crate::protocol::{self, DricProtocol, Origin, ProtocolError};
use crate::Rational;

/// Free constant on the unlabelled `⊥_c` directions in reduce-Alice
/// transport; contributes `(D − 1)·ζ` to the certified slack.
pub const ZETA: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Shared `|⊥,⊥⟩`; lowers Bob's bound, raises Alice's.
    ReduceBob,
    /// Labelled `|⊥_a,⊥_a⟩`; lowers Alice's bound, raises Bob's.
    ReduceAlice,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::ReduceBob => "reduce-bob",
            Direction::ReduceAlice => "reduce-alice",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BalanceError {
    #[error("mixing weight t = {0} must lie strictly between 0 and 1")]
    WeightOutOfRange(f64),
    #[error("{direction:?} needs {needed}, got α = {alpha}, β = {beta}")]
    WrongOrdering { direction: Direction, needed: &'static str, alpha: f64, beta: f64 },
    #[error("cheating values must lie in (0, 1], got α = {alpha}, β = {beta}")]
    ValueOutOfRange { alpha: f64, beta: f64 },
    #[error("input certificate is not strictly feasible: Z_{index} has λ_min = {lambda_min:.3e}")]
    NotStrictlyFeasible { index: usize, lambda_min: f64 },
    #[error("certificate shape does not match the protocol")]
    Shape,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Cheat(#[from] CheatError),
    #[error(transparent)]
    Linalg(#[from] MatlinError),
}

pub type Result<T> = std::result::Result<T, BalanceError>;

fn check_weight(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(BalanceError::WeightOutOfRange(t))
    }
}

fn extend(p: &DricProtocol, direction: Direction, t: f64) -> Result<DricProtocol> {
    check_weight(t)?;
    let d = p.outcomes();
    let old = p.dims();
    let extra = match direction {
        Direction::ReduceBob => 1,
        Direction::ReduceAlice => d,
    };
    let dims = BipartiteDims::new(old.dim_a + extra, old.dim_b + extra)?;
    let (keep, mix) = ((1.0 - t).sqrt(), t.sqrt());
    let states = p
        .states()
        .iter()
        .enumerate()
        .map(|(a, psi)| {
            let mut out = CVector::zeros(dims.total());
            for ia in 0..old.dim_a {
                for ib in 0..old.dim_b {
                    out[dims.index(ia, ib)] = psi[old.index(ia, ib)] * keep;
                }
            }
            let bot = match direction {
                Direction::ReduceBob => 0,
                Direction::ReduceAlice => a,
            };
            out[dims.index(old.dim_a + bot, old.dim_b + bot)] = Complex64::new(mix, 0.0);
            out
        })
        .collect();
    let base = Box::new(p.origin().clone());
    let origin = match direction {
        Direction::ReduceBob => Origin::ReduceBob { t, base },
        Direction::ReduceAlice => Origin::ReduceAlice { t, base },
    };
    let label = format!("{} {}(t={t:.6})", p.label(), direction.name());
    Ok(DricProtocol::with_origin(d, dims, states, label, origin)?)
}

/// `|ψ'_a⟩ = √(1−t)|ψ_a⟩ + √t|⊥,⊥⟩`, one extra basis vector on each side.
pub fn extend_reduce_bob(p: &DricProtocol, t: f64) -> Result<DricProtocol> {
    extend(p, Direction::ReduceBob, t)
}

/// `|ψ'_a⟩ = √(1−t)|ψ_a⟩ + √t|⊥_a,⊥_a⟩`, `D` extra basis vectors on each side.
pub fn extend_reduce_alice(p: &DricProtocol, t: f64) -> Result<DricProtocol> {
    extend(p, Direction::ReduceAlice, t)
}

pub fn extend_protocol(p: &DricProtocol, direction: Direction, t: f64) -> Result<DricProtocol> {
    extend(p, direction, t)
}

/// Bob certificate for the extended protocol:
/// `(1−t)X ⊕ t/D` (reduce-Bob) or `(1−t)X ⊕ (t/D)·I_D` (reduce-Alice).
pub fn transport_bob_certificate(d: usize, direction: Direction, t: f64, cert: &BobCertificate) -> Result<BobCertificate> {
    check_weight(t)?;
    let extra = match direction {
        Direction::ReduceBob => 1,
        Direction::ReduceAlice => d,
    };
    let tail = matlin::identity(extra).scale(t / d as f64);
    Ok(BobCertificate { x: matlin::direct_sum(&cert.x.scale(1.0 - t), &tail) })
}

/// Alice certificate for the extended protocol, in inverse form.
///
/// Reduce-Bob: `Z'_a = δZ_a ⊕ ε` with `ε = (s(1−t)+t)/D`, `δ = (1−t) + t/s`,
/// `s' = s(1−t) + t`.
/// Reduce-Alice: `Z'_a = δZ_a ⊕ (ε on ⊥_a, ζ on ⊥_c)` with
/// `ε = (1−t)s + t/D`, `δ = (1−t) + t/(Ds)`, `s' = (1−t)s + t/D + (D−1)ζ`.
pub fn transport_alice_certificate(
    d: usize,
    direction: Direction,
    t: f64,
    cert: &AliceCertificate,
) -> Result<AliceCertificate> {
    check_weight(t)?;
    if cert.z.len() != d {
        return Err(BalanceError::Shape);
    }
    for (a, z) in cert.z.iter().enumerate() {
        let lambda_min = matlin::lambda_min(z)?;
        if !(lambda_min > 0.0) {
            return Err(BalanceError::NotStrictlyFeasible { index: a + 1, lambda_min });
        }
    }
    let s = cert.s;
    let df = d as f64;
    let (z, s_new, slack) = match direction {
        Direction::ReduceBob => {
            let eps = (s * (1.0 - t) + t) / df;
            let delta = (1.0 - t) + t / s;
            let tail = matlin::diag(&[eps]);
            let z = cert.z.iter().map(|z| matlin::direct_sum(&z.scale(delta), &tail)).collect();
            (z, s * (1.0 - t) + t, (1.0 - t) * cert.slack)
        }
        Direction::ReduceAlice => {
            let eps = (1.0 - t) * s + t / df;
            let delta = (1.0 - t) + t / (df * s);
            let z = (0..d)
                .map(|a| {
                    let tail: Vec<f64> = (0..d).map(|c| if c == a { eps } else { ZETA }).collect();
                    matlin::direct_sum(&cert.z[a].scale(delta), &matlin::diag(&tail))
                })
                .collect();
            let s_new = (delta * s).max(eps + (df - 1.0) * ZETA);
            (z, s_new, (1.0 - t) * cert.slack + (df - 1.0) * ZETA)
        }
    };
    let eps = match cert.form {
        CertificateForm::Inverse { eps } => eps,
        CertificateForm::Operator => 0.0,
    };
    Ok(AliceCertificate { s: s_new, z, form: CertificateForm::Inverse { eps }, slack })
}

/// Both transports; shapes are checked against `p` (the protocol before
/// extension).
pub fn transport_certificates(
    p: &DricProtocol,
    direction: Direction,
    t: f64,
    bob: &BobCertificate,
    alice: &AliceCertificate,
) -> Result<(BobCertificate, AliceCertificate)> {
    let n = p.dims().dim_b;
    if bob.x.shape() != (n, n) || alice.z.iter().any(|z| z.shape() != (n, n)) {
        return Err(BalanceError::Shape);
    }
    let d = p.outcomes();
    Ok((transport_bob_certificate(d, direction, t, bob)?, transport_alice_certificate(d, direction, t, alice)?))
}

/// Field in which cheating values and bounds are computed.
pub trait Scalar: Num + Copy + PartialOrd + ToPrimitive {
    fn from_count(n: usize) -> Self;
}

impl Scalar for f64 {
    fn from_count(n: usize) -> Self {
        n as f64
    }
}

impl Scalar for Rational {
    fn from_count(n: usize) -> Self {
        Rational::from_integer(n as i64)
    }
}

fn abs_diff<T: Scalar>(a: T, b: T) -> T {
    if a > b {
        a - b
    } else {
        b - a
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalT<T> {
    pub t: T,
    /// `α = β`: the protocol is already balanced and `t = 0`.
    pub no_op: bool,
}

/// `t = |β − α| / ((1 − 1/D) + |β − α|)`, which equates the two bounds
/// `(1−t)·max + t/D` and `(1−t)·min + t`.
pub fn optimal_t<T: Scalar>(alpha: T, beta: T, d: usize, direction: Direction) -> Result<OptimalT<T>> {
    check_values(alpha, beta)?;
    if alpha == beta {
        return Ok(OptimalT { t: T::zero(), no_op: true });
    }
    let wrong = match direction {
        Direction::ReduceBob => beta < alpha,
        Direction::ReduceAlice => alpha < beta,
    };
    if wrong {
        let needed = match direction {
            Direction::ReduceBob => "β > α",
            Direction::ReduceAlice => "α > β",
        };
        return Err(BalanceError::WrongOrdering {
            direction,
            needed,
            alpha: alpha.to_f64().unwrap_or(f64::NAN),
            beta: beta.to_f64().unwrap_or(f64::NAN),
        });
    }
    let gap = abs_diff(alpha, beta);
    let one = T::one();
    let t = gap / (one - one / T::from_count(d) + gap);
    Ok(OptimalT { t, no_op: false })
}

fn check_values<T: Scalar>(alpha: T, beta: T) -> Result<()> {
    let ok = |v: T| v > T::zero() && v <= T::one();
    if ok(alpha) && ok(beta) {
        Ok(())
    } else {
        Err(BalanceError::ValueOutOfRange {
            alpha: alpha.to_f64().unwrap_or(f64::NAN),
            beta: beta.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// Bounds `(α', β')` on Alice's and Bob's cheating after extending with
/// weight `t`.
pub fn lemma_bounds<T: Scalar>(alpha: T, beta: T, d: usize, direction: Direction, t: T) -> (T, T) {
    let one = T::one();
    let df = T::from_count(d);
    match direction {
        Direction::ReduceBob => ((one - t) * alpha + t, (one - t) * beta + t / df),
        Direction::ReduceAlice => ((one - t) * alpha + t / df, (one - t) * beta + t),
    }
}

/// Reduce-Bob: `(Dβ − α)/(Dβ − Dα + D − 1)`; reduce-Alice mirrored.
/// Returns `α` when `α = β`.
pub fn corollary_bound<T: Scalar>(alpha: T, beta: T, d: usize, direction: Direction) -> T {
    if alpha == beta {
        return alpha;
    }
    let df = T::from_count(d);
    let (hi, lo) = match direction {
        Direction::ReduceBob => (beta, alpha),
        Direction::ReduceAlice => (alpha, beta),
    };
    (df * hi - lo) / (df * hi - df * lo + df - T::one())
}

/// `(D·max{α,β} − min{α,β}) / (D·|β − α| + D − 1)`, using whichever
/// direction applies.
pub fn proposition2_bound<T: Scalar>(alpha: T, beta: T, d: usize) -> T {
    corollary_bound(alpha, beta, d, direction_for(alpha, beta))
}

/// The direction that lowers the larger of the two values.
pub fn direction_for<T: Scalar>(alpha: T, beta: T) -> Direction {
    if beta > alpha {
        Direction::ReduceBob
    } else {
        Direction::ReduceAlice
    }
}

/// One candidate subset size in the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub m: usize,
    /// `C(D, m)`
    pub dimension: u64,
    pub alpha: Rational,
    pub beta: Rational,
    pub bound: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceResult {
    pub base: DricProtocol,
    /// Equal to `base` when no extension is needed.
    pub transformed: DricProtocol,
    /// `None` when `α = β`.
    pub direction: Option<Direction>,
    pub t: Rational,
    pub alpha: Rational,
    pub beta: Rational,
    pub bob_certificate: BobCertificate,
    pub alice_certificate: AliceCertificate,
    pub bound: Rational,
    /// Candidates evaluated by [`theorem1_pipeline`]; empty otherwise.
    pub branches: Vec<Branch>,
}

impl BalanceResult {
    pub fn t_f64(&self) -> f64 {
        self.t.to_f64().unwrap_or(f64::NAN)
    }

    /// `(α', β')` at the chosen `t`.
    pub fn lemma_values(&self) -> (Rational, Rational) {
        match self.direction {
            Some(dir) => lemma_bounds(self.alpha, self.beta, self.base.outcomes(), dir, self.t),
            None => (self.alpha, self.beta),
        }
    }

    /// Verifies both transported certificates on the transformed protocol
    /// and returns the certified `(Alice, Bob)` upper bounds.
    pub fn verify(&self, tol: f64) -> Result<(f64, f64)> {
        let alice = cheating::verify_alice_certificate(&self.transformed, &self.alice_certificate, tol)?;
        let bob = cheating::verify_bob_certificate(&self.transformed, &self.bob_certificate, tol)?;
        Ok((alice.value, bob.value))
    }
}

/// Balances `p`, whose cheating values `α` (Alice) and `β` (Bob) are
/// certified by `bob` and `alice`, with the optimal weight.
pub fn balance(
    p: &DricProtocol,
    alpha: Rational,
    beta: Rational,
    bob: &BobCertificate,
    alice: &AliceCertificate,
) -> Result<BalanceResult> {
    let d = p.outcomes();
    let direction = direction_for(alpha, beta);
    let opt = optimal_t(alpha, beta, d, direction)?;
    let bound = corollary_bound(alpha, beta, d, direction);
    let (transformed, direction, bob_certificate, alice_certificate) = if opt.no_op {
        (p.clone(), None, bob.clone(), alice.clone())
    } else {
        let t = opt.t.to_f64().expect("rational weight");
        let (b, a) = transport_certificates(p, direction, t, bob, alice)?;
        (extend(p, direction, t)?, Some(direction), b, a)
    };
    Ok(BalanceResult {
        base: p.clone(),
        transformed,
        direction,
        t: opt.t,
        alpha,
        beta,
        bob_certificate,
        alice_certificate,
        bound,
        branches: Vec::new(),
    })
}

/// Subset sizes `⌊√D⌋` and `⌈√D⌉` (one entry when `D` is square).
pub fn candidate_sizes(d: usize) -> Vec<usize> {
    let f = d.sqrt();
    if f * f == d {
        vec![f]
    } else {
        vec![f, f + 1]
    }
}

/// Evaluates the floor and ceiling subset protocols, keeps the smaller
/// balanced bound (ties go to the smaller state dimension), and returns the
/// extended protocol with transported certificates.
pub fn theorem1_pipeline(d: usize) -> Result<BalanceResult> {
    theorem1_pipeline_with_eps(d, cheating::default_eps(d))
}

pub fn theorem1_pipeline_with_eps(d: usize, eps: f64) -> Result<BalanceResult> {
    if d < 2 {
        return Err(ProtocolError::TooFewOutcomes(d).into());
    }
    let branches: Vec<Branch> = candidate_sizes(d)
        .into_iter()
        .map(|m| {
            let alpha = Rational::new(m as i64, d as i64);
            let beta = Rational::new(1, m as i64);
            Branch {
                m,
                dimension: num_integer::binomial(d as u64, m as u64),
                alpha,
                beta,
                bound: proposition2_bound(alpha, beta, d),
            }
        })
        .collect();
    let best = branches
        .iter()
        .min_by(|x, y| x.bound.cmp(&y.bound).then(x.dimension.cmp(&y.dimension)))
        .expect("at least one branch")
        .clone();
    let p = protocol::build_subset_protocol(d, best.m)?;
    let bob = cheating::subset_bob_certificate(d, best.m)?;
    let alice = cheating::subset_alice_certificate(d, best.m, eps)?;
    let mut result = balance(&p, best.alpha, best.beta, &bob, &alice)?;
    result.branches = branches;
    Ok(result)
}

/// Reduced states of the extended protocol predicted by the transformation:
/// `(1−t)ρ_a ⊕ t|⊥⟩⟨⊥|` or `(1−t)ρ_a ⊕ t|⊥_a⟩⟨⊥_a|`.
pub fn expected_reduced_states(p: &DricProtocol, direction: Direction, t: f64) -> Vec<CMatrix> {
    let d = p.outcomes();
    protocol::reduced_states(p)
        .iter()
        .enumerate()
        .map(|(a, rho)| {
            let tail: Vec<f64> = match direction {
                Direction::ReduceBob => vec![t],
                Direction::ReduceAlice => (0..d).map(|c| if c == a { t } else { 0.0 }).collect(),
            };
            matlin::direct_sum(&rho.scale(1.0 - t), &matlin::diag(&tail))
        })
        .collect()
}

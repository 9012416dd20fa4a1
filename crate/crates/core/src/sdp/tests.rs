use super::*;
use crate::matlin::{c, diag, eigh, hermitian_part, identity, real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(rng: &mut impl Rng, n: usize, field: Field) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| match field {
        Field::Real => real(rng.gen_range(-1.0..1.0)),
        Field::Complex => c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
    });
    hermitian_part(&m)
}

/// `max ⟨C, X⟩ s.t. Tr X = 1, X ⪰ 0`, whose optimum is `λ_max(C)`.
fn lambda_max_problem(cost: CMatrix, field: Field) -> SdpProblem {
    let n = cost.nrows();
    SdpProblem::builder(field, vec![n])
        .objective(0, cost)
        .constraint(vec![BlockTerm { block: 0, matrix: SparseHermitian::identity(n) }], 1.0)
        .build()
        .unwrap()
}

#[test]
fn lambda_max_family_matches_eigh() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 2..=8 {
        for field in [Field::Real, Field::Complex] {
            let cost = random_hermitian(&mut rng, n, field);
            let oracle = eigh(&cost).unwrap().lambda_max();
            let sol = solve(&lambda_max_problem(cost, field), 1e-8).unwrap();
            assert!(sol.is_optimal(), "n={n}: {:?}", sol.status);
            assert!((sol.primal_value - oracle).abs() <= 1e-7, "n={n} {field:?}");
            assert!((sol.dual_value - oracle).abs() <= 1e-7);
        }
    }
}

#[test]
fn scalar_equality() {
    let prob = SdpProblem::builder(Field::Real, vec![1])
        .objective(0, identity(1))
        .constraint(vec![BlockTerm { block: 0, matrix: SparseHermitian::identity(1) }], 0.7)
        .build()
        .unwrap();
    let sol = solve(&prob, 1e-8).unwrap();
    assert!(sol.is_optimal());
    assert!((sol.primal_value - 0.7).abs() < 1e-9);
}

/// Two orthogonal states are perfectly distinguishable.
#[test]
fn orthogonal_discrimination_is_perfect() {
    let rhos = [diag(&[1.0, 0.0]), diag(&[0.0, 1.0])];
    let mut builder = SdpProblem::builder(Field::Real, vec![2, 2]);
    for (k, rho) in rhos.iter().enumerate() {
        builder = builder.objective(k, rho.scale(0.5));
    }
    for f in hermitian_basis(2, Field::Real) {
        let rhs = f.inner(&identity(2));
        let terms = (0..2).map(|k| BlockTerm { block: k, matrix: f.clone() }).collect();
        builder.push_constraint(terms, rhs);
    }
    let sol = solve(&builder.build().unwrap(), 1e-8).unwrap();
    assert!(sol.is_optimal());
    assert!((sol.primal_value - 1.0).abs() < 1e-7);
}

#[test]
fn verifier_accepts_solver_output_and_rejects_broken_equality() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let prob = lambda_max_problem(random_hermitian(&mut rng, 4, Field::Complex), Field::Complex);
    let target = 1e-8;
    let sol = solve(&prob, target).unwrap();
    let report = verify_feasible_pair(&prob, &sol.x, &sol.y, None).unwrap();
    assert!(report.primal_ok && report.dual_ok, "{report:?}");
    assert!(report.gap.abs() <= 2.0 * target * (1.0 + sol.primal_value.abs()));

    let halved: Vec<CMatrix> = sol.x.iter().map(|x| x.scale(0.5)).collect();
    let report = verify_feasible_pair(&prob, &halved, &sol.y, None).unwrap();
    assert!(!report.primal_ok);
}

#[test]
fn solver_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let prob = lambda_max_problem(random_hermitian(&mut rng, 6, Field::Complex), Field::Complex);
    let a = solve(&prob, 1e-8).unwrap();
    let b = solve(&prob, 1e-8).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.primal_value.to_bits(), b.primal_value.to_bits());
    assert_eq!(a.dual_value.to_bits(), b.dual_value.to_bits());
}

#[test]
fn dependent_constraints_are_rejected() {
    let err = SdpProblem::builder(Field::Real, vec![2])
        .constraint(vec![BlockTerm { block: 0, matrix: SparseHermitian::identity(2) }], 1.0)
        .constraint(vec![BlockTerm { block: 0, matrix: SparseHermitian::identity(2) }], 2.0)
        .build()
        .unwrap_err();
    assert!(matches!(err, SdpError::DependentConstraints { .. }));
}

#[test]
fn real_program_rejects_complex_data() {
    let mut f = SparseHermitian::new(2);
    f.add(0, 1, c(0.0, 1.0));
    let err = SdpProblem::builder(Field::Real, vec![2])
        .constraint(vec![BlockTerm { block: 0, matrix: f }], 0.0)
        .build()
        .unwrap_err();
    assert!(matches!(err, SdpError::ComplexDataInRealProgram(_)));
}

#[test]
fn hermitian_basis_recovers_entries() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let m = random_hermitian(&mut rng, 3, Field::Complex);
    let basis = hermitian_basis(3, Field::Complex);
    assert_eq!(basis.len(), 9);
    let recon = basis.iter().fold(CMatrix::zeros(3, 3), |acc, f| {
        let coeff = f.inner(&m) / f.inner(&f.to_dense());
        acc + f.to_dense().scale(coeff)
    });
    assert!(crate::matlin::max_abs(&(recon - m)) < 1e-14);
    assert_eq!(hermitian_basis(3, Field::Real).len(), 6);
}

/// Random program with a trace constraint, so that any `y` can be completed
/// to a dual feasible point by shifting the trace multiplier.
struct RandomProgram {
    prob: SdpProblem,
    interior: Vec<CMatrix>,
}

fn random_program(rng: &mut impl Rng) -> RandomProgram {
    let blocks: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(2..=4)).collect();
    let interior: Vec<CMatrix> = blocks
        .iter()
        .map(|&n| {
            let g = random_hermitian(rng, n, Field::Complex);
            &g * &g + identity(n)
        })
        .collect();
    let mut builder = SdpProblem::builder(Field::Complex, blocks.clone());
    for (k, &n) in blocks.iter().enumerate() {
        builder = builder.objective(k, random_hermitian(rng, n, Field::Complex));
    }
    let trace_terms: Vec<BlockTerm> = blocks
        .iter()
        .enumerate()
        .map(|(k, &n)| BlockTerm { block: k, matrix: SparseHermitian::identity(n) })
        .collect();
    let trace: f64 = interior.iter().map(|x| crate::matlin::trace(x).re).sum();
    builder.push_constraint(trace_terms, trace);
    for _ in 0..rng.gen_range(1..=3) {
        let k = rng.gen_range(0..blocks.len());
        let a = random_hermitian(rng, blocks[k], Field::Complex);
        let rhs = crate::matlin::inner(&a, &interior[k]);
        builder.push_constraint(vec![BlockTerm { block: k, matrix: SparseHermitian::from_dense(&a) }], rhs);
    }
    RandomProgram { prob: builder.build().unwrap(), interior }
}

fn min_eig(blocks: &[CMatrix]) -> f64 {
    blocks.iter().map(|b| crate::matlin::lambda_min(b).unwrap()).fold(f64::INFINITY, f64::min)
}

/// Random primal point: a random PSD matrix projected onto the affine
/// constraints, pulled toward the interior point until PSD.
fn random_primal(rng: &mut impl Rng, rp: &RandomProgram) -> Vec<CMatrix> {
    let prob = &rp.prob;
    let raw: Vec<CMatrix> = prob
        .blocks()
        .iter()
        .map(|&n| {
            let g = random_hermitian(rng, n, Field::Complex);
            &g * &g
        })
        .collect();
    let m = prob.num_constraints();
    let mut gram = nalgebra::DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        let col = prob.apply(&prob.adjoint(&e));
        for j in 0..m {
            gram[(j, i)] = col[j];
        }
    }
    let resid: Vec<f64> = prob.rhs().iter().zip(prob.apply(&raw)).map(|(b, a)| b - a).collect();
    let lambda = gram.lu().solve(&nalgebra::DVector::from_vec(resid)).unwrap();
    let correction = prob.adjoint(lambda.as_slice());
    let projected: Vec<CMatrix> = raw.iter().zip(&correction).map(|(a, b)| a + b).collect();
    let mut t = 1.0;
    loop {
        let mix: Vec<CMatrix> = projected
            .iter()
            .zip(&rp.interior)
            .map(|(p, x0)| p.scale(t) + x0.scale(1.0 - t))
            .collect();
        if min_eig(&mix) >= 0.0 {
            return mix;
        }
        t *= 0.5;
    }
}

fn random_dual(rng: &mut impl Rng, prob: &SdpProblem) -> Vec<f64> {
    let mut y: Vec<f64> = (0..prob.num_constraints()).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let lmin = min_eig(&prob.dual_slack(&y));
    if lmin < 0.0 {
        y[0] += -lmin + rng.gen_range(0.0..0.5);
    }
    y
}

#[test]
fn weak_duality_on_random_feasible_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..200 {
        let rp = random_program(&mut rng);
        let x = random_primal(&mut rng, &rp);
        let y = random_dual(&mut rng, &rp.prob);
        let report = verify_feasible_pair(&rp.prob, &x, &y, None).unwrap();
        assert!(report.primal_ok && report.dual_ok, "{report:?}");
        assert!(report.gap >= -1e-9, "{report:?}");
    }
}

#[test]
fn random_programs_reach_the_dual_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..20 {
        let rp = random_program(&mut rng);
        let sol = solve(&rp.prob, 1e-8).unwrap();
        assert!(sol.is_optimal(), "{:?} after {}", sol.status, sol.iterations);
        let report = verify_feasible_pair(&rp.prob, &sol.x, &sol.y, None).unwrap();
        assert!(report.primal_ok && report.dual_ok, "{report:?}");
        assert!(report.gap.abs() <= 2e-8 * (1.0 + sol.primal_value.abs()));
    }
}

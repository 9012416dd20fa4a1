use dieroll::balancing::*;
use dieroll::bounds::theorem1_bound;
use dieroll::cheating::{self, default_eps, subset_alice_certificate, subset_bob_certificate, DEFAULT_TOL};
use dieroll::matlin::{self, c, BipartiteDims, CVector};
use dieroll::protocol::{build_subset_protocol, reduced_states, DricProtocol};
use dieroll::sdp::SolverOptions;
use dieroll::Rational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_protocol(rng: &mut impl Rng, d: usize, dim_a: usize, dim_b: usize) -> DricProtocol {
    let dims = BipartiteDims::new(dim_a, dim_b).unwrap();
    let states = (0..d)
        .map(|_| {
            let v = CVector::from_fn(dims.total(), |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            v.unscale(v.norm())
        })
        .collect();
    DricProtocol::new(d, dims, states, "random").unwrap()
}

#[test]
fn reduced_state_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let protocols = [build_subset_protocol(4, 2).unwrap(), random_protocol(&mut rng, 3, 2, 3)];
    for p in &protocols {
        for direction in [Direction::ReduceBob, Direction::ReduceAlice] {
            let t = 0.37;
            let q = extend_protocol(p, direction, t).unwrap();
            let extra = if direction == Direction::ReduceBob { 1 } else { p.outcomes() };
            assert_eq!(q.dims().dim_a, p.dims().dim_a + extra);
            assert_eq!(q.dims().dim_b, p.dims().dim_b + extra);
            for (got, want) in reduced_states(&q).iter().zip(expected_reduced_states(p, direction, t)) {
                assert!(matlin::max_abs(&(got - want)) <= 1e-12);
            }
        }
    }
}

#[test]
fn overlaps_after_extension() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let p = random_protocol(&mut rng, 4, 2, 2);
    let g = p.gram();
    let t = 0.3;
    let bob = extend_reduce_bob(&p, t).unwrap().gram();
    let alice = extend_reduce_alice(&p, t).unwrap().gram();
    for i in 0..4 {
        for j in 0..4 {
            assert!((bob[(i, j)] - (g[(i, j)] * (1.0 - t) + c(t, 0.0))).norm() < 1e-12);
            let want = if i == j { c(1.0, 0.0) } else { g[(i, j)] * (1.0 - t) };
            assert!((alice[(i, j)] - want).norm() < 1e-12);
        }
    }
    let q = extend_reduce_bob(&build_subset_protocol(3, 1).unwrap(), 0.5).unwrap().gram();
    assert!((q[(0, 1)].re - 0.5).abs() < 1e-15);
}

#[test]
fn extension_limits() {
    let p = build_subset_protocol(3, 2).unwrap();
    let near_zero = extend_reduce_alice(&p, 1e-14).unwrap();
    let embedded = extend_reduce_alice(&p, 0.5).unwrap().dims();
    assert_eq!(near_zero.dims(), embedded);
    for (a, psi) in p.states().iter().enumerate() {
        for ia in 0..3 {
            for ib in 0..3 {
                let z = near_zero.state(a)[embedded.index(ia, ib)] - psi[p.dims().index(ia, ib)];
                assert!(z.norm() < 1e-7);
            }
        }
    }
    let near_one = extend_reduce_alice(&p, 1.0 - 1e-12).unwrap().gram();
    assert!(near_one[(0, 1)].norm() < 1e-11);
    assert_eq!(extend_reduce_bob(&p, 0.0).unwrap_err(), BalanceError::WeightOutOfRange(0.0));
    assert!(extend_reduce_alice(&p, 1.0).is_err());
}

#[test]
fn reduce_bob_transport_on_m1() {
    let (d, m, t) = (3, 1, 0.5);
    let p = build_subset_protocol(d, m).unwrap();
    let eps = default_eps(d);
    let (bob, alice) = transport_certificates(
        &p,
        Direction::ReduceBob,
        t,
        &subset_bob_certificate(d, m).unwrap(),
        &subset_alice_certificate(d, m, eps).unwrap(),
    )
    .unwrap();
    let q = extend_reduce_bob(&p, t).unwrap();
    let vb = cheating::verify_bob_certificate(&q, &bob, DEFAULT_TOL).unwrap().value;
    assert!((vb - 2.0 / 3.0).abs() < 1e-12);
    let va = cheating::verify_alice_certificate(&q, &alice, DEFAULT_TOL).unwrap().value;
    assert!((va - ((1.0 - t) / 3.0 + t)).abs() <= 1e-12 + alice.slack);
    assert!((alice.slack - (1.0 - t) * eps * 3.0).abs() < 1e-20);
}

#[test]
fn reduce_alice_transport_at_optimum() {
    let r = theorem1_pipeline(3).unwrap();
    assert_eq!(r.direction, Some(Direction::ReduceAlice));
    assert_eq!(r.t, Rational::new(1, 5));
    let (alice, bob) = r.verify(DEFAULT_TOL).unwrap();
    assert!((alice - 0.6).abs() <= 1e-12 + r.alice_certificate.slack);
    assert!((bob - 0.6).abs() < 1e-12);
}

#[test]
fn transport_is_continuous_at_zero() {
    let (d, m) = (5, 2);
    let bob = subset_bob_certificate(d, m).unwrap();
    let alice = subset_alice_certificate(d, m, default_eps(d)).unwrap();
    for direction in [Direction::ReduceBob, Direction::ReduceAlice] {
        let b = transport_bob_certificate(d, direction, 1e-12, &bob).unwrap();
        let a = transport_alice_certificate(d, direction, 1e-12, &alice).unwrap();
        assert!((b.value() - bob.value()).abs() < 1e-11);
        assert!((a.s - alice.s).abs() < 1e-9);
    }
}

#[test]
fn transport_rejects_singular_certificates() {
    let mut alice = subset_alice_certificate(3, 2, 1e-8).unwrap();
    alice.z[1][(2, 2)] = c(0.0, 0.0);
    let err = transport_alice_certificate(3, Direction::ReduceBob, 0.5, &alice).unwrap_err();
    assert!(matches!(err, BalanceError::NotStrictlyFeasible { index: 2, .. }));
}

#[test]
fn optimal_t_examples() {
    let third = Rational::new(1, 3);
    let one = Rational::from_integer(1);
    let opt = optimal_t(third, one, 3, Direction::ReduceBob).unwrap();
    assert_eq!(opt, OptimalT { t: Rational::new(1, 2), no_op: false });
    assert_eq!(corollary_bound(third, one, 3, Direction::ReduceBob), Rational::new(2, 3));

    let same = optimal_t(third, third, 3, Direction::ReduceBob).unwrap();
    assert!(same.no_op && same.t == Rational::from_integer(0));
    assert_eq!(corollary_bound(third, third, 3, Direction::ReduceAlice), third);

    assert!(matches!(
        optimal_t(one, third, 3, Direction::ReduceBob),
        Err(BalanceError::WrongOrdering { direction: Direction::ReduceBob, .. })
    ));
    let (alpha, beta) = (Rational::new(2, 3), Rational::new(1, 2));
    assert_eq!(optimal_t(alpha, beta, 3, Direction::ReduceAlice).unwrap().t, Rational::new(1, 5));
    assert_eq!(corollary_bound(alpha, beta, 3, Direction::ReduceAlice), Rational::new(3, 5));
    assert_eq!(proposition2_bound(alpha, beta, 3), Rational::new(3, 5));

    let t = optimal_t(0.25f64, 0.75, 4, Direction::ReduceBob).unwrap().t;
    assert!((t - 0.5 / 1.25).abs() < 1e-15);
    assert!(optimal_t(0.0f64, 0.5, 4, Direction::ReduceBob).is_err());
}

#[test]
fn lemma_bounds_meet_at_optimal_t() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..200 {
        let d = rng.gen_range(2..=20usize);
        // cheat values never fall below 1/D
        let lo = (50 + d as i64 - 1) / d as i64;
        let alpha = Rational::new(rng.gen_range(lo..=50), 50);
        let beta = Rational::new(rng.gen_range(lo..=50), 50);
        if alpha == beta {
            continue;
        }
        let dir = direction_for(alpha, beta);
        let t = optimal_t(alpha, beta, d, dir).unwrap().t;
        assert!(t > Rational::from_integer(0) && t < Rational::from_integer(1));
        let (a2, b2) = lemma_bounds(alpha, beta, d, dir, t);
        assert_eq!(a2, b2);
        let bound = corollary_bound(alpha, beta, d, dir);
        assert_eq!(a2, bound);
        assert!(bound < alpha.max(beta));
    }
}

#[test]
fn pipeline_examples() {
    let r3 = theorem1_pipeline(3).unwrap();
    assert_eq!((r3.bound, r3.base.origin().describe()), (Rational::new(3, 5), "subset(m=2)".to_string()));
    let r4 = theorem1_pipeline(4).unwrap();
    assert_eq!(r4.bound, Rational::new(1, 2));
    assert!(r4.direction.is_none() && r4.t == Rational::from_integer(0));
    assert_eq!(r4.transformed, r4.base);
    let r10 = theorem1_pipeline(10).unwrap();
    assert_eq!(r10.bound, Rational::new(13, 40));
    assert_eq!(r10.direction, Some(Direction::ReduceBob));
    assert_eq!(r10.branches.len(), 2);
    // D = 6: both branches give 4/9; the smaller basis (m = 2) is kept.
    let r6 = theorem1_pipeline(6).unwrap();
    assert_eq!(r6.bound, Rational::new(4, 9));
    assert!(r6.branches.iter().all(|b| b.bound == Rational::new(4, 9)));
    assert_eq!(r6.transformed.dims().dim_b, 16);
}

#[test]
fn pipeline_matches_closed_form_and_certificates_verify() {
    for d in 2..=12 {
        let r = theorem1_pipeline(d).unwrap();
        assert_eq!(r.bound, theorem1_bound(d), "D={d}");
        let (alice, bob) = r.verify(DEFAULT_TOL).unwrap();
        let (a_lemma, b_lemma) = r.lemma_values();
        let (a_lemma, b_lemma) = (dieroll::bounds::to_f64(a_lemma), dieroll::bounds::to_f64(b_lemma));
        let slack = r.alice_certificate.slack;
        assert!(alice <= a_lemma + 1e-6 + slack && alice >= a_lemma - 1e-12, "D={d}");
        assert!((bob - b_lemma).abs() <= 1e-6, "D={d}");
    }
}

#[test]
fn transformed_protocols_solve_below_the_bound() {
    let opts = SolverOptions::default();
    for d in 2..=5 {
        let r = theorem1_pipeline(d).unwrap();
        let bound = dieroll::bounds::to_f64(r.bound);
        let alice = cheating::solve_alice(&r.transformed, &opts).unwrap();
        let bob = cheating::solve_bob(&r.transformed, &opts).unwrap();
        assert!(alice.primal <= bound + 1e-6 && bob.primal <= bound + 1e-6, "D={d}");
        assert!(alice.primal * bob.primal >= 1.0 / d as f64 - 1e-6);
    }
}

#[test]
fn balance_on_random_rational_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..10 {
        let p = random_protocol(&mut rng, 3, 2, 2);
        // Trivially feasible certificates: X = Σρ_a/D (value 1), Z_a = I, s = D.
        let rhos = reduced_states(&p);
        let x = rhos.iter().fold(matlin::identity(2).scale(0.0), |acc, r| acc + r.unscale(3.0));
        let bob = cheating::BobCertificate { x };
        let alice = cheating::AliceCertificate {
            s: 3.0,
            z: vec![matlin::identity(2); 3],
            form: cheating::CertificateForm::Inverse { eps: 0.0 },
            slack: 0.0,
        };
        let t = rng.gen_range(0.05..0.95);
        for direction in [Direction::ReduceBob, Direction::ReduceAlice] {
            let (b, a) = transport_certificates(&p, direction, t, &bob, &alice).unwrap();
            let q = extend_protocol(&p, direction, t).unwrap();
            let vb = cheating::verify_bob_certificate(&q, &b, DEFAULT_TOL).unwrap().value;
            let va = cheating::verify_alice_certificate(&q, &a, DEFAULT_TOL).unwrap().value;
            let (a_lemma, b_lemma) = lemma_bounds(3.0, 1.0, 3, direction, t);
            assert!((vb - b_lemma).abs() < 1e-12);
            assert!((va - a_lemma).abs() <= 1e-12 + a.slack);
        }
    }
}

use proptest::prelude::*;
use weightlab::exponents::{solve_consistency, Exponent, ExponentTuple, PartialTuple};
use weightlab::extrapolate::{check_multilinear, HarnessOptions, MultiParams, ProductOperator, Verdict};
use weightlab::maximal::AscentBudget;
use weightlab::space::make_dyadic_space;

fn ex(r: f64) -> Exponent {
    Exponent::from_recip(r).unwrap()
}

fn e(s: &str) -> Exponent {
    s.parse().unwrap()
}

fn small(trials: usize, seed: u64) -> HarnessOptions {
    HarnessOptions {
        trials,
        seed,
        dual_samples: 4,
        opnorm_budget: AscentBudget {
            restarts: 2,
            iterations: 60,
            seed,
        },
        ..HarnessOptions::default()
    }
}

proptest! {
    #[test]
    fn solved_tuples_are_consistent(q0 in 0.0f64..1.0, p0 in 0.0f64..1.0, s0 in 0.0f64..1.0, r0 in 0.2f64..1.0, g in -0.2f64..0.2) {
        let t = ExponentTuple::from_base(ex(q0), ex(p0), ex(s0), ex(r0), g);
        prop_assume!(t.is_ok());
        let t = t.unwrap();
        prop_assert!(t.consistency_residual() <= 1e-12);
        prop_assert!((t.q.recip() - q0 - g).abs() <= 1e-12);
        prop_assert!((t.r0.recip() - t.r.recip() - g).abs() <= 1e-12);

        // Any one known pair fixes the shift; the rest follow.
        let known = PartialTuple { p0: Some(t.p0), p: Some(t.p), s0: Some(t.s0), q: Some(t.q), r: Some(t.r), ..Default::default() };
        let again = solve_consistency(&known, None).unwrap().complete().unwrap();
        for (a, b) in [(again.q0, t.q0), (again.s, t.s), (again.r0, t.r0)] {
            prop_assert!((a.recip() - b.recip()).abs() <= 1e-12);
        }
    }
}

#[test]
fn inconsistent_pairs_are_rejected() {
    let known = PartialTuple {
        q0: Some(e("2")),
        q: Some(e("4")),
        p0: Some(e("2")),
        p: Some(e("1")),
        ..Default::default()
    };
    assert!(solve_consistency(&known, None).is_err());
    assert!(solve_consistency(&PartialTuple::default(), None).is_err());
}

#[test]
fn product_chain_passes() {
    let b = make_dyadic_space(3).unwrap();
    let params = MultiParams::uniform(2, e("2"), e("4"), e("2"), e("2"), -0.125).unwrap();
    let report = check_multilinear(&ProductOperator::new(2).unwrap(), &b, &params, &small(6, 11)).unwrap();
    assert_eq!(report.verdict, Verdict::Pass, "{:?}", report.notes);
    assert!(report.chain_all_pass && report.chain_implies_target);
    for t in &report.trials {
        assert!(t.target_lhs <= t.target_rhs.unwrap() * (1.0 + 1e-6));
        assert!(!t.chain_checks.is_empty());
    }
}

#[test]
fn constants_invariant_under_base_shift() {
    // Moving (q0, p0) by the same reciprocal leaves the rescaled parameters and
    // hence the constants unchanged.
    let b = make_dyadic_space(3).unwrap();
    let op = ProductOperator::identity();
    let a = MultiParams::uniform(1, e("2"), e("2"), e("2"), e("2"), -0.25).unwrap();
    let c = MultiParams::uniform(1, e("3"), e("3/2"), e("2"), e("2"), -0.25).unwrap();
    let (ra, rc) = (check_multilinear(&op, &b, &a, &small(4, 5)).unwrap(), check_multilinear(&op, &b, &c, &small(4, 5)).unwrap());
    assert_eq!(ra.trials.len(), rc.trials.len());
    for (x, y) in ra.trials.iter().zip(&rc.trials) {
        assert_eq!(x.constants, y.constants);
    }
    assert_eq!(rc.verdict, Verdict::Pass);
}

use super::*;
use crate::space::make_dyadic_space;

fn e(s: &str) -> Exponent {
    s.parse().unwrap()
}

fn quick(trials: usize) -> HarnessOptions {
    HarnessOptions {
        trials,
        dual_samples: 4,
        opnorm_budget: AscentBudget {
            restarts: 4,
            iterations: 60,
            seed: 0,
        },
        ..HarnessOptions::default()
    }
}

fn endpoint() -> MultiParams {
    MultiParams::uniform(1, e("2"), e("2/3"), e("1"), e("inf"), -0.5).unwrap()
}

fn assert_clean(report: &BoundReport) {
    if let Some(c) = &report.counterexample {
        panic!("counterexample: {:?}", c.failed_checks().collect::<Vec<_>>());
    }
    for t in &report.trials {
        assert!(t.chain_ok, "trial {}: {:?}", t.index, t.failed_checks().collect::<Vec<_>>());
    }
    assert_eq!(report.verdict, Verdict::Pass);
    assert!(report.chain_implies_target);
}

#[test]
fn dual_exponents_of_the_showcase_tuple() {
    let d = endpoint().duals().unwrap();
    assert!((d.lambda - 0.5).abs() < 1e-15);
    assert!((d.q0_tilde.recip() - 0.25).abs() < 1e-15);
    assert!(d.q1_tilde.is_infinite());
    assert!((d.u0[0].recip() - 1.5).abs() < 1e-15);
    assert!((d.u1[0].recip() - 2.0).abs() < 1e-15);
}

#[test]
fn split_exponents_sum_to_the_dual() {
    let p = MultiParams::new(e("2"), vec![e("4"), e("3")], vec![e("2"), e("3")], vec![e("2"), e("3/2")], vec![-0.125, 0.1]).unwrap();
    let d = p.duals().unwrap();
    let sum: f64 = d.u1.iter().map(|u| d.lambda * u.recip()).sum();
    assert!((sum - d.q1_tilde.dual().unwrap().recip()).abs() < 1e-12);
    for j in 0..2 {
        assert!(p.factor_params(j, &d).unwrap().residual() < 1e-12);
    }
}

#[test]
fn next_level_starts_from_targets() {
    let p = endpoint();
    let q = p.next_level(vec![0.0]).unwrap();
    assert!(q.q0.is_infinite());
    assert!((q.p0[0].recip() - 1.0).abs() < 1e-15);
    assert!((q.s0[0].recip() - 0.5).abs() < 1e-15);
}

#[test]
fn embedding_constant_directions() {
    let masses = [0.25; 4];
    assert!((embedding_constant(&masses, 1.0, 0.5) - 1.0f64.powf(0.5)).abs() < 1e-15);
    assert!((embedding_constant(&masses, 0.5, 1.5) - 0.25f64.powf(-1.0)).abs() < 1e-12);
    let g = [1.0, 0.0, 0.0, 0.0];
    let lhs = lp_norm(&g, &masses, e("2"));
    let rhs = embedding_constant(&masses, 0.5, 1.5) * lp_norm(&g, &masses, e("2/3"));
    assert!(lhs <= rhs * (1.0 + 1e-12));
}

#[test]
fn envelope_is_a_right_continuous_step() {
    let env = Envelope::from_points(vec![(2.0, 3.0), (1.0, 1.0), (4.0, 2.0)]);
    assert_eq!(env.eval(0.5), None);
    assert_eq!(env.eval(1.0), Some(1.0));
    assert_eq!(env.eval(1.9), Some(1.0));
    assert_eq!(env.eval(2.0), Some(3.0));
    assert_eq!(env.eval(4.0), Some(3.0));
    assert_eq!(env.eval(4.1), None);
    assert_eq!(Envelope::default().eval(1.0), None);
}

#[test]
fn identity_on_showcase_tuple_passes() {
    let b = make_dyadic_space(3).unwrap();
    let r = check_multilinear(&ProductOperator::identity(), &b, &endpoint(), &quick(4)).unwrap();
    assert_clean(&r);
    assert!(r.trials.iter().all(|t| t.dual_functions == 5));
}

#[test]
fn linear_entry_point_matches_one_input_product() {
    let b = make_dyadic_space(3).unwrap();
    let t = ExponentTuple::from_base(e("2"), e("2"), e("2"), e("2"), -0.25).unwrap();
    let a = check_linear(&ProductOperator::identity(), &b, &t, &quick(3)).unwrap();
    let m = check_multilinear(&ProductOperator::new(1).unwrap(), &b, &MultiParams::linear(&t).unwrap(), &quick(3)).unwrap();
    assert_eq!(a.trials, m.trials);
}

#[test]
fn bilinear_product_passes_including_infinite_target() {
    let b = make_dyadic_space(3).unwrap();
    let p = MultiParams::uniform(2, e("2"), e("4"), e("2"), e("2"), -0.25).unwrap();
    assert!(p.q1().unwrap().is_infinite());
    assert_clean(&check_multilinear(&ProductOperator::new(2).unwrap(), &b, &p, &quick(3)).unwrap());
}

#[test]
fn positive_shift_to_unit_exponent_passes() {
    let b = make_dyadic_space(3).unwrap();
    let p = MultiParams::uniform(1, e("2"), e("2"), e("2"), e("1"), 0.5).unwrap();
    assert_eq!(p.p1(0).unwrap().recip(), 1.0);
    assert_clean(&check_multilinear(&ProductOperator::identity(), &b, &p, &quick(3)).unwrap());
}

#[test]
fn constants_ignore_q0_and_p0() {
    let b = make_dyadic_space(3).unwrap();
    let a = MultiParams::uniform(1, e("2"), e("2"), e("2"), e("2"), -0.25).unwrap();
    let c = MultiParams::uniform(1, e("3"), e("3/2"), e("2"), e("2"), -0.25).unwrap();
    let ra = check_multilinear(&ProductOperator::identity(), &b, &a, &quick(3)).unwrap();
    let rc = check_multilinear(&ProductOperator::identity(), &b, &c, &quick(3)).unwrap();
    for (x, y) in ra.trials.iter().zip(&rc.trials) {
        assert_eq!(x.constants, y.constants);
    }
}

#[test]
fn wrong_arity_is_rejected() {
    let b = make_dyadic_space(2).unwrap();
    let err = check_multilinear(&ProductOperator::new(2).unwrap(), &b, &endpoint(), &quick(1)).unwrap_err();
    assert!(matches!(err, ExtrapolateError::Arity { .. }));
}

#[test]
fn mixed_two_levels_pass_on_small_product() {
    let b = make_dyadic_space(2).unwrap();
    let params = MixedParams {
        inner: MultiParams::uniform(1, e("2"), e("2"), e("2"), e("2"), -0.125).unwrap(),
        outer_gamma_recip: vec![-0.125],
    };
    let r = check_mixed(&ProductOperator::identity(), &b, &b, &params, &quick(2), 2).unwrap();
    assert_clean(&r);
    assert!(r.trials[0].chain_checks.iter().any(|c| c.name.starts_with("inner level")));
}

#[test]
fn mixed_needs_a_fixed_base_constant() {
    let b = make_dyadic_space(2).unwrap();
    let params = MixedParams {
        inner: MultiParams::uniform(1, e("2"), e("2"), e("2"), e("2"), -0.125).unwrap(),
        outer_gamma_recip: vec![0.0],
    };
    let op = MaximalOperator::new(b.clone());
    assert!(matches!(check_mixed(&op, &b, &b, &params, &quick(1), 1), Err(ExtrapolateError::Unsupported(_))));
}

#[test]
fn weak_type_passes_and_grid_hits_the_sup() {
    let b = make_dyadic_space(3).unwrap();
    let r = check_weak_type(&ProductOperator::identity(), &b, &endpoint(), &quick(2), 6).unwrap();
    assert_clean(&r);
}

#[test]
fn sequence_of_length_one_is_the_scalar_case() {
    let b = make_dyadic_space(3).unwrap();
    let p = MultiParams::uniform(1, e("2"), e("2"), e("2"), e("2"), -0.25).unwrap();
    let s = check_multilinear(&ProductOperator::identity(), &b, &p, &quick(3)).unwrap();
    let v = check_vector_valued(&ProductOperator::identity(), &b, &p, 1, &quick(3)).unwrap();
    for (x, y) in s.trials.iter().zip(&v.trials) {
        assert!((x.target_lhs - y.target_lhs).abs() <= 1e-12 * x.target_lhs);
    }
}

#[test]
fn vector_valued_product_passes() {
    let b = make_dyadic_space(3).unwrap();
    let p = MultiParams::uniform(2, e("2"), e("4"), e("2"), e("2"), -0.125).unwrap();
    assert_clean(&check_vector_valued(&ProductOperator::new(2).unwrap(), &b, &p, 4, &quick(2)).unwrap());
}

#[test]
fn sequence_exponents_split_the_outer_one() {
    let p = MultiParams::new(e("1"), vec![e("4"), e("2")], vec![e("2"); 2], vec![e("2"); 2], vec![0.0; 2]).unwrap();
    let (u, uj) = sequence_exponents(&p).unwrap();
    assert!((u.recip() - 0.75).abs() < 1e-15);
    let sum: f64 = uj.iter().map(|x| x.recip()).sum();
    assert!((sum - u.recip()).abs() < 1e-15);
}

#[test]
fn maximal_envelope_is_undefined_outside_its_range() {
    let b = make_dyadic_space(3).unwrap();
    let p = MultiParams::uniform(1, e("2"), e("2"), e("2"), e("2"), 0.0).unwrap();
    let cal = Calibration {
        count: 8,
        functions: 2,
        ..Calibration::default()
    };
    let op = build_operator(&OperatorSpec::Maximal { calibration: cal }, &b, &p).unwrap();
    let ones = [Weight::ones(8)];
    let ctx = PhiContext {
        basis: &b,
        params: &p,
        ratios: &ones,
    };
    let (lo, hi) = (op.phi(&[0.0], &ctx), op.phi(&[f64::MAX], &ctx));
    assert_eq!(lo, None);
    assert_eq!(hi, None);
    let r = check_multilinear(op.as_ref(), &b, &p, &quick(3)).unwrap();
    assert_eq!(r.trials.len(), 3);
}

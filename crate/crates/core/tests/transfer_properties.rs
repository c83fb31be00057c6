use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use weightlab::exponents::Exponent;
use weightlab::maximal::AscentBudget;
use weightlab::transfer::{
    dual_hom, dual_pairing_check, duality_form, homomorphism_duality_check, transference_check, FiniteAbelianGroup, GroupHom, Multiplier, TransferVerdict,
};
use weightlab::weights::Weight;

fn complex(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Complex64::new(a, b)), n)
}

fn weight(n: usize) -> impl Strategy<Value = Weight> {
    prop::collection::vec(-2.0f64..2.0, n).prop_map(|logs| Weight::new(logs.into_iter().map(f64::exp).collect()).unwrap())
}

fn cyclic(n: usize) -> FiniteAbelianGroup {
    FiniteAbelianGroup::cyclic(n).unwrap()
}

/// `χ ↦ a χ` from Z_h to Z_g; `a` must be a multiple of `g / gcd(g, h)`.
fn scaling(h: usize, g: usize, a: i64) -> GroupHom {
    GroupHom::new(cyclic(h), cyclic(g), vec![vec![a]]).unwrap()
}

/// A homomorphism between two small groups, picked by index.
fn hom(i: usize, k: i64) -> GroupHom {
    match i % 4 {
        0 => scaling(4, 8, 2 * k),
        1 => scaling(6, 12, 2 * k),
        2 => scaling(16, 16, k),
        _ => GroupHom::new(FiniteAbelianGroup::new(vec![2, 4]).unwrap(), FiniteAbelianGroup::new(vec![4, 4]).unwrap(), vec![vec![2 * k, k], vec![0, k]]).unwrap(),
    }
}

proptest! {
    #[test]
    fn duality_form_agrees(f in complex(12), g in complex(12), m in complex(12)) {
        let group = FiniteAbelianGroup::new(vec![3, 4]).unwrap();
        let form = duality_form(&group, &Multiplier::new(m).unwrap(), &f, &g).unwrap();
        prop_assert!(form.discrepancy() <= 1e-12 * (1.0 + form.spatial.norm()));
        prop_assert!((form.raw_sum - form.integral * 12.0).norm() <= 1e-12 * (1.0 + form.raw_sum.norm()));

        // The identity multiplier pairs f with g reflected.
        let one = duality_form(&group, &Multiplier::constant(12, Complex64::new(1.0, 0.0)), &f, &g).unwrap();
        let direct: Complex64 = (0..12).map(|x| f[x] * g[group.neg(x)]).sum();
        prop_assert!((one.spatial - direct).norm() <= 1e-12 * (1.0 + direct.norm()));
        prop_assert!((one.integral - direct).norm() <= 1e-12 * (1.0 + direct.norm()));
    }

    #[test]
    fn pairing_exact(i in 0usize..4, k in 0i64..8) {
        let phi = hom(i, k);
        let report = dual_pairing_check(&phi, &dual_hom(&phi)).unwrap();
        prop_assert_eq!(report.mismatches, 0);
        prop_assert_eq!(report.pairs_checked, phi.source().order() * phi.target().order());
    }

    #[test]
    fn homomorphism_duality(e in complex(4), m in complex(8), k in 0i64..4) {
        let phi = scaling(4, 8, 2 * k);
        let res = homomorphism_duality_check(&phi, &Multiplier::new(m.clone()).unwrap(), &e).unwrap();
        prop_assert!(res.residual <= 1e-12 * (1.0 + res.lhs.norm()));

        // Right side from characters written out on Z_4: ê(χ) = Σ_x e(x) e^{-2πi xχ/4}.
        let rhs: Complex64 = (0..4)
            .map(|chi| {
                let ehat: Complex64 = (0..4).map(|x| e[x] * Complex64::from_polar(1.0, -2.0 * PI * (x * chi) as f64 / 4.0)).sum();
                m[(2 * k as usize * chi) % 8] * ehat
            })
            .sum::<Complex64>()
            / 4.0;
        prop_assert!((res.rhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }

    #[test]
    fn transference_surjective(w in weight(4), m in prop::collection::vec(-2.0f64..2.0, 8), odd in 0i64..2) {
        // a = 2 or 6 from Z_4 to Z_8: the dual map is x ↦ x mod 4 or 3x mod 4, onto both times.
        let phi = scaling(4, 8, 2 + 4 * odd);
        let (g, h) = (phi.target().clone(), phi.source().clone());
        let rep = transference_check(&g, &h, &phi, &w, Exponent::TWO, &Multiplier::real(&m).unwrap(), &AscentBudget::default()).unwrap();
        prop_assert!(rep.surjective && rep.exact);
        prop_assert_eq!(rep.c, 1.0);
        prop_assert_eq!(rep.verdict, TransferVerdict::Holds);
        prop_assert!(rep.lhs <= rep.rhs * (1.0 + 1e-9));
    }
}

#[test]
fn identity_transfers_with_equality() {
    let g = cyclic(8);
    let w = Weight::new(vec![1.0, 2.0, 0.5, 3.0, 1.0, 4.0, 0.25, 1.5]).unwrap();
    let m = Multiplier::real(&[1.0, -0.5, 0.25, 2.0, 0.0, 1.0, -1.0, 0.5]).unwrap();
    let rep = transference_check(&g, &g, &GroupHom::identity(&g), &w, Exponent::TWO, &m, &AscentBudget::default()).unwrap();
    assert!((rep.lhs - rep.rhs).abs() <= 1e-12 * rep.rhs, "{rep:?}");
}

use proptest::prelude::*;
use weightlab::exponents::Exponent;
use weightlab::space::{make_cyclic_space, make_dyadic_space, product_space, SetBasis};
use weightlab::weights::{characteristic, Weight};

fn weight(n: usize) -> impl Strategy<Value = Weight> {
    prop::collection::vec(-3.0f64..3.0, n).prop_map(|logs| Weight::new(logs.into_iter().map(f64::exp).collect()).unwrap())
}

/// Reciprocal of an exponent, with infinity (zero) drawn often.
fn recip() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 4 => 0.0f64..2.0]
}

fn ex(r: f64) -> Exponent {
    Exponent::from_recip(r).unwrap()
}

fn ch(w: &Weight, v: &Weight, s: f64, r: f64, b: &SetBasis) -> f64 {
    characteristic(w, v, ex(s), ex(r), b).value
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn le(a: f64, b: f64) -> bool {
    a <= b * (1.0 + 1e-12)
}

fn bases() -> [SetBasis; 2] {
    [make_dyadic_space(3).unwrap(), make_cyclic_space(8).unwrap().0]
}

proptest! {
    #[test]
    fn symmetry_swaps_and_inverts(w in weight(8), v in weight(8), s in recip(), r in recip()) {
        for b in &bases() {
            let a = ch(&w, &v, s, r, b);
            prop_assert!(close(a, ch(&v.recip(), &w.recip(), r, s, b), 1e-12));
        }
    }

    #[test]
    fn power_rescaling(w in weight(8), v in weight(8), s in recip(), r in recip(), a in prop::sample::select(vec![1.0 / 3.0, 0.5, 2.0, 3.0])) {
        for b in &bases() {
            let base = ch(&w, &v, s, r, b);
            prop_assert!(close(ch(&w.powf(a), &v.powf(a), s * a, r * a, b), base.powf(a), 1e-10));
        }
    }

    #[test]
    fn holder_product(w1 in weight(8), v1 in weight(8), w2 in weight(8), v2 in weight(8), s1 in recip(), r1 in recip(), s2 in recip(), r2 in recip()) {
        for b in &bases() {
            let lhs = ch(&w1.mul(&w2), &v1.mul(&v2), s1 + s2, r1 + r2, b);
            prop_assert!(le(lhs, ch(&w1, &v1, s1, r1, b) * ch(&w2, &v2, s2, r2, b)));
        }
    }

    #[test]
    fn monotone_in_exponents(w in weight(8), v in weight(8), s in recip(), r in recip(), a in 0.0f64..=1.0, c in 0.0f64..=1.0) {
        for b in &bases() {
            prop_assert!(le(ch(&w, &v, s, r, b), ch(&w, &v, s * a, r * c, b)));
        }
    }

    #[test]
    fn interpolation(w0 in weight(8), v0 in weight(8), w1 in weight(8), v1 in weight(8), s0 in recip(), r0 in recip(), s1 in recip(), r1 in recip(), theta in 0.0f64..=1.0) {
        let mix = |a: &Weight, b: &Weight| a.powf(1.0 - theta).mul(&b.powf(theta));
        for b in &bases() {
            let lhs = ch(&mix(&w0, &w1), &mix(&v0, &v1), (1.0 - theta) * s0 + theta * s1, (1.0 - theta) * r0 + theta * r1, b);
            let rhs = ch(&w0, &v0, s0, r0, b).powf(1.0 - theta) * ch(&w1, &v1, s1, r1, b).powf(theta);
            prop_assert!(le(lhs, rhs));
        }
    }

    #[test]
    fn tensor_submultiplicative(a1 in weight(4), b1 in weight(4), a2 in weight(8), b2 in weight(8), s in recip(), r in recip()) {
        let (x, y) = (make_dyadic_space(2).unwrap(), make_dyadic_space(3).unwrap());
        let xy = product_space(&x, &y).unwrap();
        let lhs = ch(&a1.tensor(&a2), &b1.tensor(&b2), s, r, &xy);
        prop_assert!(le(lhs, ch(&a1, &b1, s, r, &x) * ch(&a2, &b2, s, r, &y)));
    }

    #[test]
    fn characteristic_at_least_one(w in weight(8), s in recip(), r in recip()) {
        // Hölder on each set gives [w, w]_(s, r) ≥ 1.
        for b in &bases() {
            prop_assert!(ch(&w, &w, s, r, b) >= 1.0 - 1e-12);
        }
    }
}

//! Lebesgue (quasi-)norms on finite measure spaces.
//!
//! Sums are rescaled by the largest entry, so large exponents do not overflow.

use crate::exponents::Exponent;

/// `(Σ μ_x |f_x|^p)^{1/p}`, or `max |f_x|` for `p = ∞`.
pub fn lp_norm(values: &[f64], masses: &[f64], p: Exponent) -> f64 {
    debug_assert_eq!(values.len(), masses.len());
    lp_norm_pairs(values.iter().zip(masses).map(|(v, m)| (*m, v.abs())), p)
}

/// The norm of `f` restricted to the points in `set`.
pub fn lp_norm_on(values: &[f64], masses: &[f64], set: &[usize], p: Exponent) -> f64 {
    lp_norm_pairs(set.iter().map(|&i| (masses[i], values[i].abs())), p)
}

/// `‖f w‖_{L^p}`.
pub fn weighted_norm(f: &[f64], w: &[f64], masses: &[f64], p: Exponent) -> f64 {
    debug_assert_eq!(f.len(), w.len());
    lp_norm_pairs(
        f.iter().zip(w).zip(masses).map(|((f, w), m)| (*m, (f * w).abs())),
        p,
    )
}

/// Norm of `(mass, |value|)` pairs; the iterator is consumed twice via clone.
pub fn lp_norm_pairs<I>(pairs: I, p: Exponent) -> f64
where
    I: Iterator<Item = (f64, f64)> + Clone,
{
    let top = pairs.clone().fold(0.0f64, |m, (_, v)| m.max(v));
    if p.is_infinite() || top == 0.0 || !top.is_finite() {
        return top;
    }
    let exp = 1.0 / p.recip();
    let sum: f64 = pairs.map(|(m, v)| m * (v / top).powf(exp)).sum();
    top * sum.powf(p.recip())
}

/// Mixed norm on `Ω_1 × Ω_2` with point `(x1, x2)` stored at `x1 * n2 + x2`:
/// the inner `L^{p1}` norm runs over `x1`, the outer `L^{p2}` over `x2`.
pub fn mixed_norm(values: &[f64], inner_masses: &[f64], outer_masses: &[f64], p1: Exponent, p2: Exponent) -> f64 {
    let inner = slice_norms(values, inner_masses, outer_masses.len(), p1);
    lp_norm(&inner, outer_masses, p2)
}

/// For each `x2`, the `L^{p1}` norm of `x1 ↦ values[x1 * n2 + x2]`.
pub fn slice_norms(values: &[f64], inner_masses: &[f64], n2: usize, p1: Exponent) -> Vec<f64> {
    debug_assert_eq!(values.len(), inner_masses.len() * n2);
    (0..n2)
        .map(|x2| {
            lp_norm_pairs(
                inner_masses
                    .iter()
                    .enumerate()
                    .map(move |(x1, m)| (*m, values[x1 * n2 + x2].abs())),
                p1,
            )
        })
        .collect()
}

/// `sup_λ λ ‖1_{|f w| > λ}‖_{L^p}`, evaluated exactly from the sorted values.
pub fn weak_norm(f: &[f64], w: &[f64], masses: &[f64], p: Exponent) -> f64 {
    let g: Vec<f64> = f.iter().zip(w).map(|(f, w)| (f * w).abs()).collect();
    weak_sup(&g, |set| lp_norm(set, masses, p))
}

/// `sup_λ λ ‖1_{|f| > λ} w‖_{L^p}`: the weight enters the level-set norm, not the level sets.
pub fn weak_norm_weighted_sets(f: &[f64], w: &[f64], masses: &[f64], p: Exponent) -> f64 {
    let g: Vec<f64> = f.iter().map(|f| f.abs()).collect();
    weak_sup(&g, |ind| weighted_norm(ind, w, masses, p))
}

/// `sup_λ λ N(1_{g > λ})` for a monotone set functional `N`. Between consecutive
/// distinct values the level set is constant, so the sup is a max over the values.
pub fn weak_sup(g: &[f64], norm_of_indicator: impl Fn(&[f64]) -> f64) -> f64 {
    let mut levels: Vec<f64> = g.iter().copied().filter(|v| *v > 0.0).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut best = 0.0f64;
    let mut indicator = vec![0.0; g.len()];
    for &a in &levels {
        for (ind, v) in indicator.iter_mut().zip(g) {
            *ind = if *v >= a { 1.0 } else { 0.0 };
        }
        best = best.max(a * norm_of_indicator(&indicator));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_norms() {
        let m = [0.5, 0.5];
        assert!((lp_norm(&[3.0, 4.0], &[1.0, 1.0], Exponent::TWO) - 5.0).abs() < 1e-15);
        assert_eq!(lp_norm(&[3.0, -4.0], &m, Exponent::INFINITY), 4.0);
        assert!((lp_norm(&[1.0, 1.0], &m, Exponent::ONE) - 1.0).abs() < 1e-15);
        assert_eq!(lp_norm(&[0.0, 0.0], &m, Exponent::ONE), 0.0);
    }

    #[test]
    fn quasi_norm_below_one() {
        let half = Exponent::new(0.5).unwrap();
        // (sqrt(1) + sqrt(4))^2 = 9
        assert!((lp_norm(&[1.0, 4.0], &[1.0, 1.0], half) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn huge_exponent_no_overflow() {
        let p = Exponent::new(400.0).unwrap();
        let v = lp_norm(&[1e3, 1e2], &[1.0, 1.0], p);
        assert!(v.is_finite() && (v - 1e3).abs() < 1e-6 * 1e3);
    }

    #[test]
    fn mixed_norm_orders() {
        // x1 in {0,1} (inner), x2 in {0,1,2}
        let vals = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let one = [1.0, 1.0];
        let three = [1.0, 1.0, 1.0];
        let inner = slice_norms(&vals, &one, 3, Exponent::ONE);
        assert_eq!(inner, vec![5.0, 7.0, 9.0]);
        assert_eq!(mixed_norm(&vals, &one, &three, Exponent::ONE, Exponent::INFINITY), 9.0);
    }

    #[test]
    fn weak_of_indicator_is_strong() {
        let f = [1.0, 0.0, 1.0, 1.0];
        let w = [1.0; 4];
        let m = [0.25; 4];
        let p = Exponent::new(3.0).unwrap();
        let strong = weighted_norm(&f, &w, &m, p);
        assert!((weak_norm(&f, &w, &m, p) - strong).abs() < 1e-15);
    }
}

//! Weights and the two-weight characteristic
//! `[w,v]_(s,r) = sup_U μ(U)^{-1/s-1/r} ‖w‖_{L^s(U)} ‖v^{-1}‖_{L^r(U)}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{Exponent, ExponentError, WeightTransform};
use crate::maximal::maximal;
use crate::norms::lp_norm_on;
use crate::space::SetBasis;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("weight value {value} at point {index} is not positive and finite")]
    NotPositive { index: usize, value: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error(transparent)]
    Exponent(#[from] ExponentError),
}

/// A strictly positive finite function on a point set.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Weight(Vec<f64>);

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Weight::new(Vec::<f64>::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl Weight {
    pub fn new(values: Vec<f64>) -> Result<Self, WeightError> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(WeightError::NotPositive { index, value });
        }
        Ok(Self(values))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Result<Self, WeightError> {
        Self::new(vec![c; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_len(&self, n: usize) -> Result<(), WeightError> {
        if self.len() == n {
            Ok(())
        } else {
            Err(WeightError::Length {
                expected: n,
                got: self.len(),
            })
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.iter().map(|&x| f(x)).collect())
    }

    pub fn powf(&self, a: f64) -> Self {
        self.map(|x| x.powf(a))
    }

    pub fn recip(&self) -> Self {
        self.map(|x| 1.0 / x)
    }

    pub fn mul(&self, other: &Weight) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
    }

    pub fn div(&self, other: &Weight) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a / b).collect())
    }

    /// Product of several weights on the same space.
    pub fn product<'a>(weights: impl IntoIterator<Item = &'a Weight>) -> Option<Weight> {
        let mut it = weights.into_iter();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, w| acc.mul(w)))
    }

    /// `w ⊗ u`, with point `(i, j)` at `i * u.len() + j`.
    pub fn tensor(&self, other: &Weight) -> Self {
        Self(
            self.0
                .iter()
                .flat_map(|&a| other.0.iter().map(move |&b| a * b))
                .collect(),
        )
    }

    /// `x ↦ w_0^{1-θ}(x) w_1^θ(x)`.
    pub fn geometric_mix(&self, other: &Weight, theta: f64) -> Self {
        Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.powf(1.0 - theta) * b.powf(theta))
                .collect(),
        )
    }
}

impl WeightTransform {
    /// The rescaled pair `(w_t, v_t)`.
    pub fn apply(&self, w: &Weight, v: &Weight) -> (Weight, Weight) {
        match *self {
            WeightTransform::Power { alpha } => (w.powf(alpha), v.powf(alpha)),
            WeightTransform::InversePowerSwapped { alpha } => (v.powf(-alpha), w.powf(-alpha)),
        }
    }
}

/// A characteristic value and the basis set attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharValue {
    pub value: f64,
    pub argmax: usize,
}

/// Evaluation options for [`characteristic_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CharOptions {
    /// Use prefix sums when every basis set is an interval. Agrees with direct
    /// summation up to rounding.
    pub prefix_sums: bool,
}

pub fn characteristic(w: &Weight, v: &Weight, s: Exponent, r: Exponent, basis: &SetBasis) -> CharValue {
    characteristic_with(w, v, s, r, basis, CharOptions::default())
}

fn set_value(w: &[f64], v_inv: &[f64], masses: &[f64], set: &[usize], measure: f64, s: Exponent, r: Exponent) -> f64 {
    let a = lp_norm_on(w, masses, set, s);
    let b = lp_norm_on(v_inv, masses, set, r);
    measure.powf(-(s.recip() + r.recip())) * a * b
}

pub fn characteristic_with(w: &Weight, v: &Weight, s: Exponent, r: Exponent, basis: &SetBasis, options: CharOptions) -> CharValue {
    let masses = basis.masses();
    let v_inv = v.recip();
    if options.prefix_sums && !s.is_infinite() && !r.is_infinite() && basis.is_interval_basis() {
        return characteristic_prefix(w, &v_inv, s, r, basis);
    }
    let mut best = CharValue {
        value: f64::NEG_INFINITY,
        argmax: 0,
    };
    for (k, set) in basis.sets().iter().enumerate() {
        let value = set_value(w.values(), v_inv.values(), masses, set, basis.measure(k), s, r);
        if value > best.value {
            best = CharValue { value, argmax: k };
        }
    }
    best
}

fn characteristic_prefix(w: &Weight, v_inv: &Weight, s: Exponent, r: Exponent, basis: &SetBasis) -> CharValue {
    let masses = basis.masses();
    let prefix = |vals: &[f64], e: Exponent| -> Vec<f64> {
        let exp = 1.0 / e.recip();
        let mut acc = vec![0.0; vals.len() + 1];
        for i in 0..vals.len() {
            acc[i + 1] = acc[i] + masses[i] * vals[i].powf(exp);
        }
        acc
    };
    let (pw, pv, pm) = (prefix(w.values(), s), prefix(v_inv.values(), r), {
        let mut acc = vec![0.0; masses.len() + 1];
        for i in 0..masses.len() {
            acc[i + 1] = acc[i] + masses[i];
        }
        acc
    });
    let mut best = CharValue {
        value: f64::NEG_INFINITY,
        argmax: 0,
    };
    for (k, set) in basis.sets().iter().enumerate() {
        let (a, b) = (set[0], set[set.len() - 1] + 1);
        let mu = pm[b] - pm[a];
        let value = mu.powf(-(s.recip() + r.recip())) * (pw[b] - pw[a]).powf(s.recip()) * (pv[b] - pv[a]).powf(r.recip());
        if value > best.value {
            best = CharValue { value, argmax: k };
        }
    }
    best
}

/// `[w]_p = [w,w]_(p,p')` for `p ∈ [1, ∞]`.
pub fn characteristic_p(w: &Weight, p: Exponent, basis: &SetBasis) -> Result<CharValue, WeightError> {
    Ok(characteristic(w, w, p, p.dual()?, basis))
}

/// `[w, w^{-1}]_(s,1)`.
pub fn reverse_holder(w: &Weight, s: Exponent, basis: &SetBasis) -> CharValue {
    characteristic(w, &w.recip(), s, Exponent::ONE, basis)
}

/// `sup_U μ(U)^{-1} ∫_U M(w 1_U) dμ`.
pub fn fujii_wilson(w: &Weight, basis: &SetBasis) -> CharValue {
    let masses = basis.masses();
    let mut best = CharValue {
        value: f64::NEG_INFINITY,
        argmax: 0,
    };
    let mut local = vec![0.0; basis.n_points()];
    for (k, set) in basis.sets().iter().enumerate() {
        local.iter_mut().for_each(|x| *x = 0.0);
        for &x in set {
            local[x] = w.values()[x];
        }
        let m = maximal(&local, basis);
        let value = set.iter().map(|&x| masses[x] * m[x]).sum::<f64>() / basis.measure(k);
        if value > best.value {
            best = CharValue { value, argmax: k };
        }
    }
    best
}

pub mod sampling {
    //! Random weights for property tests and harness trials.

    use rand::Rng as _;
    use serde::{Deserialize, Serialize};

    use super::Weight;
    use crate::rng::Rng;

    /// Log-range for sampled values: `[e^{-SPREAD}, e^{SPREAD}]`.
    pub const SPREAD: f64 = 3.0;

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
    #[serde(rename_all = "kebab-case")]
    pub enum WeightSampler {
        LogUniform,
        PowerType,
        Checkerboard,
        /// Picks one of the three families per draw.
        Mixed,
    }

    impl WeightSampler {
        pub fn sample(self, n: usize, rng: &mut Rng) -> Weight {
            match self {
                WeightSampler::LogUniform => log_uniform(n, rng),
                WeightSampler::PowerType => power_type(n, rng),
                WeightSampler::Checkerboard => checkerboard(n, rng),
                WeightSampler::Mixed => match rng.gen_range(0..3) {
                    0 => log_uniform(n, rng),
                    1 => power_type(n, rng),
                    _ => checkerboard(n, rng),
                },
            }
        }
    }

    /// I.i.d. values `e^U` with `U` uniform on `[-SPREAD, SPREAD]`.
    pub fn log_uniform(n: usize, rng: &mut Rng) -> Weight {
        Weight((0..n).map(|_| rng.gen_range(-SPREAD..=SPREAD).exp()).collect())
    }

    /// `d(x, x0)^a` on the grid `x_i = (i + 1/2)/n`, with `d` shifted by half a cell.
    pub fn power_type(n: usize, rng: &mut Rng) -> Weight {
        let a = rng.gen_range(-0.4999..0.4999);
        let x0 = rng.gen_range(0..n);
        Weight(
            (0..n)
                .map(|i| ((i.abs_diff(x0) as f64 + 0.5) / n as f64).powf(a))
                .collect(),
        )
    }

    /// Two values alternating on blocks of random dyadic width.
    pub fn checkerboard(n: usize, rng: &mut Rng) -> Weight {
        let hi = rng.gen_range(0.0..=SPREAD).exp();
        let lo = rng.gen_range(-SPREAD..=0.0).exp();
        let max_shift = usize::BITS - n.max(1).leading_zeros();
        let width = 1usize << rng.gen_range(0..max_shift.max(1));
        Weight(
            (0..n)
                .map(|i| if (i / width).is_multiple_of(2) { hi } else { lo })
                .collect(),
        )
    }

    /// Positive function values, log-uniform, with an occasional zero.
    pub fn function(n: usize, rng: &mut Rng, zero_prob: f64) -> Vec<f64> {
        (0..n)
            .map(|_| {
                if rng.gen_bool(zero_prob) {
                    0.0
                } else {
                    rng.gen_range(-SPREAD..=SPREAD).exp()
                }
            })
            .collect()
    }
}

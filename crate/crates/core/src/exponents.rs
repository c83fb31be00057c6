//! Integrability exponents in `(0, ∞]`, stored as reciprocals.
//!
//! The relations between base and target exponents are affine in the
//! reciprocals, so `∞` is simply the reciprocal `0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Absolute tolerance for comparing reciprocals.
pub const RECIP_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExponentError {
    #[error("reciprocal {0} is not a finite nonnegative number")]
    BadReciprocal(f64),
    #[error("cannot parse exponent {0:?}")]
    Parse(String),
    #[error("conjugate exponent needs p >= 1, got p = {0}")]
    NoConjugate(Exponent),
    #[error("the shift 1/gamma cannot be determined from the given exponents")]
    Underdetermined,
    #[error("inconsistent exponents: {0}")]
    Inconsistent(String),
    #[error("exponent {name} would have reciprocal {recip}, outside (0, inf]")]
    OutOfRange { name: String, recip: f64 },
    #[error("exponent {0} is not set")]
    Missing(&'static str),
    #[error("kappa must exceed 1, got {0}")]
    BadKappa(f64),
    #[error("t = 1 at index {0}: the constant c(1) is left open, refusing to guess")]
    UnitT(usize),
    #[error("{0}")]
    Shape(String),
}

/// An exponent `p ∈ (0, ∞]`, represented by `1/p ∈ [0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent {
    recip: f64,
}

impl Exponent {
    pub const INFINITY: Exponent = Exponent { recip: 0.0 };
    pub const ONE: Exponent = Exponent { recip: 1.0 };
    pub const TWO: Exponent = Exponent { recip: 0.5 };

    pub fn from_recip(recip: f64) -> Result<Self, ExponentError> {
        if recip.is_finite() && recip >= 0.0 {
            Ok(Self { recip })
        } else {
            Err(ExponentError::BadReciprocal(recip))
        }
    }

    /// Exponent with value `p`; `f64::INFINITY` is allowed.
    pub fn new(p: f64) -> Result<Self, ExponentError> {
        if p == f64::INFINITY {
            return Ok(Self::INFINITY);
        }
        if p.is_finite() && p > 0.0 {
            Ok(Self { recip: 1.0 / p })
        } else {
            Err(ExponentError::BadReciprocal(1.0 / p))
        }
    }

    /// Exponent `a/b` with reciprocal `b/a`.
    pub fn ratio(a: u32, b: u32) -> Self {
        assert!(a > 0 && b > 0, "ratio exponents need positive parts");
        Self {
            recip: b as f64 / a as f64,
        }
    }

    pub fn recip(self) -> f64 {
        self.recip
    }

    pub fn value(self) -> f64 {
        if self.recip == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.recip
        }
    }

    pub fn is_infinite(self) -> bool {
        self.recip == 0.0
    }

    pub fn approx_eq(self, other: Exponent) -> bool {
        (self.recip - other.recip).abs() <= RECIP_TOL
    }

    /// Hölder conjugate `p'` with `1/p + 1/p' = 1`.
    pub fn dual(self) -> Result<Exponent, ExponentError> {
        if self.recip > 1.0 + RECIP_TOL {
            return Err(ExponentError::NoConjugate(self));
        }
        Ok(Self {
            recip: (1.0 - self.recip).max(0.0),
        })
    }

    /// `p / a` for a scale `a` given as an exponent, i.e. reciprocal `recip * a`.
    pub fn div_by(self, a: Exponent) -> Exponent {
        Self {
            recip: self.recip / a.recip,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.recip == 0.0 {
            return f.write_str("inf");
        }
        let p = 1.0 / self.recip;
        for den in 1..=64u32 {
            let num = (p * den as f64).round();
            if num >= 1.0 && (num / den as f64 - p).abs() <= 1e-12 * p.max(1.0) {
                return if den == 1 {
                    write!(f, "{num}")
                } else {
                    write!(f, "{num}/{den}")
                };
            }
        }
        write!(f, "{p}")
    }
}

impl FromStr for Exponent {
    type Err = ExponentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let err = || ExponentError::Parse(s.to_string());
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => return Ok(Self::INFINITY),
            _ => {}
        }
        if let Some((a, b)) = t.split_once('/') {
            let a: f64 = a.trim().parse().map_err(|_| err())?;
            let b: f64 = b.trim().parse().map_err(|_| err())?;
            if !(a > 0.0 && b > 0.0) {
                return Err(err());
            }
            return Self::from_recip(b / a).map_err(|_| err());
        }
        let p: f64 = t.parse().map_err(|_| err())?;
        Self::new(p).map_err(|_| err())
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Number(p) => Exponent::new(p).map_err(serde::de::Error::custom),
        }
    }
}

/// The eight exponents of one base/target configuration; any may be unknown.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PartialTuple {
    pub q0: Option<Exponent>,
    pub p0: Option<Exponent>,
    pub s0: Option<Exponent>,
    pub r0: Option<Exponent>,
    pub q: Option<Exponent>,
    pub p: Option<Exponent>,
    pub s: Option<Exponent>,
    pub r: Option<Exponent>,
}

/// A complete configuration with
/// `1/q - 1/q0 = 1/p - 1/p0 = 1/s - 1/s0 = 1/r0 - 1/r = 1/gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentTuple {
    pub q0: Exponent,
    pub p0: Exponent,
    pub s0: Exponent,
    pub r0: Exponent,
    pub q: Exponent,
    pub p: Exponent,
    pub s: Exponent,
    pub r: Exponent,
    pub gamma_recip: f64,
}

/// Result of [`solve_consistency`]; pairs with neither end known stay `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolvedTuple {
    pub gamma_recip: f64,
    pub exponents: PartialTuple,
}

impl SolvedTuple {
    pub fn complete(&self) -> Result<ExponentTuple, ExponentError> {
        let e = &self.exponents;
        Ok(ExponentTuple {
            q0: e.q0.ok_or(ExponentError::Missing("q0"))?,
            p0: e.p0.ok_or(ExponentError::Missing("p0"))?,
            s0: e.s0.ok_or(ExponentError::Missing("s0"))?,
            r0: e.r0.ok_or(ExponentError::Missing("r0"))?,
            q: e.q.ok_or(ExponentError::Missing("q"))?,
            p: e.p.ok_or(ExponentError::Missing("p"))?,
            s: e.s.ok_or(ExponentError::Missing("s"))?,
            r: e.r.ok_or(ExponentError::Missing("r"))?,
            gamma_recip: self.gamma_recip,
        })
    }
}

const PAIR_NAMES: [(&str, &str, f64); 4] = [("q0", "q", 1.0), ("p0", "p", 1.0), ("s0", "s", 1.0), ("r0", "r", -1.0)];

fn pairs_mut(t: &mut PartialTuple) -> [(&mut Option<Exponent>, &mut Option<Exponent>); 4] {
    [
        (&mut t.q0, &mut t.q),
        (&mut t.p0, &mut t.p),
        (&mut t.s0, &mut t.s),
        (&mut t.r0, &mut t.r),
    ]
}

/// Completes a partial configuration from the consistency relations.
pub fn solve_consistency(known: &PartialTuple, gamma_recip: Option<f64>) -> Result<SolvedTuple, ExponentError> {
    let mut tuple = *known;
    let mut gamma = gamma_recip;
    for ((base, target), (bn, tn, sign)) in pairs_mut(&mut tuple).into_iter().zip(PAIR_NAMES) {
        if let (Some(b), Some(t)) = (base.as_ref(), target.as_ref()) {
            let g = sign * (t.recip() - b.recip());
            match gamma {
                None => gamma = Some(g),
                Some(g0) if (g - g0).abs() > RECIP_TOL => {
                    return Err(ExponentError::Inconsistent(format!(
                        "pair ({bn}, {tn}) gives 1/gamma = {g}, expected {g0}"
                    )))
                }
                _ => {}
            }
        }
    }
    let g = gamma.ok_or(ExponentError::Underdetermined)?;
    for ((base, target), (bn, tn, sign)) in pairs_mut(&mut tuple).into_iter().zip(PAIR_NAMES) {
        match (base.as_ref(), target.as_ref()) {
            (Some(b), None) => {
                let recip = b.recip() + sign * g;
                *target = Some(checked(tn, recip)?);
            }
            (None, Some(t)) => {
                let recip = t.recip() - sign * g;
                *base = Some(checked(bn, recip)?);
            }
            _ => {}
        }
    }
    Ok(SolvedTuple {
        gamma_recip: g,
        exponents: tuple,
    })
}

fn checked(name: &str, recip: f64) -> Result<Exponent, ExponentError> {
    if recip < -RECIP_TOL || !recip.is_finite() {
        return Err(ExponentError::OutOfRange {
            name: name.to_string(),
            recip,
        });
    }
    Exponent::from_recip(recip.max(0.0))
}

impl ExponentTuple {
    /// Builds the tuple from base exponents and the shift.
    pub fn from_base(q0: Exponent, p0: Exponent, s0: Exponent, r0: Exponent, gamma_recip: f64) -> Result<Self, ExponentError> {
        let known = PartialTuple {
            q0: Some(q0),
            p0: Some(p0),
            s0: Some(s0),
            r0: Some(r0),
            ..Default::default()
        };
        solve_consistency(&known, Some(gamma_recip))?.complete()
    }

    /// Largest deviation among the four consistency relations.
    pub fn consistency_residual(&self) -> f64 {
        let g = self.gamma_recip;
        [
            self.q.recip() - self.q0.recip() - g,
            self.p.recip() - self.p0.recip() - g,
            self.s.recip() - self.s0.recip() - g,
            self.r0.recip() - self.r.recip() - g,
        ]
        .iter()
        .fold(0.0, |m, d| m.max(d.abs()))
    }

    pub fn region(&self) -> AdmissibleRegion {
        admissible_region(self.q0, self.p0, self.s0, self.r0)
    }

    pub fn rescaled(&self) -> Result<RescaledParams, ExponentError> {
        rescale_params(self.gamma_recip, self.s0, self.r0)
    }
}

/// One bound of an interval of reciprocals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub closed: bool,
}

/// Interval of reciprocals; a missing upper bound means `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: Bound,
    pub upper: Option<Bound>,
}

impl Interval {
    pub fn at_least(value: f64, closed: bool) -> Self {
        Self {
            lower: Bound { value, closed },
            upper: None,
        }
    }

    pub fn between(lo: f64, lo_closed: bool, hi: f64, hi_closed: bool) -> Self {
        Self {
            lower: Bound {
                value: lo,
                closed: lo_closed,
            },
            upper: Some(Bound {
                value: hi,
                closed: hi_closed,
            }),
        }
    }

    pub fn intersect(self, other: Interval) -> Interval {
        let lower = tighter(self.lower, other.lower, |a, b| a > b);
        let upper = match (self.upper, other.upper) {
            (Some(a), Some(b)) => Some(tighter(a, b, |a, b| a < b)),
            (a, b) => a.or(b),
        };
        Interval { lower, upper }
    }

    pub fn contains(&self, x: f64) -> bool {
        let lo_ok = if self.lower.closed {
            x >= self.lower.value - RECIP_TOL
        } else {
            x > self.lower.value + RECIP_TOL
        };
        let hi_ok = match self.upper {
            None => true,
            Some(u) if u.closed => x <= u.value + RECIP_TOL,
            Some(u) => x < u.value - RECIP_TOL,
        };
        lo_ok && hi_ok
    }

    pub fn is_empty(&self) -> bool {
        match self.upper {
            None => false,
            Some(u) => {
                u.value < self.lower.value || (u.value == self.lower.value && !(u.closed && self.lower.closed))
            }
        }
    }
}

fn tighter(a: Bound, b: Bound, stricter: impl Fn(f64, f64) -> bool) -> Bound {
    if stricter(a.value, b.value) {
        a
    } else if stricter(b.value, a.value) {
        b
    } else {
        Bound {
            value: a.value,
            closed: a.closed && b.closed,
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.lower.closed { '[' } else { '(' };
        match self.upper {
            None => write!(f, "{open}{}, inf)", self.lower.value),
            Some(u) => write!(f, "{open}{}, {}{}", self.lower.value, u.value, if u.closed { ']' } else { ')' }),
        }
    }
}

/// Necessary ranges for `(1/q, 1/p, 1/s, 1/r)` reachable from a base tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleRegion {
    pub q: Interval,
    pub p: Interval,
    pub s: Interval,
    pub r: Interval,
}

impl AdmissibleRegion {
    pub fn contains(&self, q: Exponent, p: Exponent, s: Exponent, r: Exponent) -> bool {
        self.q.contains(q.recip()) && self.p.contains(p.recip()) && self.s.contains(s.recip()) && self.r.contains(r.recip())
    }

    pub fn contains_tuple(&self, t: &ExponentTuple) -> bool {
        self.contains(t.q, t.p, t.s, t.r)
    }
}

pub fn admissible_region(q0: Exponent, p0: Exponent, s0: Exponent, r0: Exponent) -> AdmissibleRegion {
    let (q0, p0, s0, r0) = (q0.recip(), p0.recip(), s0.recip(), r0.recip());
    AdmissibleRegion {
        q: Interval::at_least(q0 - p0, true)
            .intersect(Interval::at_least(q0 - s0, false))
            .intersect(Interval::between(0.0, true, q0 + r0, false)),
        p: Interval::at_least(p0 - q0, true)
            .intersect(Interval::at_least(p0 - s0, false))
            .intersect(Interval::between(0.0, true, p0 + r0, false)),
        s: Interval::at_least(s0 - q0, true)
            .intersect(Interval::at_least(s0 - p0, true))
            .intersect(Interval::between(0.0, false, s0 + r0, false)),
        r: Interval::between(0.0, false, q0 + r0, true)
            .intersect(Interval::between(0.0, false, p0 + r0, true))
            .intersect(Interval::between(0.0, false, s0 + r0, false)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftCase {
    Positive,
    Zero,
    Negative,
}

impl ShiftCase {
    pub fn of(gamma_recip: f64) -> Self {
        if gamma_recip.abs() <= RECIP_TOL {
            ShiftCase::Zero
        } else if gamma_recip > 0.0 {
            ShiftCase::Positive
        } else {
            ShiftCase::Negative
        }
    }
}

/// How the rescaled weight pair `(w_t, v_t)` arises from `(w, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightTransform {
    /// `(w^α, v^α)`.
    Power { alpha: f64 },
    /// `(v^{-α}, w^{-α})`.
    InversePowerSwapped { alpha: f64 },
}

/// The class of admissible base weight pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightClass {
    /// Only `(w, v)` itself.
    FixedPair,
    /// All pairs with the same ratio `w/v` and finite `[., .]_(s0, r0)`.
    RatioClass { s0: Exponent, r0: Exponent },
}

/// Exponents of the maximal-operator bound needed to move from `(s0, r0)` to
/// `(s, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaledParams {
    pub gamma_recip: f64,
    pub s0: Exponent,
    pub r0: Exponent,
    pub s: Exponent,
    pub r: Exponent,
    pub alpha: Exponent,
    pub t0: Exponent,
    pub t: Exponent,
    pub case: ShiftCase,
}

impl RescaledParams {
    /// `None` in the zero case, where the maximal operator is not used.
    pub fn transform(&self) -> Option<WeightTransform> {
        let alpha = self.alpha.value();
        match self.case {
            ShiftCase::Zero => None,
            ShiftCase::Positive => Some(WeightTransform::Power { alpha }),
            ShiftCase::Negative => Some(WeightTransform::InversePowerSwapped { alpha }),
        }
    }

    pub fn weight_class(&self) -> WeightClass {
        match self.case {
            ShiftCase::Zero => WeightClass::FixedPair,
            _ => WeightClass::RatioClass {
                s0: self.s0,
                r0: self.r0,
            },
        }
    }

    /// `t/|γ|`, zero in the zero case.
    pub fn t_over_gamma(&self) -> f64 {
        match self.case {
            ShiftCase::Zero => 0.0,
            _ => self.gamma_recip.abs() / self.t.recip(),
        }
    }

    /// `t/t0`.
    pub fn t_over_t0(&self) -> f64 {
        self.t0.recip() / self.t.recip()
    }

    /// True when the needed maximal bound sits at `t = 1`.
    pub fn needs_unit_t(&self) -> bool {
        self.case != ShiftCase::Zero && (self.t.recip() - 1.0).abs() <= RECIP_TOL
    }

    /// Recovers `(s0, r0, s, r)` from `(t0, t, α, case)`.
    pub fn recover(&self) -> Option<(Exponent, Exponent, Exponent, Exponent)> {
        let a = self.alpha.recip();
        let scale = |t: Exponent| Exponent::from_recip(t.recip() * a).ok();
        let rest = |x: Exponent| Exponent::from_recip((a - x.recip()).max(0.0)).ok();
        match self.case {
            ShiftCase::Zero => None,
            ShiftCase::Positive => {
                let (s0, s) = (scale(self.t0)?, scale(self.t)?);
                Some((s0, rest(s0)?, s, rest(s)?))
            }
            ShiftCase::Negative => {
                let (r0, r) = (scale(self.t0)?, scale(self.t)?);
                Some((rest(r0)?, r0, rest(r)?, r))
            }
        }
    }
}

pub fn rescale_params(gamma_recip: f64, s0: Exponent, r0: Exponent) -> Result<RescaledParams, ExponentError> {
    let s_recip = s0.recip() + gamma_recip;
    let r_recip = r0.recip() - gamma_recip;
    let s = checked("s", s_recip)?;
    let r = checked("r", r_recip)?;
    let alpha = Exponent::from_recip(s0.recip() + r0.recip())?;
    let case = ShiftCase::of(gamma_recip);
    let (t0, t) = match case {
        ShiftCase::Zero => (Exponent::ONE, Exponent::ONE),
        ShiftCase::Positive => (s0.div_by(alpha), s.div_by(alpha)),
        ShiftCase::Negative => (r0.div_by(alpha), r.div_by(alpha)),
    };
    Ok(RescaledParams {
        gamma_recip: if case == ShiftCase::Zero { 0.0 } else { gamma_recip },
        s0,
        r0,
        s,
        r,
        alpha,
        t0,
        t,
        case,
    })
}

/// One level of a mixed-norm configuration; the transform acts on the tensor
/// factors `level..levels`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedLevel {
    pub level: usize,
    pub levels: usize,
    pub params: RescaledParams,
}

/// Level-by-level rescaling with `1/s_i = 1/s_{i-1} + 1/γ_i`, `1/r_i = 1/r_{i-1} - 1/γ_i`.
pub fn rescale_params_mixed(gamma_recips: &[f64], s0: Exponent, r0: Exponent) -> Result<Vec<MixedLevel>, ExponentError> {
    let mut out = Vec::with_capacity(gamma_recips.len());
    let (mut s, mut r) = (s0, r0);
    for (level, &g) in gamma_recips.iter().enumerate() {
        let params = rescale_params(g, s, r)?;
        s = params.s;
        r = params.r;
        out.push(MixedLevel {
            level,
            levels: gamma_recips.len(),
            params,
        });
    }
    Ok(out)
}

/// Per-index input to [`extrapolation_constants`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantInput {
    pub gamma_recip: f64,
    pub t0: Exponent,
    pub t1: Exponent,
    /// A bound for the rescaled maximal operator, or `c(t1)` in the Buckley form.
    pub opnorm: f64,
    pub characteristic: f64,
}

impl ConstantInput {
    pub fn from_params(params: &RescaledParams, opnorm: f64, characteristic: f64) -> Self {
        Self {
            gamma_recip: params.gamma_recip,
            t0: params.t0,
            t1: params.t,
            opnorm,
            characteristic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantForm {
    /// `(κ'‖M‖)^{t/|γ|} [w,v]^{t/t0}`.
    OperatorNorm,
    /// `(κ'c(t))^{t/|γ|} [w]^{t'/t0'}` for one-weight bounds `‖M‖ ≤ c(t)[w]_t^{t'}`.
    Buckley,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub kappa: f64,
    pub kappa_dual: f64,
    pub beta: f64,
    pub c_kappa: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
}

pub fn kappa_dual(kappa: f64) -> Result<f64, ExponentError> {
    if kappa.is_finite() && kappa > 1.0 {
        Ok(kappa / (kappa - 1.0))
    } else {
        Err(ExponentError::BadKappa(kappa))
    }
}

fn nonzero(g: f64) -> bool {
    ShiftCase::of(g) != ShiftCase::Zero
}

/// `t'/t0'`, taken as 1 in the zero case.
fn dual_ratio(index: usize, input: &ConstantInput) -> Result<f64, ExponentError> {
    if !nonzero(input.gamma_recip) {
        return Ok(1.0);
    }
    let t_dual = 1.0 - input.t1.recip();
    if t_dual.abs() <= RECIP_TOL {
        return Err(ExponentError::UnitT(index));
    }
    Ok((1.0 - input.t0.recip()) / t_dual)
}

fn t_over_gamma(index: usize, input: &ConstantInput) -> Result<f64, ExponentError> {
    if !nonzero(input.gamma_recip) {
        return Ok(0.0);
    }
    if (input.t1.recip() - 1.0).abs() <= RECIP_TOL {
        return Err(ExponentError::UnitT(index));
    }
    if input.t1.recip() == 0.0 {
        return Err(ExponentError::OutOfRange {
            name: format!("t1[{index}]"),
            recip: 0.0,
        });
    }
    Ok(input.gamma_recip.abs() / input.t1.recip())
}

/// `β = Σ t_{1j}/|γ_j|` and the per-index constants `C_κj`.
pub fn extrapolation_constants(kappa: f64, inputs: &[ConstantInput], form: ConstantForm) -> Result<ConstantsReport, ExponentError> {
    let kd = kappa_dual(kappa)?;
    let mut beta = 0.0;
    let mut c_kappa = Vec::with_capacity(inputs.len());
    for (j, input) in inputs.iter().enumerate() {
        let e = t_over_gamma(j, input)?;
        beta += e;
        let char_exp = match form {
            ConstantForm::OperatorNorm => input.t0.recip() / input.t1.recip(),
            ConstantForm::Buckley => dual_ratio(j, input)?,
        };
        let lead = if e == 0.0 { 1.0 } else { (kd * input.opnorm).powf(e) };
        c_kappa.push(lead * input.characteristic.powf(char_exp));
    }
    Ok(ConstantsReport {
        kappa,
        kappa_dual: kd,
        beta,
        c_kappa,
        b: None,
    })
}

/// Iterated Buckley-form constants for mixed norms; `levels[i][j]` is level `i`, index `j`.
///
/// `b_ij = Π_{k≤i} t'_kj/t'_0kj` and
/// `C_j = Π_i (κ'c(t_ij))^{t_ij b_(i-1)j/|γ_ij|} [w_ij]^{b_ij}`. `beta` is `ℓ/α`
/// with `1/α = max_j (1/s_0j + 1/r_0j)` supplied through `alpha_recip`.
pub fn mixed_constants(kappa: f64, levels: &[Vec<ConstantInput>], alpha_recip: f64) -> Result<ConstantsReport, ExponentError> {
    let kd = kappa_dual(kappa)?;
    let m = levels.first().map_or(0, Vec::len);
    if levels.iter().any(|l| l.len() != m) {
        return Err(ExponentError::Shape("every level needs the same number of indices".into()));
    }
    let mut b = vec![vec![0.0; m]; levels.len()];
    let mut c_kappa = vec![1.0; m];
    for j in 0..m {
        let mut prev = 1.0;
        for (i, level) in levels.iter().enumerate() {
            let input = &level[j];
            let bij = prev * dual_ratio(j, input)?;
            let e = t_over_gamma(j, input)? * prev;
            let lead = if e == 0.0 { 1.0 } else { (kd * input.opnorm).powf(e) };
            c_kappa[j] *= lead * input.characteristic.powf(bij);
            b[i][j] = bij;
            prev = bij;
        }
    }
    Ok(ConstantsReport {
        kappa,
        kappa_dual: kd,
        beta: levels.len() as f64 * alpha_recip,
        c_kappa,
        b: Some(b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> Exponent {
        s.parse().unwrap()
    }

    #[test]
    fn parsing_and_display() {
        assert_eq!(e("inf"), Exponent::INFINITY);
        assert_eq!(e("2/3").recip(), 1.5);
        assert_eq!(e("4").recip(), 0.25);
        assert_eq!(e("2/3").to_string(), "2/3");
        assert_eq!(e("6/5").to_string(), "6/5");
        assert_eq!(Exponent::INFINITY.to_string(), "inf");
        assert!("0".parse::<Exponent>().is_err());
        assert!("-1".parse::<Exponent>().is_err());
        assert!("x/2".parse::<Exponent>().is_err());
    }

    #[test]
    fn duals() {
        assert_eq!(Exponent::ONE.dual().unwrap(), Exponent::INFINITY);
        assert_eq!(Exponent::TWO.dual().unwrap(), Exponent::TWO);
        assert!(e("4/3").dual().unwrap().approx_eq(e("4")));
        assert!(e("1/2").dual().is_err());
    }

    #[test]
    fn endpoint_tuple_solves() {
        let known = PartialTuple {
            q0: Some(e("2")),
            p0: Some(e("2/3")),
            s0: Some(e("1")),
            r0: Some(e("inf")),
            q: Some(e("inf")),
            ..Default::default()
        };
        let solved = solve_consistency(&known, None).unwrap();
        assert_eq!(solved.gamma_recip, -0.5);
        let t = solved.complete().unwrap();
        assert!(t.p.approx_eq(e("1")));
        assert!(t.s.approx_eq(e("2")));
        assert!(t.r.approx_eq(e("2")));
        assert_eq!(t.consistency_residual(), 0.0);
        assert!(t.region().contains_tuple(&t));
    }

    #[test]
    fn zero_shift_leaves_free_pairs() {
        let known = PartialTuple {
            q0: Some(e("2")),
            q: Some(e("2")),
            p0: Some(e("2")),
            p: Some(e("2")),
            ..Default::default()
        };
        let solved = solve_consistency(&known, Some(0.0)).unwrap();
        assert_eq!(solved.gamma_recip, 0.0);
        assert!(solved.exponents.s.is_none());
        assert!(solved.complete().is_err());
    }

    #[test]
    fn second_endpoint_tuple() {
        let known = PartialTuple {
            s0: Some(e("6/5")),
            r0: Some(e("3")),
            ..Default::default()
        };
        let t = solve_consistency(&known, Some(-0.5)).unwrap().exponents;
        assert!(t.s.unwrap().approx_eq(e("3")));
        assert!(t.r.unwrap().approx_eq(e("6/5")));
    }

    #[test]
    fn inconsistent_and_out_of_range() {
        let known = PartialTuple {
            q0: Some(e("2")),
            q: Some(e("4")),
            p0: Some(e("2")),
            p: Some(e("2")),
            ..Default::default()
        };
        assert!(matches!(solve_consistency(&known, None), Err(ExponentError::Inconsistent(_))));
        let known = PartialTuple {
            q0: Some(e("inf")),
            ..Default::default()
        };
        assert!(matches!(solve_consistency(&known, Some(-0.5)), Err(ExponentError::OutOfRange { .. })));
        assert_eq!(solve_consistency(&PartialTuple::default(), None), Err(ExponentError::Underdetermined));
    }

    #[test]
    fn region_example() {
        let two = e("2");
        let region = admissible_region(two, two, two, two);
        assert_eq!(region.s, Interval::between(0.0, false, 1.0, false));
        assert_eq!(region.r, Interval::between(0.0, false, 1.0, false));
        assert!(!region.s.contains(0.0));
        assert!(region.s.contains(0.5));
        assert!(!region.r.contains(1.0));
    }

    #[test]
    fn region_infinite_base_clips() {
        let inf = Exponent::INFINITY;
        let region = admissible_region(inf, inf, e("2"), e("2"));
        assert_eq!(region.q.lower, Bound { value: 0.0, closed: true });
        assert!(region.q.contains(0.0));
    }

    #[test]
    fn rescale_negative_example() {
        let p = rescale_params(-0.5, e("6/5"), e("3")).unwrap();
        assert_eq!(p.case, ShiftCase::Negative);
        assert!((p.alpha.value() - 6.0 / 7.0).abs() < 1e-12);
        assert!((p.t0.value() - 3.5).abs() < 1e-12);
        assert!((p.t.value() - 1.4).abs() < 1e-12);
        let (s0, r0, s, r) = p.recover().unwrap();
        assert!(s0.approx_eq(e("6/5")) && r0.approx_eq(e("3")));
        assert!(s.approx_eq(e("3")) && r.approx_eq(e("6/5")));
        assert!(matches!(p.transform(), Some(WeightTransform::InversePowerSwapped { .. })));
    }

    #[test]
    fn rescale_zero_and_unit_t() {
        let p = rescale_params(0.0, e("2"), e("3")).unwrap();
        assert_eq!((p.t0, p.t, p.case), (Exponent::ONE, Exponent::ONE, ShiftCase::Zero));
        assert!(p.transform().is_none());
        assert_eq!(p.weight_class(), WeightClass::FixedPair);

        let p = rescale_params(0.5, Exponent::INFINITY, e("2")).unwrap();
        assert_eq!(p.alpha.value(), 2.0);
        assert!(p.t0.is_infinite());
        assert_eq!(p.t, Exponent::ONE);
        assert!(p.needs_unit_t());
    }

    #[test]
    fn rescale_rejects_range_exit() {
        assert!(rescale_params(0.75, e("2"), e("2")).is_err());
        assert!(rescale_params(-0.75, e("2"), e("2")).is_err());
    }

    #[test]
    fn mixed_example() {
        let levels = rescale_params_mixed(&[0.5, -0.5], e("2"), e("2")).unwrap();
        let (l1, l2) = (levels[0].params, levels[1].params);
        assert_eq!(l1.alpha.value(), 1.0);
        assert_eq!(l1.t0.value(), 2.0);
        assert_eq!(l1.t.value(), 1.0);
        assert!(l1.needs_unit_t());
        assert_eq!(l2.case, ShiftCase::Negative);
        assert_eq!(l2.s.value(), 2.0);
        assert_eq!(l2.r.value(), 2.0);
        assert!(l2.t0.is_infinite());
        assert_eq!(l2.t.value(), 2.0);
    }

    #[test]
    fn showcase_constants() {
        let p = rescale_params(-0.5, e("1"), Exponent::INFINITY).unwrap();
        assert_eq!(p.t.value(), 2.0);
        let c = extrapolation_constants(2.0, &[ConstantInput::from_params(&p, 3.0, 1.5)], ConstantForm::OperatorNorm).unwrap();
        assert_eq!(c.beta, 1.0);
        assert_eq!(c.kappa_dual, 2.0);
        // (2*3)^1 * 1.5^(t/t0) with t0 = inf
        assert!((c.c_kappa[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn zero_shift_constants() {
        let input = ConstantInput {
            gamma_recip: 0.0,
            t0: Exponent::ONE,
            t1: Exponent::ONE,
            opnorm: 7.0,
            characteristic: 2.5,
        };
        for form in [ConstantForm::OperatorNorm, ConstantForm::Buckley] {
            let c = extrapolation_constants(3.0, &[input, input], form).unwrap();
            assert_eq!(c.beta, 0.0);
            assert_eq!(c.c_kappa, vec![2.5, 2.5]);
        }
    }

    #[test]
    fn constants_reject_bad_inputs() {
        let p = rescale_params(0.5, Exponent::INFINITY, e("2")).unwrap();
        let input = ConstantInput::from_params(&p, 1.0, 1.0);
        assert_eq!(
            extrapolation_constants(2.0, &[input], ConstantForm::Buckley),
            Err(ExponentError::UnitT(0))
        );
        assert!(extrapolation_constants(1.0, &[], ConstantForm::Buckley).is_err());
    }

    #[test]
    fn constants_decrease_in_kappa() {
        let p = rescale_params(-0.25, e("2"), e("2")).unwrap();
        let input = ConstantInput::from_params(&p, 2.0, 1.7);
        let mut last = f64::INFINITY;
        for kappa in [1.1, 1.5, 2.0, 4.0, 16.0, 1e6] {
            let c = extrapolation_constants(kappa, &[input], ConstantForm::OperatorNorm).unwrap().c_kappa[0];
            assert!(c < last);
            last = c;
        }
    }

    #[test]
    fn mixed_constants_single_level_matches_buckley() {
        let p = rescale_params(-0.25, e("2"), e("2")).unwrap();
        let input = ConstantInput::from_params(&p, 1.3, 1.9);
        let single = extrapolation_constants(2.0, &[input], ConstantForm::Buckley).unwrap();
        let mixed = mixed_constants(2.0, &[vec![input]], 1.0).unwrap();
        assert!((single.c_kappa[0] - mixed.c_kappa[0]).abs() < 1e-12);
    }
}

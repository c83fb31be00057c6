//! Rubio de Francia majorants and the factor weights built from them.
//!
//! Given `f ∈ L^p_v` and `h ∈ L^u_{w^{-1}}`, [`factor_pair`] produces weights
//! `(w0, v0)` with the same ratio as `(w, v)`, a controlled characteristic at the
//! base exponents `(s0, r0)`, and
//! `‖f‖_{L^{p0}_{v0}} ‖h‖_{L^{u0}_{w0^{-1}}} ≤ κ^{t/|γ|} ‖f‖_{L^p_v} ‖h‖_{L^u_{w^{-1}}}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{kappa_dual, rescale_params, Exponent, ExponentError, RescaledParams, ShiftCase, RECIP_TOL};
use crate::maximal::{maximal, maximal_bound, AscentBudget, EstimateKind, MaximalError};
use crate::norms::{lp_norm, weighted_norm};
use crate::space::SetBasis;
use crate::weights::{characteristic, Weight, WeightError};

/// Iteration cap for the fixed point.
pub const MAX_ITERATIONS: usize = 10_000;
/// Stop once every point's relative increment drops below this.
pub const INCREMENT_TOL: f64 = 1e-12;
/// Slack on pointwise checks, applied to logarithms.
pub const POINTWISE_LOG_TOL: f64 = 1e-8;
/// Relative slack on norm checks.
pub const NORM_TOL: f64 = 1e-6;
/// Factor applied to a measured lower bound before it is used as an upper bound.
pub const SAFETY_FACTOR: f64 = 1.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RdfError {
    #[error("fixed point did not settle after {iterations} iterations (operator norm bound {opnorm} too small?)")]
    NonConvergence { iterations: usize, opnorm: f64 },
    #[error("property checks still fail after {0} doublings of the operator norm bound")]
    RetriesExhausted(usize),
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Exponent(#[from] ExponentError),
    #[error(transparent)]
    Maximal(#[from] MaximalError),
    #[error(transparent)]
    Weight(#[from] WeightError),
}

/// Exponents `(u0, p0, s0, r0) → (u, p, s, r)` with
/// `1/u0 - 1/u = 1/p - 1/p0 = 1/s - 1/s0 = 1/r0 - 1/r = 1/γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorParams {
    pub u0: Exponent,
    pub p0: Exponent,
    pub s0: Exponent,
    pub r0: Exponent,
    pub u: Exponent,
    pub p: Exponent,
    pub s: Exponent,
    pub r: Exponent,
    pub gamma_recip: f64,
}

impl FactorParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(u0: Exponent, p0: Exponent, s0: Exponent, r0: Exponent, u: Exponent, p: Exponent, s: Exponent, r: Exponent) -> Result<Self, RdfError> {
        let g = p.recip() - p0.recip();
        let params = Self {
            u0,
            p0,
            s0,
            r0,
            u,
            p,
            s,
            r,
            gamma_recip: g,
        };
        let residual = params.residual();
        if residual > 1e-10 {
            return Err(RdfError::BadInput(format!("exponents violate the shift relations by {residual}")));
        }
        Ok(params)
    }

    /// Completes `(p0, s0, r0)` by the shift and picks `(u0, u)` with one end at infinity.
    pub fn canonical(p0: Exponent, s0: Exponent, r0: Exponent, gamma_recip: f64) -> Result<Self, RdfError> {
        let fill = |recip: f64, name: &str| -> Result<Exponent, RdfError> {
            if recip < -RECIP_TOL {
                return Err(ExponentError::OutOfRange {
                    name: name.into(),
                    recip,
                }
                .into());
            }
            Ok(Exponent::from_recip(recip.max(0.0))?)
        };
        let (u0, u) = if gamma_recip >= 0.0 {
            (fill(gamma_recip, "u0")?, Exponent::INFINITY)
        } else {
            (Exponent::INFINITY, fill(-gamma_recip, "u")?)
        };
        Self::new(
            u0,
            p0,
            s0,
            r0,
            u,
            fill(p0.recip() + gamma_recip, "p")?,
            fill(s0.recip() + gamma_recip, "s")?,
            fill(r0.recip() - gamma_recip, "r")?,
        )
    }

    pub fn residual(&self) -> f64 {
        let g = self.gamma_recip;
        [
            self.u0.recip() - self.u.recip() - g,
            self.p.recip() - self.p0.recip() - g,
            self.s.recip() - self.s0.recip() - g,
            self.r0.recip() - self.r.recip() - g,
        ]
        .iter()
        .fold(0.0, |m, d| m.max(d.abs()))
    }

    /// The mirrored problem: `γ ↔ -γ`, `u ↔ p`, `s ↔ r` at both levels.
    pub fn swapped(&self) -> Self {
        Self {
            u0: self.p0,
            p0: self.u0,
            s0: self.r0,
            r0: self.s0,
            u: self.p,
            p: self.u,
            s: self.r,
            r: self.s,
            gamma_recip: -self.gamma_recip,
        }
    }

    pub fn rescaled(&self) -> Result<RescaledParams, RdfError> {
        Ok(rescale_params(self.gamma_recip, self.s0, self.r0)?)
    }
}

/// Where the bound for the rescaled maximal operator comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpnormSource {
    /// Measure it with the given ascent budget.
    Measure(AscentBudget),
    /// A previously measured value and whether it is exact.
    Known { value: f64, exact: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdfOptions {
    pub kappa: f64,
    pub opnorm: OpnormSource,
    pub max_retries: usize,
}

impl RdfOptions {
    pub fn new(kappa: f64) -> Self {
        Self {
            kappa,
            opnorm: OpnormSource::Measure(AscentBudget::default()),
            max_retries: 12,
        }
    }

    pub fn with_opnorm(mut self, opnorm: OpnormSource) -> Self {
        self.opnorm = opnorm;
        self
    }
}

/// A named inequality `lhs ≤ rhs` and whether it held within its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

impl Check {
    /// `lhs ≤ rhs (1 + rel)`.
    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64, rel: f64) -> Self {
        let passed = lhs.is_finite() && rhs.is_finite() && lhs <= rhs * (1.0 + rel) + f64::MIN_POSITIVE;
        Self {
            name: name.into(),
            lhs,
            rhs,
            passed,
        }
    }

    /// `|lhs - rhs| ≤ tol`.
    pub fn close(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            passed: (lhs - rhs).abs() <= tol,
        }
    }

    pub fn flag(name: impl Into<String>, passed: bool) -> Self {
        Self {
            name: name.into(),
            lhs: 0.0,
            rhs: 0.0,
            passed,
        }
    }
}

/// The fixed point `R = H + M(R w/v) / (κ' opnorm)`, started at `R = H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub r: Vec<f64>,
    pub iterations: usize,
}

pub fn rdf_iterate(basis: &SetBasis, w: &Weight, v: &Weight, s: Exponent, kappa: f64, h: &[f64], opnorm: f64) -> Result<Iterate, RdfError> {
    let n = basis.n_points();
    w.check_len(n)?;
    v.check_len(n)?;
    if h.len() != n {
        return Err(RdfError::BadInput(format!("H has {} entries, the space {n}", h.len())));
    }
    if s.recip() > 1.0 + RECIP_TOL || s.is_infinite() {
        return Err(RdfError::BadInput(format!("the iterate needs s in [1, inf), got {s}")));
    }
    if h.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || h.iter().all(|&x| x == 0.0) {
        return Err(RdfError::BadInput("H must be nonnegative, finite and nonzero".into()));
    }
    if !(opnorm.is_finite() && opnorm > 0.0) {
        return Err(RdfError::BadInput(format!("operator norm bound {opnorm} is not positive")));
    }
    let scale = kappa_dual(kappa)? * opnorm;
    let masses = basis.masses();
    let ratio = w.div(v);
    let h_norm = weighted_norm(h, w.values(), masses, s);
    let mut r = h.to_vec();
    let mut tilted = vec![0.0; n];
    for iteration in 1..=MAX_ITERATIONS {
        for ((t, x), q) in tilted.iter_mut().zip(&r).zip(ratio.values()) {
            *t = x * q;
        }
        let m = maximal(&tilted, basis);
        let next: Vec<f64> = h.iter().zip(&m).map(|(h, m)| h + m / scale).collect();
        // pointwise, since H may span many orders of magnitude
        let inc = next
            .iter()
            .zip(&r)
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, b)| (a - b) / a)
            .fold(0.0f64, f64::max);
        let size = weighted_norm(&next, w.values(), masses, s);
        r = next;
        if !size.is_finite() || size > 1e150 * h_norm {
            return Err(RdfError::NonConvergence { iterations: iteration, opnorm });
        }
        if inc <= INCREMENT_TOL {
            return Ok(Iterate { r, iterations: iteration });
        }
    }
    Err(RdfError::NonConvergence {
        iterations: MAX_ITERATIONS,
        opnorm,
    })
}

/// The three majorant properties: `R ≥ H`, `M(R w/v) ≤ κ' opnorm R`, `‖R‖ ≤ κ‖H‖` in `L^s_w`.
#[allow(clippy::too_many_arguments)]
pub fn iterate_checks(basis: &SetBasis, w: &Weight, v: &Weight, s: Exponent, kappa: f64, h: &[f64], r: &[f64], opnorm: f64) -> Result<Vec<Check>, RdfError> {
    let masses = basis.masses();
    let kd = kappa_dual(kappa)?;
    // worst log-violation of R ≥ H
    let above = r
        .iter()
        .zip(h)
        .filter(|(_, h)| **h > 0.0)
        .map(|(r, h)| h.ln() - r.ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let tilted: Vec<f64> = r.iter().zip(w.values()).zip(v.values()).map(|((r, w), v)| r * w / v).collect();
    let m = maximal(&tilted, basis);
    let excess = m
        .iter()
        .zip(r)
        .map(|(m, r)| m.ln() - (kd * opnorm * r).ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let r_norm = weighted_norm(r, w.values(), masses, s);
    let h_norm = weighted_norm(h, w.values(), masses, s);
    Ok(vec![
        Check {
            name: "majorant dominates H".into(),
            lhs: above,
            rhs: 0.0,
            passed: above <= POINTWISE_LOG_TOL,
        },
        Check {
            name: "maximal image of tilted majorant".into(),
            lhs: excess,
            rhs: 0.0,
            passed: excess <= POINTWISE_LOG_TOL,
        },
        Check::le("majorant norm", r_norm, kappa * h_norm, NORM_TOL),
    ])
}

/// Output of [`factor_pair`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdfResult {
    pub w0: Weight,
    pub v0: Weight,
    pub case: ShiftCase,
    /// `[w0, v0]_(s0, r0)`.
    pub char_bound_lhs: f64,
    /// `(κ' opnorm)^{t/|γ|} [w, v]_(s, r)^{t/t0}` with the bound actually used.
    pub char_bound_rhs: f64,
    /// The same bound with `κ' opnorm` replaced by `‖M(R w_t/v_t)/R‖_∞`.
    pub char_bound_tight: f64,
    pub normprod_lhs: f64,
    pub normprod_rhs: f64,
    pub majorant: Vec<f64>,
    pub iterations: usize,
    pub t_over_gamma: f64,
    pub t_over_t0: f64,
    pub opnorm_lower: f64,
    pub opnorm_exact: bool,
    pub opnorm_used: f64,
    pub retries: usize,
    /// `‖M(R w_t/v_t) / R‖_∞ / κ'`, the smallest bound for which the majorant
    /// property would have held.
    pub verified_constant: f64,
    pub checks: Vec<Check>,
}

impl RdfResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Core {
    w0: Weight,
    v0: Weight,
    r: Vec<f64>,
    iterations: usize,
    lower: f64,
    exact: bool,
    used: f64,
    retries: usize,
    verified: f64,
    checks: Vec<Check>,
}

/// Factor weights for `f` and `h`; see the module docs.
pub fn factor_pair(basis: &SetBasis, params: &FactorParams, w: &Weight, v: &Weight, f: &[f64], h: &[f64], options: &RdfOptions) -> Result<RdfResult, RdfError> {
    let n = basis.n_points();
    w.check_len(n)?;
    v.check_len(n)?;
    if f.len() != n || h.len() != n {
        return Err(RdfError::BadInput("f and h must live on the space".into()));
    }
    let residual = params.residual();
    if residual > 1e-10 {
        return Err(RdfError::BadInput(format!("exponents violate the shift relations by {residual}")));
    }
    let kappa = options.kappa;
    let kd = kappa_dual(kappa)?;
    let resc = params.rescaled()?;
    let masses = basis.masses();
    let char_target = characteristic(w, v, params.s, params.r, basis).value;
    let norm_f = weighted_norm(f, v.values(), masses, params.p);
    let norm_h = weighted_norm(h, &w.recip().into_values(), masses, params.u);

    let core = match resc.case {
        ShiftCase::Zero => None,
        ShiftCase::Positive => Some(positive_core(basis, params, w, v, f, options)?),
        ShiftCase::Negative => {
            let mirrored = positive_core(basis, &params.swapped(), &v.recip(), &w.recip(), h, options)?;
            Some(Core {
                w0: mirrored.v0.recip(),
                v0: mirrored.w0.recip(),
                ..mirrored
            })
        }
    };
    let e = resc.t_over_gamma();
    let tt0 = resc.t_over_t0();
    let Some(core) = core else {
        let lhs = characteristic(w, v, params.s0, params.r0, basis).value;
        let np = weighted_norm(f, v.values(), masses, params.p0) * weighted_norm(h, &w.recip().into_values(), masses, params.u0);
        return Ok(RdfResult {
            w0: w.clone(),
            v0: v.clone(),
            case: ShiftCase::Zero,
            char_bound_lhs: lhs,
            char_bound_rhs: char_target,
            char_bound_tight: char_target,
            normprod_lhs: np,
            normprod_rhs: norm_f * norm_h,
            majorant: Vec::new(),
            iterations: 0,
            t_over_gamma: 0.0,
            t_over_t0: 1.0,
            opnorm_lower: 1.0,
            opnorm_exact: true,
            opnorm_used: 1.0,
            retries: 0,
            verified_constant: 1.0,
            checks: vec![
                Check::le("characteristic bound", lhs, char_target, NORM_TOL),
                Check::le("norm product bound", np, norm_f * norm_h, NORM_TOL),
            ],
        });
    };

    let char_lhs = characteristic(&core.w0, &core.v0, params.s0, params.r0, basis).value;
    let char_rhs = (kd * core.used).powf(e) * char_target.powf(tt0);
    let char_tight = (kd * core.verified).powf(e) * char_target.powf(tt0);
    let np_lhs = weighted_norm(f, core.v0.values(), masses, params.p0) * weighted_norm(h, &core.w0.recip().into_values(), masses, params.u0);
    let np_rhs = kappa.powf(e) * norm_f * norm_h;

    let mut checks = core.checks;
    let ratio_dev = core
        .w0
        .values()
        .iter()
        .zip(core.v0.values())
        .zip(w.values().iter().zip(v.values()))
        .map(|((a, b), (c, d))| ((a / b) / (c / d) - 1.0).abs())
        .fold(0.0f64, f64::max);
    checks.push(Check {
        name: "ratio preserved".into(),
        lhs: ratio_dev,
        rhs: 1e-10,
        passed: ratio_dev <= 1e-10,
    });
    checks.push(Check::le("characteristic bound", char_lhs, char_rhs, NORM_TOL));
    checks.push(Check::le("characteristic bound with verified constant", char_lhs, char_tight, NORM_TOL));
    checks.push(Check::le("norm product bound", np_lhs, np_rhs, NORM_TOL));
    checks.push(Check::flag("base norms finite", np_lhs.is_finite()));
    Ok(RdfResult {
        w0: core.w0,
        v0: core.v0,
        case: resc.case,
        char_bound_lhs: char_lhs,
        char_bound_rhs: char_rhs,
        char_bound_tight: char_tight,
        normprod_lhs: np_lhs,
        normprod_rhs: np_rhs,
        majorant: core.r,
        iterations: core.iterations,
        t_over_gamma: e,
        t_over_t0: tt0,
        opnorm_lower: core.lower,
        opnorm_exact: core.exact,
        opnorm_used: core.used,
        retries: core.retries,
        verified_constant: core.verified,
        checks,
    })
}

/// The rescaled pair `(w^α, v^α)` and exponent `t` for a positive shift.
pub fn rescaled_pair(params: &FactorParams, w: &Weight, v: &Weight) -> Result<(Weight, Weight, Exponent), RdfError> {
    let resc = params.rescaled()?;
    match resc.transform() {
        Some(tr) => {
            let (wt, vt) = tr.apply(w, v);
            Ok((wt, vt, resc.t))
        }
        None => Err(RdfError::BadInput("no rescaled pair in the zero case".into())),
    }
}

fn positive_core(basis: &SetBasis, params: &FactorParams, w: &Weight, v: &Weight, f: &[f64], options: &RdfOptions) -> Result<Core, RdfError> {
    let resc = params.rescaled()?;
    debug_assert_eq!(resc.case, ShiftCase::Positive);
    let alpha = resc.alpha.value();
    let t = resc.t;
    let (wt, vt, _) = rescaled_pair(params, w, v)?;
    let g = params.gamma_recip;
    let p = params.p.value();
    // H^t w^{αt} = (|f| v)^p, with f = 0 replaced by a constant
    let f_use: Vec<f64> = if f.iter().all(|&x| x == 0.0) {
        vec![1.0; f.len()]
    } else {
        f.to_vec()
    };
    let h: Vec<f64> = f_use
        .iter()
        .zip(v.values())
        .zip(wt.values())
        .map(|((f, v), wa)| (f.abs() * v).powf(p * t.recip()) / wa)
        .collect();
    let (lower, exact) = match options.opnorm {
        OpnormSource::Known { value, exact } => (value, exact),
        OpnormSource::Measure(budget) => {
            let est = maximal_bound(basis, &wt, &vt, t, &budget)?;
            (est.value, est.kind == EstimateKind::Exact)
        }
    };
    let mut used = if exact { lower } else { lower * SAFETY_FACTOR };
    let mut retries = 0;
    let (iterate, checks) = loop {
        let attempt = rdf_iterate(basis, &wt, &vt, t, options.kappa, &h, used);
        match attempt {
            Ok(it) => {
                let checks = iterate_checks(basis, &wt, &vt, t, options.kappa, &h, &it.r, used)?;
                if checks.iter().all(|c| c.passed) {
                    break (it, checks);
                }
            }
            Err(RdfError::NonConvergence { .. }) => {}
            Err(e) => return Err(e),
        }
        if retries >= options.max_retries {
            return Err(RdfError::RetriesExhausted(retries));
        }
        retries += 1;
        used *= 2.0;
    };
    let r = iterate.r;
    let kd = kappa_dual(options.kappa)?;
    let tilt: Vec<f64> = r.iter().zip(wt.values()).zip(vt.values()).map(|((r, a), b)| r * a / b).collect();
    let verified = maximal(&tilt, basis)
        .iter()
        .zip(&r)
        .map(|(m, r)| m / r)
        .fold(0.0f64, f64::max)
        / kd;
    // w0 = R^{-t/γ} w^{s/s0}, v0 = (R (w/v)^α)^{-t/γ} v^{s/s0}
    let e = g / t.recip();
    let ss0 = params.s0.recip() / params.s.recip();
    let ratio_alpha = w.div(v).powf(alpha);
    let w0: Vec<f64> = r.iter().zip(w.values()).map(|(r, w)| r.powf(-e) * w.powf(ss0)).collect();
    let v0: Vec<f64> = r
        .iter()
        .zip(ratio_alpha.values())
        .zip(v.values())
        .map(|((r, q), v)| (r * q).powf(-e) * v.powf(ss0))
        .collect();
    Ok(Core {
        w0: Weight::new(w0)?,
        v0: Weight::new(v0)?,
        r,
        iterations: iterate.iterations,
        lower,
        exact,
        used,
        retries,
        verified,
        checks,
    })
}

/// Base weights `(w0, v0)` with `f ∈ L^{p0}_{v0}`, using the unit dual element `h = w μ(Ω)^{-1/u}`.
pub fn embed(basis: &SetBasis, params: &FactorParams, w: &Weight, v: &Weight, f: &[f64], options: &RdfOptions) -> Result<RdfResult, RdfError> {
    let c = basis.space().total_mass().powf(-params.u.recip());
    let h: Vec<f64> = w.values().iter().map(|x| x * c).collect();
    factor_pair(basis, params, w, v, f, &h, options)
}

/// Output of [`embed_mixed`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedEmbedding {
    /// Weights on the outer factor from the first step.
    pub mu: Weight,
    pub nu: Weight,
    /// Weights on the product space from the second step.
    pub w0: Weight,
    pub v0: Weight,
    pub outer: RdfResult,
    pub inner: RdfResult,
    pub checks: Vec<Check>,
}

/// Two-level embedding on `Ω_1 × Ω_2` (point `(x1, x2)` at `x1 * n2 + x2`).
///
/// `level1` moves `(p0, s0, r0) → (p1, s1, r1)` and `level2` moves
/// `(p1, s1, r1) → (p2, s2, r2)`. The outer step embeds the slice norms
/// `x2 ↦ ‖f(., x2)‖_{L^{p1}_{v1}}` on `Ω_2`; the inner step then embeds `f` on the
/// product space with the tensor weights.
#[allow(clippy::too_many_arguments)]
pub fn embed_mixed(inner_basis: &SetBasis, outer_basis: &SetBasis, product: &SetBasis, level1: &FactorParams, level2: &FactorParams, w: (&Weight, &Weight), v: (&Weight, &Weight), f: &[f64], options: &RdfOptions) -> Result<MixedEmbedding, RdfError> {
    let (n1, n2) = (inner_basis.n_points(), outer_basis.n_points());
    if product.n_points() != n1 * n2 || f.len() != n1 * n2 {
        return Err(RdfError::BadInput("product layout does not match the factors".into()));
    }
    if (level1.p.recip() - level2.p0.recip()).abs() > 1e-12
        || (level1.s.recip() - level2.s0.recip()).abs() > 1e-12
        || (level1.r.recip() - level2.r0.recip()).abs() > 1e-12
    {
        return Err(RdfError::BadInput("level 2 must start where level 1 ends".into()));
    }
    let (w1, w2) = w;
    let (v1, v2) = v;
    let fv1: Vec<f64> = (0..n1 * n2).map(|i| f[i] * v1.values()[i / n2]).collect();
    let slices = crate::norms::slice_norms(&fv1, inner_basis.masses(), n2, level1.p);
    let outer = embed(outer_basis, level2, w2, v2, &slices, options)?;
    let (mu, nu) = (outer.w0.clone(), outer.v0.clone());
    let w_prod = w1.tensor(&mu);
    let v_prod = v1.tensor(&nu);
    let inner = embed(product, level1, &w_prod, &v_prod, f, options)?;
    let masses = product.masses();
    let mut checks = Vec::new();
    let direct = weighted_norm(f, v_prod.values(), masses, level1.p);
    let sliced_weighted: Vec<f64> = slices.iter().zip(nu.values()).map(|(a, b)| a * b).collect();
    let via_slices_weighted = lp_norm(&sliced_weighted, outer_basis.masses(), level1.p);
    checks.push(Check::close(
        "slice norm identity",
        direct,
        via_slices_weighted,
        1e-10 * direct.max(1.0),
    ));
    checks.push(Check::flag("f in base space", weighted_norm(f, inner.v0.values(), masses, level1.p0).is_finite()));
    let target_ratio = w1.div(v1).tensor(&w2.div(v2));
    let dev = inner
        .w0
        .div(&inner.v0)
        .values()
        .iter()
        .zip(target_ratio.values())
        .map(|(a, b)| (a / b - 1.0).abs())
        .fold(0.0f64, f64::max);
    let nonzero = level1.gamma_recip.abs() > RECIP_TOL || level2.gamma_recip.abs() > RECIP_TOL;
    checks.push(Check {
        name: "ratio is tensor of level ratios".into(),
        lhs: dev,
        rhs: 1e-9,
        passed: !nonzero || dev <= 1e-9,
    });
    checks.extend(outer.checks.iter().map(|c| Check {
        name: format!("outer: {}", c.name),
        ..c.clone()
    }));
    checks.extend(inner.checks.iter().map(|c| Check {
        name: format!("inner: {}", c.name),
        ..c.clone()
    }));
    Ok(MixedEmbedding {
        w0: inner.w0.clone(),
        v0: inner.v0.clone(),
        mu,
        nu,
        outer,
        inner,
        checks,
    })
}

/// `h_j = w_{1j} (|h| w_1^{-λ})^{q̃1'/u_{1j}}` with `w_1 = Π w_{1j}`.
pub fn split_dual_function(h: &[f64], w1: &[Weight], masses: &[f64], lambda: f64, q1t_dual: Exponent, u1: &[Exponent]) -> Result<Vec<Vec<f64>>, RdfError> {
    if w1.len() != u1.len() || w1.is_empty() {
        return Err(RdfError::BadInput("need one weight and one exponent per index".into()));
    }
    if q1t_dual.is_infinite() {
        return Err(RdfError::BadInput("the split needs a finite dual exponent".into()));
    }
    let total = Weight::product(w1).expect("nonempty");
    let g: Vec<f64> = h.iter().zip(total.values()).map(|(h, w)| h.abs() * w.powf(-lambda)).collect();
    let norm = lp_norm(&g, masses, q1t_dual);
    if (norm - 1.0).abs() > 1e-9 {
        return Err(RdfError::BadInput(format!("|h| w^-lambda has norm {norm}, expected 1")));
    }
    let sum: f64 = u1.iter().map(|u| lambda * u.recip()).sum();
    if (sum - q1t_dual.recip()).abs() > 1e-12 {
        return Err(RdfError::BadInput(format!("sum of lambda/u_1j is {sum}, expected {}", q1t_dual.recip())));
    }
    Ok(w1
        .iter()
        .zip(u1)
        .map(|(wj, uj)| {
            let e = uj.recip() / q1t_dual.recip();
            g.iter().zip(wj.values()).map(|(g, w)| w * g.powf(e)).collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::space::{make_dyadic_space, product_space};
    use crate::weights::sampling;

    fn e(s: &str) -> Exponent {
        s.parse().unwrap()
    }

    #[test]
    fn constant_iterate_is_geometric() {
        let b = make_dyadic_space(3).unwrap();
        let one = Weight::ones(8);
        let (kappa, op) = (2.0, 1.5);
        let it = rdf_iterate(&b, &one, &one, Exponent::TWO, kappa, &[1.0; 8], op).unwrap();
        let q = 1.0 / (2.0 * op);
        let expected = 1.0 / (1.0 - q);
        assert!(it.r.iter().all(|&x| (x - expected).abs() < 1e-11));
    }

    #[test]
    fn point_indicator_properties() {
        let b = make_dyadic_space(3).unwrap();
        let mut r = rng::stream(11, 0, 0);
        let w = sampling::log_uniform(8, &mut r);
        let v = sampling::log_uniform(8, &mut r);
        let mut h = vec![0.0; 8];
        h[3] = 1.0;
        let s = Exponent::TWO;
        let op = crate::maximal::opnorm_maximal(&b, &w, &v, s, &AscentBudget::default()).unwrap().value * 1.05;
        let it = rdf_iterate(&b, &w, &v, s, 2.0, &h, op).unwrap();
        for c in iterate_checks(&b, &w, &v, s, 2.0, &h, &it.r, op).unwrap() {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn kappa_near_one_keeps_h() {
        let b = make_dyadic_space(3).unwrap();
        let one = Weight::ones(8);
        let h = [1.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 3.0];
        let it = rdf_iterate(&b, &one, &one, Exponent::TWO, 1.0 + 1e-9, &h, 1.0).unwrap();
        let diff: Vec<f64> = it.r.iter().zip(&h).map(|(a, b)| a - b).collect();
        assert!(lp_norm(&diff, b.masses(), Exponent::TWO) < 1e-8);
    }

    #[test]
    fn iterate_rejects_bad_input() {
        let b = make_dyadic_space(2).unwrap();
        let one = Weight::ones(4);
        assert!(rdf_iterate(&b, &one, &one, Exponent::TWO, 2.0, &[0.0; 4], 1.0).is_err());
        assert!(rdf_iterate(&b, &one, &one, Exponent::INFINITY, 2.0, &[1.0; 4], 1.0).is_err());
        assert!(rdf_iterate(&b, &one, &one, Exponent::TWO, 1.0, &[1.0; 4], 1.0).is_err());
    }

    #[test]
    fn underestimated_norm_diverges() {
        let b = make_dyadic_space(3).unwrap();
        let one = Weight::ones(8);
        let err = rdf_iterate(&b, &one, &one, Exponent::TWO, 2.0, &[1.0; 8], 0.25).unwrap_err();
        assert!(matches!(err, RdfError::NonConvergence { .. }));
    }

    #[test]
    fn zero_shift_is_identity() {
        let b = make_dyadic_space(3).unwrap();
        let mut r = rng::stream(12, 0, 0);
        let w = sampling::log_uniform(8, &mut r);
        let v = sampling::log_uniform(8, &mut r);
        let params = FactorParams::canonical(e("2"), e("2"), e("3"), 0.0).unwrap();
        let f = sampling::function(8, &mut r, 0.0);
        let res = embed(&b, &params, &w, &v, &f, &RdfOptions::new(2.0)).unwrap();
        assert_eq!(res.w0, w);
        assert_eq!(res.v0, v);
        assert!(res.passed());
    }

    #[test]
    fn showcase_tuple_passes() {
        let b = make_dyadic_space(4).unwrap();
        let mut r = rng::stream(13, 0, 0);
        let w = sampling::log_uniform(16, &mut r);
        let f = sampling::function(16, &mut r, 0.2);
        let h = sampling::function(16, &mut r, 0.2);
        // (p0, s0, r0) = (2/3, 1, inf), 1/γ = -1/2; the dual side runs from u0 = inf to u = 2
        let params = FactorParams::new(Exponent::INFINITY, e("2/3"), e("1"), Exponent::INFINITY, e("2"), e("1"), e("2"), e("2")).unwrap();
        let res = factor_pair(&b, &params, &w, &w, &f, &h, &RdfOptions::new(2.0)).unwrap();
        assert_eq!(res.case, ShiftCase::Negative);
        assert_eq!(res.t_over_gamma, 1.0);
        for c in &res.checks {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn negative_shift_equals_mirrored_positive() {
        let b = make_dyadic_space(3).unwrap();
        let mut r = rng::stream(14, 0, 0);
        let w = sampling::log_uniform(8, &mut r);
        let v = sampling::log_uniform(8, &mut r);
        let f = sampling::function(8, &mut r, 0.0);
        let h = sampling::function(8, &mut r, 0.0);
        // s0 = 3 → s = 6/5 is a positive shift; its mirror runs with s0 = 6/5 → s = 3
        let pos = FactorParams::new(e("3/2"), e("2"), e("3"), e("6/5"), e("6"), e("1"), e("6/5"), e("3")).unwrap();
        assert!(pos.gamma_recip > 0.0);
        let neg = pos.swapped();
        let opts = RdfOptions::new(2.0).with_opnorm(OpnormSource::Measure(AscentBudget {
            restarts: 8,
            iterations: 200,
            seed: 1,
        }));
        let a = factor_pair(&b, &pos, &w, &v, &f, &h, &opts).unwrap();
        let m = factor_pair(&b, &neg, &v.recip(), &w.recip(), &h, &f, &opts).unwrap();
        for (x, y) in a.w0.values().iter().zip(m.v0.recip().values()) {
            assert!((x / y - 1.0).abs() < 1e-12);
        }
        for (x, y) in a.v0.values().iter().zip(m.w0.recip().values()) {
            assert!((x / y - 1.0).abs() < 1e-12);
        }
        assert!(a.passed() && m.passed());
    }

    #[test]
    fn split_single_and_pair() {
        let masses = [0.25; 4];
        let w1 = Weight::new(vec![1.0, 2.0, 0.5, 3.0]).unwrap();
        let w2 = Weight::new(vec![2.0, 1.0, 1.5, 0.7]).unwrap();
        let lambda = 0.4;
        let q = Exponent::new(2.5).unwrap();
        // one index: u_11 = λ q̃1'
        let u = Exponent::from_recip(q.recip() / lambda).unwrap();
        let raw = [1.0, 0.3, 2.0, 0.0];
        let scale = |w: &Weight| {
            let g: Vec<f64> = raw.iter().zip(w.values()).map(|(h, w)| h * w.powf(-lambda)).collect();
            let n = lp_norm(&g, &masses, q);
            raw.iter().map(|h| h / n).collect::<Vec<f64>>()
        };
        let h = scale(&w1);
        let parts = split_dual_function(&h, std::slice::from_ref(&w1), &masses, lambda, q, &[u]).unwrap();
        for (x, hx) in parts[0].iter().zip(&h) {
            assert!((x.powf(lambda) - hx).abs() < 1e-12);
        }
        let w12 = w1.mul(&w2);
        let h = scale(&w12);
        let half = Exponent::from_recip(q.recip() / lambda / 2.0).unwrap();
        let parts = split_dual_function(&h, &[w1.clone(), w2.clone()], &masses, lambda, q, &[half, half]).unwrap();
        for x in 0..4 {
            let prod = parts[0][x].powf(lambda) * parts[1][x].powf(lambda);
            assert!((prod - h[x]).abs() < 1e-12);
        }
        for (part, wj) in parts.iter().zip([&w1, &w2]) {
            let n = crate::norms::weighted_norm(part, wj.recip().values(), &masses, half);
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert!(split_dual_function(&raw, &[w1], &masses, lambda, q, &[u]).is_err());
    }

    #[test]
    fn mixed_embedding_two_levels() {
        let a = make_dyadic_space(2).unwrap();
        let b = make_dyadic_space(2).unwrap();
        let prod = product_space(&a, &b).unwrap();
        let mut r = rng::stream(15, 0, 0);
        let (w1, w2) = (sampling::log_uniform(4, &mut r), sampling::log_uniform(4, &mut r));
        let f = sampling::function(16, &mut r, 0.1);
        let level1 = FactorParams::canonical(e("2"), e("2"), e("2"), -0.25).unwrap();
        let level2 = FactorParams::canonical(level1.p, level1.s, level1.r, 0.125).unwrap();
        let emb = embed_mixed(&a, &b, &prod, &level1, &level2, (&w1, &w2), (&w1, &w2), &f, &RdfOptions::new(2.0)).unwrap();
        for c in &emb.checks {
            assert!(c.passed, "{c:?}");
        }
    }
}

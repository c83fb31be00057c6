//! Trial-by-trial replay of off-diagonal extrapolation.
//!
//! A trial draws target weights `(w_1j, v_1j)` and inputs `f_j`, then for a set of
//! dual functions `h` rebuilds base weights `(w_0j, v_0j)` with the majorant
//! construction and checks every link from the base bound to the target bound
//! numerically. The target inequality
//! `‖Tf‖_{L^{q1}_{w1}} ≤ κ^β φ(C) Π ‖S_j f_j‖_{L^{p1j}_{v1j}}` is checked on its own,
//! so a broken link and a broken conclusion are reported separately.

mod operators;
mod variants;

pub use operators::*;
pub use variants::*;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{kappa_dual, rescale_params, ConstantsReport, Exponent, ExponentError, ExponentTuple, RescaledParams, ShiftCase, RECIP_TOL};
use crate::maximal::{maximal_bound, AscentBudget, EstimateKind, MaximalError};
use crate::norms::{lp_norm, weighted_norm};
use crate::rdf::{factor_pair, split_dual_function, Check, FactorParams, OpnormSource, RdfError, RdfOptions, SAFETY_FACTOR};
use crate::rng::{self, Rng};
use crate::space::{SetBasis, SpaceError};
use crate::transfer::TransferError;
use crate::weights::sampling::{self, WeightSampler};
use crate::weights::{characteristic, Weight, WeightError};

/// Relative slack for links that are exact inequalities (Hölder, duality).
pub const EXACT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ExtrapolateError {
    #[error(transparent)]
    Exponent(#[from] ExponentError),
    #[error(transparent)]
    Rdf(#[from] RdfError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Maximal(#[from] MaximalError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("operator takes {operator} inputs but the parameters describe {params}")]
    Arity { operator: usize, params: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T, E = ExtrapolateError> = std::result::Result<T, E>;

/// Base exponents of an `m`-linear problem and the shifts `1/γ_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiParams {
    pub q0: Exponent,
    pub p0: Vec<Exponent>,
    pub s0: Vec<Exponent>,
    pub r0: Vec<Exponent>,
    pub gamma_recip: Vec<f64>,
}

/// Exponents of the duality step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualExponents {
    pub lambda: f64,
    pub q0_tilde: Exponent,
    pub q1_tilde: Exponent,
    pub u0: Vec<Exponent>,
    pub u1: Vec<Exponent>,
}

impl MultiParams {
    pub fn new(q0: Exponent, p0: Vec<Exponent>, s0: Vec<Exponent>, r0: Vec<Exponent>, gamma_recip: Vec<f64>) -> Result<Self> {
        let p = Self { q0, p0, s0, r0, gamma_recip };
        p.validate()?;
        Ok(p)
    }

    /// The same base tuple for each of `m` indices.
    pub fn uniform(m: usize, q0: Exponent, p0: Exponent, s0: Exponent, r0: Exponent, gamma_recip: f64) -> Result<Self> {
        Self::new(q0, vec![p0; m], vec![s0; m], vec![r0; m], vec![gamma_recip; m])
    }

    pub fn linear(t: &ExponentTuple) -> Result<Self> {
        Self::new(t.q0, vec![t.p0], vec![t.s0], vec![t.r0], vec![t.gamma_recip])
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.arity();
        if m == 0 || self.s0.len() != m || self.r0.len() != m || self.gamma_recip.len() != m {
            return Err(ExtrapolateError::Params("p0, s0, r0 and gamma need one entry per input".into()));
        }
        if self.gamma_recip.iter().any(|g| !g.is_finite()) {
            return Err(ExtrapolateError::Params("gamma must be finite".into()));
        }
        for j in 0..m {
            let r = self.rescaled(j)?;
            if r.case != ShiftCase::Zero && self.s0[j].recip() + self.r0[j].recip() <= RECIP_TOL {
                return Err(ExtrapolateError::Params(format!("index {j}: s0 = r0 = inf leaves no room to shift")));
            }
            if r.case != ShiftCase::Zero && r.t.is_infinite() {
                return Err(ExtrapolateError::Params(format!("index {j}: rescaled exponent is infinite")));
            }
            self.p1(j)?;
        }
        self.q1()?;
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.p0.len()
    }

    pub fn gamma_total(&self) -> f64 {
        self.gamma_recip.iter().sum()
    }

    /// `1/q1 = 1/q0 + Σ 1/γ_j`.
    pub fn q1(&self) -> Result<Exponent> {
        Ok(Exponent::from_recip(clamp(self.q0.recip() + self.gamma_total()))?)
    }

    pub fn p1(&self, j: usize) -> Result<Exponent> {
        Ok(Exponent::from_recip(clamp(self.p0[j].recip() + self.gamma_recip[j]))?)
    }

    pub fn rescaled(&self, j: usize) -> Result<RescaledParams> {
        Ok(rescale_params(self.gamma_recip[j], self.s0[j], self.r0[j])?)
    }

    pub fn s1(&self, j: usize) -> Result<Exponent> {
        Ok(self.rescaled(j)?.s)
    }

    pub fn r1(&self, j: usize) -> Result<Exponent> {
        Ok(self.rescaled(j)?.r)
    }

    /// `β = Σ t_j/|γ_j|`.
    pub fn beta(&self) -> Result<f64> {
        (0..self.arity()).map(|j| Ok(self.rescaled(j)?.t_over_gamma())).sum()
    }

    /// `1/λ = max_j (1/q0 + m|1/γ_j|) + 1`, `q̃ = q/λ` and the split exponents
    /// `1/u_0j = (1/λ - 1/q0)/m`, `1/u_1j = 1/u_0j - 1/γ_j`.
    pub fn duals(&self) -> Result<DualExponents> {
        let m = self.arity() as f64;
        let top = self.gamma_recip.iter().fold(0.0f64, |a, g| a.max(self.q0.recip() + m * g.abs()));
        let lambda = 1.0 / (top + 1.0);
        let q1 = self.q1()?;
        let u0r = (1.0 / lambda - self.q0.recip()) / m;
        let u0 = vec![Exponent::from_recip(u0r)?; self.arity()];
        let u1 = self
            .gamma_recip
            .iter()
            .map(|g| Exponent::from_recip(clamp(u0r - g)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DualExponents {
            lambda,
            q0_tilde: Exponent::from_recip(lambda * self.q0.recip())?,
            q1_tilde: Exponent::from_recip(lambda * q1.recip())?,
            u0,
            u1,
        })
    }

    /// Exponents handed to the majorant construction for index `j`.
    pub fn factor_params(&self, j: usize, d: &DualExponents) -> Result<FactorParams> {
        Ok(FactorParams::new(
            d.u0[j],
            self.p0[j],
            self.s0[j],
            self.r0[j],
            d.u1[j],
            self.p1(j)?,
            self.s1(j)?,
            self.r1(j)?,
        )?)
    }

    /// The target exponents of this level as the base of the next one.
    pub fn next_level(&self, gamma_recip: Vec<f64>) -> Result<MultiParams> {
        let m = self.arity();
        MultiParams::new(
            self.q1()?,
            (0..m).map(|j| self.p1(j)).collect::<Result<_>>()?,
            (0..m).map(|j| self.s1(j)).collect::<Result<_>>()?,
            (0..m).map(|j| self.r1(j)).collect::<Result<_>>()?,
            gamma_recip,
        )
    }
}

/// Snaps reciprocals within rounding of zero to zero.
fn clamp(r: f64) -> f64 {
    if r.abs() <= RECIP_TOL {
        0.0
    } else {
        r
    }
}

/// `β` and `C_j = (κ' ‖M‖_j)^{t/|γ|} [w_1j, v_1j]^{t/t0}` from given bounds.
///
/// Nothing here looks at `q0` or `p0`, so tuples sharing `(s0, r0, γ)` get the same
/// constants.
pub fn nominal_constants(params: &MultiParams, kappa: f64, opnorms: &[f64], chars: &[f64]) -> Result<ConstantsReport> {
    let kd = kappa_dual(kappa)?;
    let mut beta = 0.0;
    let mut c_kappa = Vec::with_capacity(params.arity());
    for j in 0..params.arity() {
        let r = params.rescaled(j)?;
        let e = r.t_over_gamma();
        beta += e;
        let lead = if e == 0.0 { 1.0 } else { (kd * opnorms[j]).powf(e) };
        c_kappa.push(lead * chars[j].powf(r.t_over_t0()));
    }
    Ok(ConstantsReport {
        kappa,
        kappa_dual: kd,
        beta,
        c_kappa,
        b: None,
    })
}

/// Settings shared by every harness run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessOptions {
    pub trials: usize,
    pub seed: u64,
    pub kappa: f64,
    /// Random dual functions per trial, on top of the norming one.
    pub dual_samples: usize,
    /// Budget for the rescaled maximal bound, measured once per trial and index.
    pub opnorm_budget: AscentBudget,
    pub weights: WeightSampler,
    /// Draw `v = w` instead of an independent `v`.
    pub equal_weights: bool,
    pub zero_prob: f64,
    /// Relative slack on the target and on links that pass through the majorant.
    pub tolerance: f64,
    pub max_retries: usize,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        Self {
            trials: 200,
            seed: 42,
            kappa: 2.0,
            dual_samples: 64,
            opnorm_budget: AscentBudget {
                restarts: 8,
                iterations: 200,
                seed: 0,
            },
            weights: WeightSampler::Mixed,
            equal_weights: false,
            zero_prob: 0.1,
            tolerance: 1e-6,
            max_retries: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialVerdict {
    Pass,
    Fail,
    /// The base constant is only known on a sampled range that `C` left.
    EnvelopeUndefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpnormRecord {
    pub lower: f64,
    pub exact: bool,
    /// Largest bound the majorant needed across dual functions.
    pub used: f64,
    pub retries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub verdict: TrialVerdict,
    /// Largest `‖Tf‖_{q0,w0} / Π‖S_j f_j‖_{p0j,v0j}` over the rebuilt base weights.
    pub base_ratio: f64,
    /// `[w_0j, v_0j]_(s0j, r0j)` at the norming dual function.
    pub base_char: Vec<f64>,
    /// `‖Tf‖_{q1,w1} / Π‖S_j f_j‖_{p1j,v1j}`.
    pub target_ratio: f64,
    /// `[w_1j, v_1j]_(s1j, r1j)`.
    pub target_char: Vec<f64>,
    pub constants: ConstantsReport,
    /// Constants actually used, at least the nominal ones.
    pub c_used: Vec<f64>,
    pub phi_target: Option<f64>,
    pub target_lhs: f64,
    pub target_rhs: Option<f64>,
    pub target_ok: bool,
    pub chain_ok: bool,
    pub dual_functions: usize,
    pub opnorms: Vec<Option<OpnormRecord>>,
    /// One entry per link, holding its worst instance over dual functions.
    pub chain_checks: Vec<Check>,
}

impl TrialRecord {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.chain_checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub operator: String,
    pub variant: String,
    pub levels: Vec<MultiParams>,
    pub kappa: f64,
    pub trials: Vec<TrialRecord>,
    pub passed: usize,
    pub failed: usize,
    pub envelope_undefined: usize,
    /// Every link held in every trial.
    pub chain_all_pass: bool,
    /// In every trial where all links held, the target held too.
    pub chain_implies_target: bool,
    /// Pass iff the target held in every trial where it could be evaluated.
    pub verdict: Verdict,
    pub counterexample: Option<TrialRecord>,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn from_trials(operator: String, variant: &str, levels: Vec<MultiParams>, kappa: f64, trials: Vec<TrialRecord>) -> Self {
        let count = |v: TrialVerdict| trials.iter().filter(|t| t.verdict == v).count();
        let (passed, failed, envelope_undefined) = (count(TrialVerdict::Pass), count(TrialVerdict::Fail), count(TrialVerdict::EnvelopeUndefined));
        let counterexample = trials.iter().find(|t| !t.target_ok && t.verdict != TrialVerdict::EnvelopeUndefined).cloned();
        Self {
            operator,
            variant: variant.into(),
            levels,
            kappa,
            chain_all_pass: trials.iter().all(|t| t.chain_ok),
            chain_implies_target: trials.iter().all(|t| !t.chain_ok || t.target_ok || t.verdict == TrialVerdict::EnvelopeUndefined),
            verdict: if counterexample.is_none() { Verdict::Pass } else { Verdict::Fail },
            counterexample,
            passed,
            failed,
            envelope_undefined,
            trials,
            notes: Vec::new(),
        }
    }
}

/// Keeps one entry per check name: all must pass, and the largest `lhs/rhs` is shown.
#[derive(Debug, Default, Clone)]
pub(crate) struct CheckLog(Vec<Check>);

fn margin(c: &Check) -> f64 {
    if c.rhs > 0.0 {
        c.lhs / c.rhs
    } else {
        c.lhs - c.rhs
    }
}

impl CheckLog {
    pub(crate) fn push(&mut self, c: Check) {
        match self.0.iter_mut().find(|e| e.name == c.name) {
            Some(e) => {
                let passed = e.passed && c.passed;
                let worse = (!c.passed && e.passed) || (c.passed == e.passed && margin(&c) > margin(e));
                if worse {
                    *e = c;
                }
                e.passed = passed;
            }
            None => self.0.push(c),
        }
    }

    pub(crate) fn extend(&mut self, checks: impl IntoIterator<Item = Check>) {
        checks.into_iter().for_each(|c| self.push(c));
    }

    pub(crate) fn all_pass(&self) -> bool {
        self.0.iter().all(|c| c.passed)
    }

    pub(crate) fn into_vec(self) -> Vec<Check> {
        self.0
    }
}

/// Everything a single trial needs besides the operator.
pub struct TrialSetup<'a> {
    pub basis: &'a SetBasis,
    pub params: &'a MultiParams,
    pub w1: &'a [Weight],
    pub v1: &'a [Weight],
    pub inputs: &'a [Vec<f64>],
    /// Bounds for the rescaled maximal operator per index, `None` in the zero case.
    pub opnorms: &'a [Option<OpnormSource>],
    pub options: &'a HarnessOptions,
    pub dual_samples: usize,
    pub index: usize,
}

/// Lower bounds for the rescaled maximal operator at `(w_1j, v_1j)`.
pub fn measure_opnorms(basis: &SetBasis, params: &MultiParams, w1: &[Weight], v1: &[Weight], budget: &AscentBudget) -> Result<Vec<Option<OpnormSource>>> {
    (0..params.arity())
        .map(|j| {
            let r = params.rescaled(j)?;
            let Some(tr) = r.transform() else { return Ok(None) };
            let (wt, vt) = tr.apply(&w1[j], &v1[j]);
            let budget = AscentBudget {
                seed: rng::child_seed(budget.seed, rng::tag("opnorm"), j as u64),
                ..*budget
            };
            let est = maximal_bound(basis, &wt, &vt, r.t, &budget)?;
            Ok(Some(OpnormSource::Known {
                value: est.value,
                exact: est.kind == EstimateKind::Exact,
            }))
        })
        .collect()
}

fn nominal_opnorm(source: &Option<OpnormSource>) -> f64 {
    match source {
        Some(OpnormSource::Known { value, exact }) => value * if *exact { 1.0 } else { SAFETY_FACTOR },
        _ => 1.0,
    }
}

/// The norming dual function `h = G w1^λ` with `G = F^{q̃1-1}/‖F‖^{q̃1-1}`,
/// `F = (|Tf| w1)^λ`, so `∫ |Tf|^λ h = ‖Tf‖^λ_{q1,w1}`. A point mass at the
/// maximum of `F` when `q1 = ∞`.
fn norming_dual(output: &[f64], w1: &Weight, masses: &[f64], lambda: f64, q1_tilde: Exponent) -> Option<Vec<f64>> {
    let f: Vec<f64> = output.iter().zip(w1.values()).map(|(t, w)| (t.abs() * w).powf(lambda)).collect();
    let top = f.iter().fold(0.0f64, |a, b| a.max(*b));
    if top == 0.0 || !top.is_finite() {
        return None;
    }
    let g: Vec<f64> = if q1_tilde.is_infinite() {
        let k = f.iter().position(|x| *x == top)?;
        (0..f.len()).map(|x| if x == k { 1.0 / masses[x] } else { 0.0 }).collect()
    } else {
        let e = q1_tilde.value() - 1.0;
        let scaled: Vec<f64> = f.iter().map(|x| x / top).collect();
        let norm = lp_norm(&scaled, masses, q1_tilde);
        scaled.iter().map(|x| (x / norm).powf(e)).collect()
    };
    Some(g.iter().zip(w1.values()).map(|(g, w)| g * w.powf(lambda)).collect())
}

/// A random positive `G` with unit `L^{q̃1'}` norm, returned as `h = G w1^λ`.
fn random_dual(rng: &mut Rng, w1: &Weight, masses: &[f64], lambda: f64, dual: Exponent) -> Vec<f64> {
    let g = sampling::function(masses.len(), rng, 0.2);
    let g = if g.iter().all(|x| *x == 0.0) { vec![1.0; masses.len()] } else { g };
    let norm = lp_norm(&g, masses, dual);
    g.iter().zip(w1.values()).map(|(g, w)| g / norm * w.powf(lambda)).collect()
}

/// Replays the argument for one trial.
pub fn run_trial(op: &dyn Operator, t: &TrialSetup) -> Result<TrialRecord> {
    let (basis, params) = (t.basis, t.params);
    let m = params.arity();
    if op.arity() != m {
        return Err(ExtrapolateError::Arity { operator: op.arity(), params: m });
    }
    let masses = basis.masses();
    let kappa = t.options.kappa;
    let tol = t.options.tolerance;
    let duals = params.duals()?;
    let q1 = params.q1()?;
    let q0t_dual = duals.q0_tilde.dual()?;
    let q1t_dual = duals.q1_tilde.dual()?;

    let output = op.apply(t.inputs);
    let sources: Vec<Vec<f64>> = (0..m).map(|j| op.source(j, &t.inputs[j])).collect();
    let w1 = Weight::product(t.w1).expect("arity is positive");
    let target_lhs = weighted_norm(&output, w1.values(), masses, q1);
    let src1: f64 = (0..m)
        .map(|j| Ok(weighted_norm(&sources[j], t.v1[j].values(), masses, params.p1(j)?)))
        .product::<Result<f64>>()?;
    let target_char: Vec<f64> = (0..m)
        .map(|j| Ok(characteristic(&t.w1[j], &t.v1[j], params.s1(j)?, params.r1(j)?, basis).value))
        .collect::<Result<_>>()?;
    let nominal: Vec<f64> = t.opnorms.iter().map(nominal_opnorm).collect();
    let constants = nominal_constants(params, kappa, &nominal, &target_char)?;
    let beta = constants.beta;
    let per_index: Vec<FactorParams> = (0..m).map(|j| params.factor_params(j, &duals)).collect::<Result<_>>()?;
    let ratios1: Vec<Weight> = (0..m).map(|j| t.w1[j].div(&t.v1[j])).collect();

    let mut hs: Vec<Vec<f64>> = Vec::new();
    let norming = norming_dual(&output, &w1, masses, duals.lambda, duals.q1_tilde);
    let has_norming = norming.is_some();
    hs.extend(norming);
    let mut rng = rng::stream(t.options.seed, rng::tag("duals"), t.index as u64);
    hs.extend((0..t.dual_samples).map(|_| random_dual(&mut rng, &w1, masses, duals.lambda, q1t_dual)));

    let mut log = CheckLog::default();
    let mut c_used = constants.c_kappa.clone();
    let mut opnorms: Vec<Option<OpnormRecord>> = t
        .opnorms
        .iter()
        .map(|s| match s {
            Some(OpnormSource::Known { value, exact }) => Some(OpnormRecord {
                lower: *value,
                exact: *exact,
                used: 0.0,
                retries: 0,
            }),
            _ => None,
        })
        .collect();
    let mut pairings = Vec::with_capacity(hs.len());
    let mut base_ratio = 0.0f64;
    let mut base_char = Vec::new();
    let mut base_undefined = false;
    let mut base_phis = Vec::new();

    for (k, h) in hs.iter().enumerate() {
        let parts = split_dual_function(h, t.w1, masses, duals.lambda, q1t_dual, &duals.u1)?;
        let rebuilt: Vec<f64> = (0..h.len()).map(|x| parts.iter().map(|p| p[x].powf(duals.lambda)).product()).collect();
        let worst = rebuilt.iter().zip(h).fold(0.0f64, |a, (r, h)| a.max((r - h).abs() / h.abs().max(f64::MIN_POSITIVE)));
        log.push(Check::le("dual split reproduces h", worst, EXACT_TOL, 0.0));
        for (j, part) in parts.iter().enumerate() {
            let n = weighted_norm(part, t.w1[j].recip().values(), masses, duals.u1[j]);
            log.push(Check::close("dual split factors have unit norm", n, 1.0, EXACT_TOL));
        }

        let mut results = Vec::with_capacity(m);
        for j in 0..m {
            let opts = RdfOptions {
                kappa,
                opnorm: t.opnorms[j].unwrap_or(OpnormSource::Known { value: 1.0, exact: true }),
                max_retries: t.options.max_retries,
            };
            match factor_pair(basis, &per_index[j], &t.w1[j], &t.v1[j], &sources[j], &parts[j], &opts) {
                Ok(r) => results.push(r),
                Err(RdfError::NonConvergence { .. } | RdfError::RetriesExhausted { .. }) => break,
                Err(e) => return Err(e.into()),
            }
        }
        log.push(Check::flag("majorant constructed", results.len() == m));
        if results.len() < m {
            continue;
        }
        for (j, r) in results.iter().enumerate() {
            log.extend(r.checks.iter().map(|c| Check { name: format!("factor weights: {}", c.name), ..c.clone() }));
            c_used[j] = c_used[j].max(r.char_bound_rhs);
            if let Some(rec) = opnorms[j].as_mut() {
                rec.used = rec.used.max(r.opnorm_used);
                rec.retries = rec.retries.max(r.retries);
            }
        }

        let w0s: Vec<Weight> = results.iter().map(|r| r.w0.clone()).collect();
        let v0s: Vec<Weight> = results.iter().map(|r| r.v0.clone()).collect();
        let w0 = Weight::product(&w0s).expect("arity is positive");
        let pairing: f64 = output.iter().zip(h).zip(masses).map(|((o, h), mu)| mu * o.abs().powf(duals.lambda) * h).sum();
        pairings.push(pairing);
        let norm_q0 = weighted_norm(&output, w0.values(), masses, params.q0);
        let h_w0 = weighted_norm(h, w0.powf(-duals.lambda).values(), masses, q0t_dual);
        log.push(Check::le("pairing bounded by Hölder at base weights", pairing, norm_q0.powf(duals.lambda) * h_w0, EXACT_TOL));
        let split_prod: f64 = (0..m)
            .map(|j| weighted_norm(&parts[j], w0s[j].recip().values(), masses, duals.u0[j]).powf(duals.lambda))
            .product();
        log.push(Check::le("dual factor norms bound the dual norm", h_w0, split_prod, EXACT_TOL));

        let src0: f64 = (0..m).map(|j| weighted_norm(&sources[j], v0s[j].values(), masses, params.p0[j])).product();
        let chars0: Vec<f64> = results.iter().map(|r| r.char_bound_lhs).collect();
        let ratios0: Vec<Weight> = (0..m).map(|j| w0s[j].div(&v0s[j])).collect();
        let ctx = PhiContext { basis, params, ratios: &ratios0 };
        match op.phi(&chars0, &ctx) {
            Some(phi0) => {
                log.push(Check::le("base bound at rebuilt weights", norm_q0, phi0 * src0, tol));
                base_phis.push(phi0);
            }
            None => base_undefined = true,
        }
        if src0 > 0.0 {
            base_ratio = base_ratio.max(norm_q0 / src0);
        }
        if k == 0 {
            base_char = chars0.clone();
        }
        let base = BaseContext {
            basis,
            params,
            w0: &w0s,
            v0: &v0s,
            chars: &chars0,
            inputs: t.inputs,
            output: &output,
        };
        log.extend(op.base_checks(&base)?);

        let majorant_lhs: f64 = results.iter().map(|r| r.normprod_lhs).product();
        let majorant_rhs: f64 = results.iter().map(|r| r.normprod_rhs).product();
        log.push(Check::le("product of majorant norm bounds", majorant_lhs, majorant_rhs, tol));
        let nominal_majorant = kappa.powf(beta) * src1;
        log.push(Check::le("majorant norm bound at unit dual norm", majorant_lhs, nominal_majorant, tol));
    }

    let ctx1 = PhiContext { basis, params, ratios: &ratios1 };
    let phi_target = op.phi(&c_used, &ctx1);
    let target_rhs = phi_target.map(|phi| kappa.powf(beta) * phi * src1);
    if let Some(bound) = target_rhs {
        for p in &pairings {
            log.push(Check::le("pairing bounded by target constant", *p, bound.powf(duals.lambda), tol));
        }
        let phi = phi_target.expect("bound implies phi");
        for b in &base_phis {
            log.push(Check::le("base constant below target constant", *b, phi, tol));
        }
    }
    if has_norming {
        if let Some(p) = pairings.first() {
            log.push(Check::close("norming dual attains the norm", p / target_lhs.powf(duals.lambda), 1.0, 1e-8));
        }
    }
    for p in pairings.iter() {
        log.push(Check::le("sampled pairings stay below the norm", *p, target_lhs.powf(duals.lambda), EXACT_TOL));
    }

    let target_ok = target_rhs.is_some_and(|b| Check::le("", target_lhs, b, tol).passed);
    let chain_ok = log.all_pass();
    let verdict = if phi_target.is_none() || (base_undefined && !target_ok) {
        TrialVerdict::EnvelopeUndefined
    } else if target_ok && chain_ok {
        TrialVerdict::Pass
    } else {
        TrialVerdict::Fail
    };
    Ok(TrialRecord {
        index: t.index,
        verdict,
        base_ratio,
        base_char,
        target_ratio: if src1 > 0.0 { target_lhs / src1 } else { 0.0 },
        target_char,
        constants,
        c_used,
        phi_target,
        target_lhs,
        target_rhs,
        target_ok,
        chain_ok,
        dual_functions: hs.len(),
        opnorms,
        chain_checks: log.into_vec(),
    })
}

pub(crate) fn sample_weights(options: &HarnessOptions, label: &str, n: usize, m: usize, trial: usize) -> (Vec<Weight>, Vec<Weight>) {
    let mut rng = rng::stream(options.seed, rng::tag(label), trial as u64);
    let mut w = Vec::with_capacity(m);
    let mut v = Vec::with_capacity(m);
    for _ in 0..m {
        let wj = options.weights.sample(n, &mut rng);
        let vj = if options.equal_weights { wj.clone() } else { options.weights.sample(n, &mut rng) };
        w.push(wj);
        v.push(vj);
    }
    (w, v)
}

pub(crate) fn sample_inputs(op: &dyn Operator, options: &HarnessOptions, n: usize, trial: usize) -> Vec<Vec<f64>> {
    if let Some(fixed) = op.trial_inputs(trial) {
        return fixed;
    }
    let mut rng = rng::stream(options.seed, rng::tag("functions"), trial as u64);
    let len = op.input_len(n);
    (0..op.arity())
        .map(|_| {
            let f = sampling::function(len, &mut rng, options.zero_prob);
            if f.iter().all(|x| *x == 0.0) {
                vec![1.0; len]
            } else {
                f
            }
        })
        .collect()
}

pub(crate) fn trial_budget(options: &HarnessOptions, trial: usize) -> AscentBudget {
    AscentBudget {
        seed: rng::child_seed(options.seed, rng::tag("opnorm"), trial as u64),
        ..options.opnorm_budget
    }
}

/// Runs `options.trials` independent trials of the `m`-linear argument.
pub fn check_multilinear(op: &dyn Operator, basis: &SetBasis, params: &MultiParams, options: &HarnessOptions) -> Result<BoundReport> {
    params.validate()?;
    if op.arity() != params.arity() {
        return Err(ExtrapolateError::Arity { operator: op.arity(), params: params.arity() });
    }
    let n = basis.n_points();
    let trials = (0..options.trials)
        .into_par_iter()
        .map(|i| {
            let (w1, v1) = sample_weights(options, "weights", n, params.arity(), i);
            let inputs = sample_inputs(op, options, n, i);
            let opnorms = measure_opnorms(basis, params, &w1, &v1, &trial_budget(options, i))?;
            run_trial(
                op,
                &TrialSetup {
                    basis,
                    params,
                    w1: &w1,
                    v1: &v1,
                    inputs: &inputs,
                    opnorms: &opnorms,
                    options,
                    dual_samples: options.dual_samples,
                    index: i,
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::from_trials(op.name(), "multilinear", vec![params.clone()], options.kappa, trials))
}

/// The one-input case; identical to [`check_multilinear`] with `m = 1`.
pub fn check_linear(op: &dyn Operator, basis: &SetBasis, tuple: &ExponentTuple, options: &HarnessOptions) -> Result<BoundReport> {
    check_multilinear(op, basis, &MultiParams::linear(tuple)?, options)
}

#[cfg(test)]
mod tests;

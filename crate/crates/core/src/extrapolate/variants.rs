//! Mixed norms, weak type and vector-valued extensions, each replayed by running
//! the same trial engine on a lifted operator.
//!
//! - Mixed (two levels): on `Ω_2` the operator is `x2 ↦ ‖Tf(·, x2)‖_{L^{q1}_{w1}(Ω_1)}`.
//!   Its base bound at `(μ_j, ν_j)` is itself the one-level conclusion on
//!   `Ω_1 × Ω_2` for the tensor weights `(w_1j ⊗ μ_j, v_1j ⊗ ν_j)`, and each outer
//!   base check reruns that inner trial.
//! - Weak type: `T_λ f = λ 1_{|Tf| > λ}` for a grid of levels including the one
//!   where the weak norm is attained.
//! - Vector-valued: `ℓ^u` norms over `K` inputs, with the Minkowski and Hölder
//!   steps of the base bound checked at every set of rebuilt weights.

use serde::{Deserialize, Serialize};

use super::{
    measure_opnorms, run_trial, sample_inputs, sample_weights, trial_budget, BaseContext, BoundReport, CheckLog, ExtrapolateError, HarnessOptions, MultiParams, Operator, PhiContext, Result, TrialRecord, TrialSetup, TrialVerdict, EXACT_TOL,
};
use crate::exponents::Exponent;
use crate::norms::{lp_norm, mixed_norm, slice_norms, weak_norm, weak_norm_weighted_sets, weighted_norm};
use crate::rdf::Check;
use crate::space::{product_space, SetBasis};
use crate::weights::{characteristic, Weight};

/// Exponents of a two-level problem: the first level as in the one-level case,
/// the second starting from its targets and shifted by `outer_gamma_recip`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedParams {
    pub inner: MultiParams,
    pub outer_gamma_recip: Vec<f64>,
}

impl MixedParams {
    pub fn outer(&self) -> Result<MultiParams> {
        self.inner.next_level(self.outer_gamma_recip.clone())
    }
}

fn ones(n: usize) -> Vec<f64> {
    vec![1.0; n]
}

/// `x2 ↦ ‖g(·, x2) w(·)‖_{L^p(Ω_1)}`.
fn lift(g: &[f64], w: &Weight, inner_masses: &[f64], n2: usize, p: Exponent) -> Vec<f64> {
    let weighted: Vec<f64> = g.iter().enumerate().map(|(i, g)| g * w.values()[i / n2]).collect();
    slice_norms(&weighted, inner_masses, n2, p)
}

struct LiftedMixed<'a> {
    op: &'a dyn Operator,
    inner_basis: &'a SetBasis,
    product: &'a SetBasis,
    inner: &'a MultiParams,
    w1: &'a [Weight],
    v1: &'a [Weight],
    beta_inner: f64,
    options: &'a HarnessOptions,
    inner_duals: usize,
    trial: usize,
}

impl LiftedMixed<'_> {
    fn n2(&self) -> usize {
        self.product.n_points() / self.inner_basis.n_points()
    }
}

impl Operator for LiftedMixed<'_> {
    fn name(&self) -> String {
        format!("lifted {}", self.op.name())
    }

    fn arity(&self) -> usize {
        self.op.arity()
    }

    fn apply(&self, inputs: &[Vec<f64>]) -> Vec<f64> {
        let w1 = Weight::product(self.w1).expect("arity is positive");
        let q1 = self.inner.q1().expect("validated");
        lift(&self.op.apply(inputs), &w1, self.inner_basis.masses(), self.n2(), q1)
    }

    fn source(&self, j: usize, input: &[f64]) -> Vec<f64> {
        let p1 = self.inner.p1(j).expect("validated");
        lift(&self.op.source(j, input), &self.v1[j], self.inner_basis.masses(), self.n2(), p1)
    }

    /// `κ^{β_1} φ` with `φ` taken on the tensor ratio classes.
    fn phi(&self, chars: &[f64], ctx: &PhiContext) -> Option<f64> {
        let ratios: Vec<Weight> = (0..self.arity()).map(|j| self.w1[j].div(&self.v1[j]).tensor(&ctx.ratios[j])).collect();
        let inner_ctx = PhiContext {
            basis: self.product,
            params: self.inner,
            ratios: &ratios,
        };
        Some(self.options.kappa.powf(self.beta_inner) * self.op.phi(chars, &inner_ctx)?)
    }

    fn phi_is_constant(&self) -> bool {
        true
    }

    fn input_len(&self, _n_points: usize) -> usize {
        self.product.n_points()
    }

    fn trial_inputs(&self, trial: usize) -> Option<Vec<Vec<f64>>> {
        self.op.trial_inputs(trial)
    }

    fn base_checks(&self, ctx: &BaseContext) -> Result<Vec<Check>> {
        let m = self.arity();
        let outer_masses = ctx.basis.masses();
        let big_w: Vec<Weight> = (0..m).map(|j| self.w1[j].tensor(&ctx.w0[j])).collect();
        let big_v: Vec<Weight> = (0..m).map(|j| self.v1[j].tensor(&ctx.v0[j])).collect();
        let mu = Weight::product(ctx.w0).expect("arity is positive");
        let big_w_all = Weight::product(&big_w).expect("arity is positive");
        let q1 = self.inner.q1()?;
        let mut checks = Vec::new();

        let tf = self.op.apply(ctx.inputs);
        let direct = weighted_norm(&tf, big_w_all.values(), self.product.masses(), q1);
        let lifted = weighted_norm(ctx.output, mu.values(), outer_masses, q1);
        checks.push(Check::close("lifted output norm matches tensor weight norm", lifted / direct.max(f64::MIN_POSITIVE), 1.0, 1e-9));
        for j in 0..m {
            let p1 = self.inner.p1(j)?;
            let sj = self.op.source(j, &ctx.inputs[j]);
            let direct = weighted_norm(&sj, big_v[j].values(), self.product.masses(), p1);
            let lifted = weighted_norm(&self.source(j, &ctx.inputs[j]), ctx.v0[j].values(), outer_masses, p1);
            checks.push(Check::close("lifted source norm matches tensor weight norm", lifted / direct.max(f64::MIN_POSITIVE), 1.0, 1e-9));

            let (s, r) = (self.inner.s1(j)?, self.inner.r1(j)?);
            let tensor = characteristic(&big_w[j], &big_v[j], s, r, self.product).value;
            let split = characteristic(&self.w1[j], &self.v1[j], s, r, self.inner_basis).value * characteristic(&ctx.w0[j], &ctx.v0[j], s, r, ctx.basis).value;
            checks.push(Check::le("tensor characteristic is submultiplicative", tensor, split, 1e-9));
        }

        let budget = trial_budget(self.options, self.trial);
        let opnorms = measure_opnorms(self.product, self.inner, &big_w, &big_v, &budget)?;
        let rec = run_trial(
            self.op,
            &TrialSetup {
                basis: self.product,
                params: self.inner,
                w1: &big_w,
                v1: &big_v,
                inputs: ctx.inputs,
                opnorms: &opnorms,
                options: self.options,
                dual_samples: self.inner_duals,
                index: self.trial,
            },
        )?;
        checks.extend(rec.chain_checks.into_iter().map(|c| Check {
            name: format!("inner level: {}", c.name),
            ..c
        }));
        match rec.target_rhs {
            Some(rhs) => checks.push(Check::le("inner level target", rec.target_lhs, rhs, self.options.tolerance)),
            None => checks.push(Check::flag("inner level constant defined", false)),
        }
        Ok(checks)
    }
}

/// Two-level replay on `Ω_1 × Ω_2`; needs an operator whose base constant does
/// not depend on the characteristics.
pub fn check_mixed(op: &dyn Operator, inner_basis: &SetBasis, outer_basis: &SetBasis, params: &MixedParams, options: &HarnessOptions, inner_duals: usize) -> Result<BoundReport> {
    if !op.phi_is_constant() {
        return Err(ExtrapolateError::Unsupported(format!(
            "two-level runs need a base constant independent of the characteristics; {} has an envelope",
            op.name()
        )));
    }
    let inner = &params.inner;
    inner.validate()?;
    let outer = params.outer()?;
    if op.arity() != inner.arity() || outer.arity() != inner.arity() {
        return Err(ExtrapolateError::Arity { operator: op.arity(), params: inner.arity() });
    }
    let product = product_space(inner_basis, outer_basis)?;
    let (n1, n2) = (inner_basis.n_points(), outer_basis.n_points());
    let m = inner.arity();
    let beta_inner = inner.beta()?;
    let (q1, q2) = (inner.q1()?, outer.q1()?);

    let trials = (0..options.trials)
        .map(|i| {
            let (w1, v1) = sample_weights(options, "weights", n1, m, i);
            let (w2, v2) = sample_weights(options, "outer-weights", n2, m, i);
            let inputs = sample_inputs(op, options, n1 * n2, i);
            let lifted = LiftedMixed {
                op,
                inner_basis,
                product: &product,
                inner,
                w1: &w1,
                v1: &v1,
                beta_inner,
                options,
                inner_duals,
                trial: i,
            };
            let opnorms = measure_opnorms(outer_basis, &outer, &w2, &v2, &trial_budget(options, i))?;
            let mut rec = run_trial(
                &lifted,
                &TrialSetup {
                    basis: outer_basis,
                    params: &outer,
                    w1: &w2,
                    v1: &v2,
                    inputs: &inputs,
                    opnorms: &opnorms,
                    options,
                    dual_samples: options.dual_samples,
                    index: i,
                },
            )?;
            let tensor = Weight::product(&w1).expect("m > 0").tensor(&Weight::product(&w2).expect("m > 0"));
            let tf: Vec<f64> = op.apply(&inputs).iter().zip(tensor.values()).map(|(t, w)| t * w).collect();
            let mixed = mixed_norm(&tf, inner_basis.masses(), outer_basis.masses(), q1, q2);
            rec.chain_checks.push(Check::close("lifted target is the mixed norm", rec.target_lhs / mixed.max(f64::MIN_POSITIVE), 1.0, 1e-9));
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = BoundReport::from_trials(op.name(), "mixed", vec![inner.clone(), outer], options.kappa, trials);
    report.notes.push(format!("overall constant exponent beta = {} + {}", beta_inner, report.levels[1].beta()?));
    Ok(report)
}

/// `f ↦ λ 1_{|Tf| > λ}`.
struct LevelOperator<'a> {
    op: &'a dyn Operator,
    lambda: f64,
}

impl Operator for LevelOperator<'_> {
    fn name(&self) -> String {
        format!("level set of {}", self.op.name())
    }

    fn arity(&self) -> usize {
        self.op.arity()
    }

    fn apply(&self, inputs: &[Vec<f64>]) -> Vec<f64> {
        self.op.apply(inputs).iter().map(|t| if t.abs() > self.lambda { self.lambda } else { 0.0 }).collect()
    }

    fn source(&self, j: usize, input: &[f64]) -> Vec<f64> {
        self.op.source(j, input)
    }

    fn phi(&self, chars: &[f64], ctx: &PhiContext) -> Option<f64> {
        self.op.phi(chars, ctx)
    }

    fn phi_is_constant(&self) -> bool {
        self.op.phi_is_constant()
    }

    fn input_len(&self, n_points: usize) -> usize {
        self.op.input_len(n_points)
    }

    fn trial_inputs(&self, trial: usize) -> Option<Vec<Vec<f64>>> {
        self.op.trial_inputs(trial)
    }

    fn base_checks(&self, ctx: &BaseContext) -> Result<Vec<Check>> {
        let masses = ctx.basis.masses();
        let q0 = ctx.params.q0;
        let w0 = Weight::product(ctx.w0).expect("arity is positive");
        let tf = self.op.apply(ctx.inputs);
        let level = weighted_norm(ctx.output, w0.values(), masses, q0);
        let weak = weak_norm_weighted_sets(&tf, w0.values(), masses, q0);
        let strong = weighted_norm(&tf, w0.values(), masses, q0);
        Ok(vec![
            Check::le("level function below weak norm", level, weak, EXACT_TOL),
            Check::le("weak norm below strong norm at base weights", weak, strong, EXACT_TOL),
        ])
    }
}

/// Levels for the weak-type replay: a log grid over the positive values of `|g|`
/// plus the level where `sup_λ λ ‖1_{|g| > λ} w‖` is attained.
fn weak_levels(g: &[f64], w: &Weight, masses: &[f64], p: Exponent, count: usize) -> Vec<f64> {
    let pos: Vec<f64> = g.iter().map(|x| x.abs()).filter(|x| *x > 0.0).collect();
    if pos.is_empty() {
        return Vec::new();
    }
    let lo = pos.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = pos.iter().copied().fold(0.0f64, f64::max);
    let below = 1.0 - 1e-12;
    let mut levels: Vec<f64> = (0..count)
        .map(|k| {
            let t = if count > 1 { k as f64 / (count - 1) as f64 } else { 0.0 };
            lo * (hi / lo).powf(t) * below
        })
        .collect();
    let mut best = (0.0, lo);
    for &a in &pos {
        let ind: Vec<f64> = g.iter().map(|x| if x.abs() >= a { 1.0 } else { 0.0 }).collect();
        let v = a * weighted_norm(&ind, w.values(), masses, p);
        if v > best.0 {
            best = (v, a);
        }
    }
    levels.push(best.1 * below);
    levels
}

/// Weak-type replay: every level operator `T_λ` goes through the full chain, and
/// the target is `sup_λ λ ‖1_{|Tf| > λ}‖_{L^{q1}_{w1}} ≤ κ^β φ(C) Π ‖S_j f_j‖`.
pub fn check_weak_type(op: &dyn Operator, basis: &SetBasis, params: &MultiParams, options: &HarnessOptions, levels: usize) -> Result<BoundReport> {
    params.validate()?;
    if op.arity() != params.arity() {
        return Err(ExtrapolateError::Arity { operator: op.arity(), params: params.arity() });
    }
    let n = basis.n_points();
    let masses = basis.masses();
    let q1 = params.q1()?;
    let trials = (0..options.trials)
        .map(|i| {
            let (w1, v1) = sample_weights(options, "weights", n, params.arity(), i);
            let inputs = sample_inputs(op, options, n, i);
            let opnorms = measure_opnorms(basis, params, &w1, &v1, &trial_budget(options, i))?;
            let w = Weight::product(&w1).expect("arity is positive");
            let tf = op.apply(&inputs);
            let mut records = Vec::new();
            for lambda in weak_levels(&tf, &w, masses, q1, levels) {
                let level_op = LevelOperator { op, lambda };
                records.push(run_trial(
                    &level_op,
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
                )?);
            }
            let weak = weak_norm_weighted_sets(&tf, w.values(), masses, q1);
            let weak_inside = weak_norm(&tf, w.values(), masses, q1);
            let strong = weighted_norm(&tf, w.values(), masses, q1);
            Ok(merge_levels(i, records, weak, weak_inside, strong, options.tolerance))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::from_trials(op.name(), "weak", vec![params.clone()], options.kappa, trials))
}

fn merge_levels(index: usize, records: Vec<TrialRecord>, weak: f64, weak_inside: f64, strong: f64, tol: f64) -> TrialRecord {
    let mut log = CheckLog::default();
    let grid = records.iter().map(|r| r.target_lhs).fold(0.0f64, f64::max);
    log.push(Check::close("level grid attains the weak norm", grid / weak.max(f64::MIN_POSITIVE), if weak > 0.0 { 1.0 } else { 0.0 }, 1e-9));
    log.push(Check::le("weak norm below strong norm", weak, strong, EXACT_TOL));
    log.push(Check::le("weak norm of the weighted function below strong norm", weak_inside, strong, EXACT_TOL));
    let mut rhs: Option<f64> = None;
    let mut undefined = false;
    for r in &records {
        log.extend(r.chain_checks.iter().cloned());
        log.push(Check::flag("level target holds", r.target_ok || r.target_lhs == 0.0));
        match r.target_rhs {
            Some(b) => rhs = Some(rhs.map_or(b, |x: f64| x.max(b))),
            None => undefined = true,
        }
    }
    let first = records.into_iter().next();
    let target_ok = !undefined && rhs.map_or(weak == 0.0, |b| Check::le("", weak, b, tol).passed);
    let chain_ok = log.all_pass();
    let verdict = if undefined {
        TrialVerdict::EnvelopeUndefined
    } else if target_ok && chain_ok {
        TrialVerdict::Pass
    } else {
        TrialVerdict::Fail
    };
    let mut rec = first.unwrap_or_else(|| empty_record(index));
    rec.verdict = verdict;
    rec.target_lhs = weak;
    rec.target_rhs = rhs;
    rec.target_ok = target_ok;
    rec.chain_ok = chain_ok;
    rec.chain_checks = log.into_vec();
    rec
}

fn empty_record(index: usize) -> TrialRecord {
    TrialRecord {
        index,
        verdict: TrialVerdict::Pass,
        base_ratio: 0.0,
        base_char: Vec::new(),
        target_ratio: 0.0,
        target_char: Vec::new(),
        constants: crate::exponents::ConstantsReport {
            kappa: 0.0,
            kappa_dual: 0.0,
            beta: 0.0,
            c_kappa: Vec::new(),
            b: None,
        },
        c_used: Vec::new(),
        phi_target: None,
        target_lhs: 0.0,
        target_rhs: None,
        target_ok: true,
        chain_ok: true,
        dual_functions: 0,
        opnorms: Vec::new(),
        chain_checks: Vec::new(),
    }
}

/// Exponents of the vector-valued extension: `1/u = min(1/q0, 1/p0)` with
/// `1/p0 = Σ 1/p0j`, and `1/u_j = (1/u)(1/p0j)/(1/p0)`.
pub fn sequence_exponents(params: &MultiParams) -> Result<(Exponent, Vec<Exponent>)> {
    let p_recip: f64 = params.p0.iter().map(|p| p.recip()).sum();
    let u = params.q0.recip().min(p_recip);
    let uj = params
        .p0
        .iter()
        .map(|p| Exponent::from_recip(if p_recip > 0.0 { u * p.recip() / p_recip } else { 0.0 }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((Exponent::from_recip(u)?, uj))
}

struct SequenceOperator<'a> {
    op: &'a dyn Operator,
    k: usize,
    n: usize,
    u: Exponent,
    uj: Vec<Exponent>,
}

impl SequenceOperator<'_> {
    fn slices<'b>(&self, input: &'b [f64]) -> impl Iterator<Item = &'b [f64]> {
        input.chunks(self.n)
    }

    /// Pointwise `ℓ^p` norm over the sequence index.
    fn pointwise(&self, rows: &[Vec<f64>], p: Exponent) -> Vec<f64> {
        let ones = ones(rows.len());
        (0..self.n)
            .map(|x| {
                let col: Vec<f64> = rows.iter().map(|r| r[x]).collect();
                lp_norm(&col, &ones, p)
            })
            .collect()
    }

    fn outputs(&self, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|kk| {
                let fk: Vec<Vec<f64>> = inputs.iter().map(|f| f[kk * self.n..(kk + 1) * self.n].to_vec()).collect();
                self.op.apply(&fk)
            })
            .collect()
    }

    fn sources(&self, j: usize, input: &[f64]) -> Vec<Vec<f64>> {
        self.slices(input).map(|f| self.op.source(j, f)).collect()
    }
}

impl Operator for SequenceOperator<'_> {
    fn name(&self) -> String {
        format!("sequence of {} x{}", self.op.name(), self.k)
    }

    fn arity(&self) -> usize {
        self.op.arity()
    }

    fn apply(&self, inputs: &[Vec<f64>]) -> Vec<f64> {
        self.pointwise(&self.outputs(inputs), self.u)
    }

    fn source(&self, j: usize, input: &[f64]) -> Vec<f64> {
        self.pointwise(&self.sources(j, input), self.uj[j])
    }

    fn phi(&self, chars: &[f64], ctx: &PhiContext) -> Option<f64> {
        self.op.phi(chars, ctx)
    }

    fn phi_is_constant(&self) -> bool {
        self.op.phi_is_constant()
    }

    fn input_len(&self, n_points: usize) -> usize {
        self.k * n_points
    }

    fn base_checks(&self, ctx: &BaseContext) -> Result<Vec<Check>> {
        let masses = ctx.basis.masses();
        let params = ctx.params;
        let m = self.arity();
        let w0 = Weight::product(ctx.w0).expect("arity is positive");
        let ones = ones(self.k);
        let a: Vec<f64> = self.outputs(ctx.inputs).iter().map(|o| weighted_norm(o, w0.values(), masses, params.q0)).collect();
        let b: Vec<Vec<f64>> = (0..m)
            .map(|j| self.sources(j, &ctx.inputs[j]).iter().map(|s| weighted_norm(s, ctx.v0[j].values(), masses, params.p0[j])).collect())
            .collect();
        let mut checks = Vec::new();
        let lifted = weighted_norm(ctx.output, w0.values(), masses, params.q0);
        let seq = lp_norm(&a, &ones, self.u);
        checks.push(Check::le("norm of sequence norm below sequence of norms", lifted, seq, EXACT_TOL));

        let ratios: Vec<Weight> = (0..m).map(|j| ctx.w0[j].div(&ctx.v0[j])).collect();
        let phi_ctx = PhiContext {
            basis: ctx.basis,
            params,
            ratios: &ratios,
        };
        let prods: Vec<f64> = (0..self.k).map(|kk| (0..m).map(|j| b[j][kk]).product()).collect();
        if let Some(phi) = self.op.phi(ctx.chars, &phi_ctx) {
            for kk in 0..self.k {
                checks.push(Check::le("base bound for each sequence entry", a[kk], phi * prods[kk], 1e-6));
            }
        }
        let split: f64 = (0..m).map(|j| lp_norm(&b[j], &ones, self.uj[j])).product();
        checks.push(Check::le("Hölder over the sequence index", lp_norm(&prods, &ones, self.u), split, EXACT_TOL));
        for (j, bj) in b.iter().enumerate() {
            let lifted = weighted_norm(&self.source(j, &ctx.inputs[j]), ctx.v0[j].values(), masses, params.p0[j]);
            checks.push(Check::le("sequence of source norms below norm of sequence norm", lp_norm(bj, &ones, self.uj[j]), lifted, EXACT_TOL));
        }
        Ok(checks)
    }
}

/// Vector-valued replay with `k` inputs per slot.
pub fn check_vector_valued(op: &dyn Operator, basis: &SetBasis, params: &MultiParams, k: usize, options: &HarnessOptions) -> Result<BoundReport> {
    if k == 0 {
        return Err(ExtrapolateError::Params("need at least one sequence entry".into()));
    }
    if op.trial_inputs(0).is_some() {
        return Err(ExtrapolateError::Unsupported("sequence runs sample their own inputs".into()));
    }
    let (u, uj) = sequence_exponents(params)?;
    let seq = SequenceOperator {
        op,
        k,
        n: basis.n_points(),
        u,
        uj,
    };
    let mut report = super::check_multilinear(&seq, basis, params, options)?;
    report.variant = "vector".into();
    report.operator = op.name();
    report.notes.push(format!("sequence length {k}, outer exponent {u}"));
    Ok(report)
}

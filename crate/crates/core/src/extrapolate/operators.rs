//! Operators the harness can replay, and how their base constants are known.
//!
//! Products (and the identity) have an exact base constant for every weight pair.
//! Everything else gets an empirical envelope: a step function of the largest
//! characteristic, calibrated on weights of growing spread, undefined outside
//! the sampled range.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExtrapolateError, MultiParams, Result};
use crate::maximal::{maximal, maximal_bound, AscentBudget};
use crate::norms::weighted_norm;
use crate::rdf::Check;
use crate::rng;
use crate::space::SetBasis;
use crate::transfer::{multiplier_apply, two_weight_l2_norm, FiniteAbelianGroup, Multiplier};
use crate::weights::sampling::{self, WeightSampler};
use crate::weights::{characteristic, Weight};

/// What `φ` sees besides the characteristics: the exponents and the ratios
/// `w_j/v_j` of the weight classes.
pub struct PhiContext<'a> {
    pub basis: &'a SetBasis,
    pub params: &'a MultiParams,
    pub ratios: &'a [Weight],
}

/// The rebuilt base weights of one dual function.
pub struct BaseContext<'a> {
    pub basis: &'a SetBasis,
    pub params: &'a MultiParams,
    pub w0: &'a [Weight],
    pub v0: &'a [Weight],
    /// `[w_0j, v_0j]_(s0j, r0j)`.
    pub chars: &'a [f64],
    pub inputs: &'a [Vec<f64>],
    pub output: &'a [f64],
}

/// `T(f_1, ..., f_m)` with per-input source maps `S_j` and a base constant `φ`.
pub trait Operator: Send + Sync {
    fn name(&self) -> String;

    fn arity(&self) -> usize;

    fn apply(&self, inputs: &[Vec<f64>]) -> Vec<f64>;

    /// `S_j f_j`; the identity unless overridden.
    fn source(&self, _j: usize, input: &[f64]) -> Vec<f64> {
        input.to_vec()
    }

    /// `φ` at the given characteristics, `None` where it is unknown.
    fn phi(&self, chars: &[f64], ctx: &PhiContext) -> Option<f64>;

    /// True when `φ` ignores the characteristics.
    fn phi_is_constant(&self) -> bool {
        false
    }

    /// Extra links checked at every set of rebuilt base weights.
    fn base_checks(&self, _ctx: &BaseContext) -> Result<Vec<Check>> {
        Ok(Vec::new())
    }

    /// Length of each input for a space with `n_points` points.
    fn input_len(&self, n_points: usize) -> usize {
        n_points
    }

    /// Inputs fixed by the operator, for families given as pairs.
    fn trial_inputs(&self, _trial: usize) -> Option<Vec<Vec<f64>>> {
        None
    }

    /// A lower bound for the base ratio at `(w0, v0)` beyond sampled inputs.
    fn calibration_ratio(&self, _basis: &SetBasis, _params: &MultiParams, _w0: &[Weight], _v0: &[Weight]) -> Option<f64> {
        None
    }
}

/// Best constant for `‖g‖_q ≤ E ‖g‖_p` on point masses `masses`.
pub fn embedding_constant(masses: &[f64], q_recip: f64, p_recip: f64) -> f64 {
    let d = q_recip - p_recip;
    if d >= 0.0 {
        masses.iter().sum::<f64>().powf(d)
    } else {
        masses.iter().fold(f64::INFINITY, |a, b| a.min(*b)).powf(d)
    }
}

/// `T(f) = Π f_j`; the identity when `m = 1`.
///
/// With `w = Π w_j`, Hölder gives `‖Π f_j‖_{q0,w} ≤ E(p0 → q0) max Π (w_j/v_j)
/// Π ‖f_j‖_{p0j,v_j}` with `1/p0 = Σ 1/p0j`, for any weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductOperator {
    arity: usize,
}

impl ProductOperator {
    pub fn new(arity: usize) -> Result<Self> {
        if arity == 0 {
            return Err(ExtrapolateError::Params("a product needs at least one factor".into()));
        }
        Ok(Self { arity })
    }

    pub fn identity() -> Self {
        Self { arity: 1 }
    }
}

impl Operator for ProductOperator {
    fn name(&self) -> String {
        if self.arity == 1 {
            "identity".into()
        } else {
            format!("product-{}", self.arity)
        }
    }

    fn arity(&self) -> usize {
        self.arity
    }

    fn apply(&self, inputs: &[Vec<f64>]) -> Vec<f64> {
        let n = inputs[0].len();
        (0..n).map(|x| inputs.iter().map(|f| f[x]).product()).collect()
    }

    fn phi(&self, _chars: &[f64], ctx: &PhiContext) -> Option<f64> {
        let p_recip: f64 = ctx.params.p0.iter().map(|p| p.recip()).sum();
        let e = embedding_constant(ctx.basis.masses(), ctx.params.q0.recip(), p_recip);
        let n = ctx.basis.n_points();
        let top = (0..n).map(|x| ctx.ratios.iter().map(|r| r.values()[x]).product::<f64>()).fold(0.0f64, f64::max);
        Some(e * top)
    }

    fn phi_is_constant(&self) -> bool {
        true
    }
}

/// Sampled `(max_j [w_j, v_j], ratio)` pairs, turned into a nondecreasing step function.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    points: Vec<(f64, f64)>,
}

impl Envelope {
    pub fn from_points(mut points: Vec<(f64, f64)>) -> Self {
        points.retain(|(c, r)| c.is_finite() && r.is_finite());
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut top = 0.0f64;
        for p in points.iter_mut() {
            top = top.max(p.1);
            p.1 = top;
        }
        Self { points }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        Some((self.points.first()?.0, self.points.last()?.0))
    }

    /// The largest sampled ratio at characteristic `≤ c`; `None` outside the range.
    pub fn eval(&self, c: f64) -> Option<f64> {
        let (lo, hi) = self.range()?;
        if !(c >= lo && c <= hi) {
            return None;
        }
        let k = self.points.partition_point(|p| p.0 <= c);
        Some(self.points[k - 1].1)
    }

    pub fn eval_max(&self, chars: &[f64]) -> Option<f64> {
        self.eval(chars.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }
}

/// How to sample weights for an envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Calibration {
    pub count: usize,
    /// Sampled inputs per weight pair.
    pub functions: usize,
    /// Weights are raised to powers up to this, spreading the characteristics.
    pub max_power: f64,
    pub seed: u64,
    pub sampler: WeightSampler,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            count: 48,
            functions: 6,
            max_power: 4.0,
            seed: 7,
            sampler: WeightSampler::LogUniform,
        }
    }
}

/// Samples the base ratio of `op` at weights of increasing spread.
pub fn calibrate_envelope(op: &dyn Operator, basis: &SetBasis, params: &MultiParams, cal: &Calibration) -> Result<Envelope> {
    let n = basis.n_points();
    let m = op.arity();
    if m != params.arity() {
        return Err(ExtrapolateError::Arity { operator: m, params: params.arity() });
    }
    let masses = basis.masses();
    let points = (0..cal.count)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(cal.seed, rng::tag("calibration"), i as u64);
            let a = cal.max_power * (i + 1) as f64 / cal.count.max(1) as f64;
            let w0: Vec<Weight> = (0..m).map(|_| cal.sampler.sample(n, &mut r).powf(a)).collect();
            let v0: Vec<Weight> = (0..m).map(|_| cal.sampler.sample(n, &mut r).powf(a)).collect();
            let key = (0..m)
                .map(|j| characteristic(&w0[j], &v0[j], params.s0[j], params.r0[j], basis).value)
                .fold(f64::NEG_INFINITY, f64::max);
            let w = Weight::product(&w0).expect("arity is positive");
            let mut ratio = 0.0f64;
            for k in 0..cal.functions {
                let inputs = op.trial_inputs(i * cal.functions + k).unwrap_or_else(|| {
                    (0..m).map(|_| sampling::function(op.input_len(n), &mut r, 0.0)).collect()
                });
                let out = op.apply(&inputs);
                let lhs = weighted_norm(&out, w.values(), masses, params.q0);
                let rhs: f64 = (0..m).map(|j| weighted_norm(&op.source(j, &inputs[j]), v0[j].values(), masses, params.p0[j])).product();
                if rhs > 0.0 {
                    ratio = ratio.max(lhs / rhs);
                }
            }
            if let Some(extra) = op.calibration_ratio(basis, params, &w0, &v0) {
                ratio = ratio.max(extra);
            }
            (key, ratio)
        })
        .collect();
    Ok(Envelope::from_points(points))
}

/// The basis maximal operator, `φ` from an envelope.
#[derive(Debug, Clone)]
pub struct MaximalOperator {
    basis: SetBasis,
    pub envelope: Envelope,
    pub budget: AscentBudget,
}

impl MaximalOperator {
    pub fn new(basis: SetBasis) -> Self {
        Self {
            basis,
            envelope: Envelope::default(),
            budget: AscentBudget {
                restarts: 8,
                iterations: 200,
                seed: 0,
            },
        }
    }
}

impl Operator for MaximalOperator {
    fn name(&self) -> String {
        "maximal".into()
    }

    fn arity(&self) -> usize {
        1
    }

    fn apply(&self, inputs: &[Vec<f64>]) -> Vec<f64> {
        maximal(&inputs[0], &self.basis)
    }

    fn phi(&self, chars: &[f64], _ctx: &PhiContext) -> Option<f64> {
        self.envelope.eval_max(chars)
    }

    fn calibration_ratio(&self, basis: &SetBasis, params: &MultiParams, w0: &[Weight], v0: &[Weight]) -> Option<f64> {
        let p = params.p0[0];
        if !params.q0.approx_eq(p) || p.recip() > 1.0 {
            return None;
        }
        maximal_bound(basis, &w0[0], &v0[0], p, &self.budget).ok().map(|e| e.value)
    }
}

/// `f ↦ |T_m f|` on a cyclic group with `m` given on the dual group.
#[derive(Debug, Clone)]
pub struct MultiplierOperator {
    group: FiniteAbelianGroup,
    multiplier: Multiplier,
    pub envelope: Envelope,
}

impl MultiplierOperator {
    pub fn new(n: usize, multiplier: Multiplier) -> Result<Self> {
        let group = FiniteAbelianGroup::cyclic(n)?;
        if multiplier.len() != n {
            return Err(ExtrapolateError::Params(format!("multiplier has {} values for a group of order {n}", multiplier.len())));
        }
        Ok(Self {
            group,
            multiplier,
            envelope: Envelope::default(),
        })
    }

    /// `m(k) = 1/(1 + d(k, 0))` with `d` the cyclic distance.
    pub fn smooth(n: usize) -> Result<Self> {
        let values: Vec<f64> = (0..n).map(|k| 1.0 / (1.0 + k.min(n - k) as f64)).collect();
        Self::new(n, Multiplier::real(&values)?)
    }
}

impl Operator for MultiplierOperator {
    fn name(&self) -> String {
        "multiplier".into()
    }

    fn arity(&self) -> usize {
        1
    }

    fn apply(&self, inputs: &[Vec<f64>]) -> Vec<f64> {
        let f: Vec<Complex64> = inputs[0].iter().map(|x| Complex64::new(*x, 0.0)).collect();
        multiplier_apply(&self.group, &self.multiplier, &f)
            .expect("lengths checked at construction")
            .iter()
            .map(|z| z.norm())
            .collect()
    }

    fn phi(&self, chars: &[f64], _ctx: &PhiContext) -> Option<f64> {
        self.envelope.eval_max(chars)
    }

    fn calibration_ratio(&self, _basis: &SetBasis, params: &MultiParams, w0: &[Weight], v0: &[Weight]) -> Option<f64> {
        let two = |e: crate::exponents::Exponent| (e.recip() - 0.5).abs() < 1e-12;
        if !(two(params.q0) && two(params.p0[0])) {
            return None;
        }
        two_weight_l2_norm(&self.group, &self.multiplier, &w0[0], &v0[0]).ok()
    }
}

/// One member `(f_1, ..., f_m; g)` of a family with `‖g‖ ≤ φ Π ‖f_j‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pair {
    pub f: Vec<Vec<f64>>,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairFamily {
    pub label: String,
    pub pairs: Vec<Pair>,
}

impl PairFamily {
    /// `(f, Mf)` for random nonnegative `f`.
    pub fn maximal(basis: &SetBasis, count: usize, seed: u64) -> Self {
        let n = basis.n_points();
        let pairs = (0..count)
            .map(|i| {
                let mut r = rng::stream(seed, rng::tag("pairs"), i as u64);
                let f = sampling::function(n, &mut r, 0.1);
                let g = maximal(&f, basis);
                Pair { f: vec![f], g }
            })
            .collect();
        Self {
            label: "maximal-pairs".into(),
            pairs,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let m = self.pairs.first().map(|p| p.f.len()).ok_or_else(|| ExtrapolateError::Params("empty pair family".into()))?;
        for (k, p) in self.pairs.iter().enumerate() {
            if m == 0 || p.f.len() != m || p.g.len() != n || p.f.iter().any(|f| f.len() != n) {
                return Err(ExtrapolateError::Params(format!("pair {k} has the wrong shape")));
            }
            if p.f.iter().flatten().chain(&p.g).any(|x| !x.is_finite()) {
                return Err(ExtrapolateError::Params(format!("pair {k} has non-finite values")));
            }
        }
        Ok(())
    }
}

/// A family of pairs read as an operator on its own inputs.
#[derive(Debug, Clone)]
pub struct PairOperator {
    family: PairFamily,
    pub envelope: Envelope,
}

impl PairOperator {
    pub fn new(family: PairFamily, n: usize) -> Result<Self> {
        family.validate(n)?;
        Ok(Self {
            family,
            envelope: Envelope::default(),
        })
    }
}

impl Operator for PairOperator {
    fn name(&self) -> String {
        format!("pairs:{}", self.family.label)
    }

    fn arity(&self) -> usize {
        self.family.pairs[0].f.len()
    }

    /// The `g` of the pair whose inputs match exactly, zero if none does.
    fn apply(&self, inputs: &[Vec<f64>]) -> Vec<f64> {
        self.family
            .pairs
            .iter()
            .find(|p| p.f == inputs)
            .map(|p| p.g.clone())
            .unwrap_or_else(|| vec![0.0; inputs[0].len()])
    }

    fn phi(&self, chars: &[f64], _ctx: &PhiContext) -> Option<f64> {
        self.envelope.eval_max(chars)
    }

    fn trial_inputs(&self, trial: usize) -> Option<Vec<Vec<f64>>> {
        Some(self.family.pairs[trial % self.family.pairs.len()].f.clone())
    }
}

/// Operators that can be named in a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OperatorSpec {
    Identity,
    Product {
        arity: usize,
    },
    Maximal {
        #[serde(default)]
        calibration: Calibration,
    },
    /// A real multiplier on `Z_n`; the smooth default when `values` is absent.
    Multiplier {
        #[serde(default)]
        values: Option<Vec<f64>>,
        #[serde(default)]
        calibration: Calibration,
    },
    MaximalPairs {
        count: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        calibration: Calibration,
    },
    Pairs {
        family: PairFamily,
        #[serde(default)]
        calibration: Calibration,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CatalogEntry {
    pub kind: &'static str,
    pub arity: &'static str,
    pub base_constant: &'static str,
}

pub fn builtin_operators() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            kind: "identity",
            arity: "1",
            base_constant: "exact",
        },
        CatalogEntry {
            kind: "product",
            arity: "m",
            base_constant: "exact",
        },
        CatalogEntry {
            kind: "maximal",
            arity: "1",
            base_constant: "envelope",
        },
        CatalogEntry {
            kind: "multiplier",
            arity: "1",
            base_constant: "envelope",
        },
        CatalogEntry {
            kind: "maximal-pairs",
            arity: "1",
            base_constant: "envelope",
        },
        CatalogEntry {
            kind: "pairs",
            arity: "from data",
            base_constant: "envelope",
        },
    ]
}

/// Builds and, where needed, calibrates the operator described by `spec`.
pub fn build_operator(spec: &OperatorSpec, basis: &SetBasis, params: &MultiParams) -> Result<Box<dyn Operator>> {
    let n = basis.n_points();
    Ok(match spec {
        OperatorSpec::Identity => Box::new(ProductOperator::identity()),
        OperatorSpec::Product { arity } => Box::new(ProductOperator::new(*arity)?),
        OperatorSpec::Maximal { calibration } => {
            let mut op = MaximalOperator::new(basis.clone());
            op.envelope = calibrate_envelope(&op, basis, params, calibration)?;
            Box::new(op)
        }
        OperatorSpec::Multiplier { values, calibration } => {
            let mut op = match values {
                Some(v) => MultiplierOperator::new(n, Multiplier::real(v)?)?,
                None => MultiplierOperator::smooth(n)?,
            };
            op.envelope = calibrate_envelope(&op, basis, params, calibration)?;
            Box::new(op)
        }
        OperatorSpec::MaximalPairs { count, seed, calibration } => {
            let mut op = PairOperator::new(PairFamily::maximal(basis, *count, *seed), n)?;
            op.envelope = calibrate_envelope(&op, basis, params, calibration)?;
            Box::new(op)
        }
        OperatorSpec::Pairs { family, calibration } => {
            let mut op = PairOperator::new(family.clone(), n)?;
            op.envelope = calibrate_envelope(&op, basis, params, calibration)?;
            Box::new(op)
        }
    })
}

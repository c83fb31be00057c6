//! The basis maximal operator `Mf(x) = max_{U ∋ x} μ(U)^{-1} ∫_U |f|` and its
//! weighted operator norms.
//!
//! `opnorm_maximal(basis, w, v, p, ..)` estimates `‖M‖` from `L^p_v` to `L^p_w`,
//! i.e. the best constant in `‖(Mf) w‖_p ≤ C ‖f v‖_p`.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::Exponent;
use crate::norms::{lp_norm, weighted_norm};
use crate::rng;
use crate::space::SetBasis;
use crate::weights::{characteristic_p, Weight, WeightError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaximalError {
    #[error("maximal operator norms need p > 1 here, got p = {0}")]
    ExponentTooSmall(Exponent),
    #[error(transparent)]
    Weight(#[from] WeightError),
}

pub fn maximal(f: &[f64], basis: &SetBasis) -> Vec<f64> {
    maximal_with_active(f, basis).0
}

/// `Mf` together with, for every point, the index of a basis set attaining the max.
pub fn maximal_with_active(f: &[f64], basis: &SetBasis) -> (Vec<f64>, Vec<usize>) {
    let masses = basis.masses();
    let n = basis.n_points();
    let mut out = vec![f64::NEG_INFINITY; n];
    let mut active = vec![0usize; n];
    for (k, set) in basis.sets().iter().enumerate() {
        let avg = set.iter().map(|&i| masses[i] * f[i].abs()).sum::<f64>() / basis.measure(k);
        for &x in set {
            if avg > out[x] {
                out[x] = avg;
                active[x] = k;
            }
        }
    }
    // points outside every set see no averages
    for v in out.iter_mut() {
        if *v == f64::NEG_INFINITY {
            *v = 0.0;
        }
    }
    (out, active)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Exact,
    LowerBound,
}

/// An operator norm value with a function attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpNormEstimate<T = f64> {
    pub value: f64,
    pub kind: EstimateKind,
    pub witness: Vec<T>,
    pub method: String,
}

/// Multi-start projected ascent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AscentBudget {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for AscentBudget {
    fn default() -> Self {
        Self {
            restarts: 32,
            iterations: 500,
            seed: 0,
        }
    }
}

/// `‖(Mf) w‖_p / ‖f v‖_p`.
pub fn maximal_ratio(basis: &SetBasis, w: &Weight, v: &Weight, p: Exponent, f: &[f64]) -> f64 {
    let masses = basis.masses();
    let mf = maximal(f, basis);
    weighted_norm(&mf, w.values(), masses, p) / weighted_norm(f, v.values(), masses, p)
}

/// `‖M‖_{L^p_v → L^p_w}`: exact for `p = ∞`, a witnessed lower bound otherwise.
pub fn opnorm_maximal(basis: &SetBasis, w: &Weight, v: &Weight, p: Exponent, budget: &AscentBudget) -> Result<OpNormEstimate, MaximalError> {
    w.check_len(basis.n_points())?;
    v.check_len(basis.n_points())?;
    if p.recip() >= 1.0 {
        return Err(MaximalError::ExponentTooSmall(p));
    }
    if p.is_infinite() {
        // M is monotone, so f = v^{-1} is extremal among |f v| ≤ 1.
        let witness = v.recip().into_values();
        let mf = maximal(&witness, basis);
        let value = mf.iter().zip(w.values()).fold(0.0f64, |m, (a, b)| m.max(a * b));
        return Ok(OpNormEstimate {
            value,
            kind: EstimateKind::Exact,
            witness,
            method: "extremal function v^-1".into(),
        });
    }
    let runs: Vec<(f64, Vec<f64>)> = (0..budget.restarts.max(1))
        .into_par_iter()
        .map(|i| {
            let start = ascent_start(basis, v, p, budget.seed, i);
            ascent_run(basis, w, v, p, start, budget.iterations)
        })
        .collect();
    let (value, witness) = runs
        .into_iter()
        .fold((f64::NEG_INFINITY, Vec::new()), |best, run| if run.0 > best.0 { run } else { best });
    Ok(OpNormEstimate {
        value,
        kind: EstimateKind::LowerBound,
        witness,
        method: format!(
            "projected sub-gradient ascent, {} restarts x {} iterations",
            budget.restarts.max(1),
            budget.iterations
        ),
    })
}

/// `‖M‖_{L^1_v → L^1_w}`, exact: the ratio is convex on the simplex, so a point mass attains it.
pub fn opnorm_maximal_l1(basis: &SetBasis, w: &Weight, v: &Weight) -> OpNormEstimate {
    let masses = basis.masses();
    let n = basis.n_points();
    let mut best = (f64::NEG_INFINITY, 0usize);
    let mut delta = vec![0.0; n];
    for y in 0..n {
        delta[y] = 1.0;
        let r = weighted_norm(&maximal(&delta, basis), w.values(), masses, Exponent::ONE) / (masses[y] * v.values()[y]);
        if r > best.0 {
            best = (r, y);
        }
        delta[y] = 0.0;
    }
    let mut witness = vec![0.0; n];
    witness[best.1] = 1.0;
    OpNormEstimate {
        value: best.0,
        kind: EstimateKind::Exact,
        witness,
        method: "point-mass enumeration".into(),
    }
}

/// `‖M‖_{L^p_v → L^p_w}` for any `p ≥ 1`: exact at `p = 1` and `p = ∞`.
pub fn maximal_bound(basis: &SetBasis, w: &Weight, v: &Weight, p: Exponent, budget: &AscentBudget) -> Result<OpNormEstimate, MaximalError> {
    if (p.recip() - 1.0).abs() <= crate::exponents::RECIP_TOL {
        w.check_len(basis.n_points())?;
        v.check_len(basis.n_points())?;
        return Ok(opnorm_maximal_l1(basis, w, v));
    }
    opnorm_maximal(basis, w, v, p, budget)
}

/// `‖M‖_{L^p_w → L^p_w} / [w]_p^{p'}`; a lower bound for the best Buckley-type constant.
pub fn buckley_ratio(basis: &SetBasis, w: &Weight, p: Exponent, budget: &AscentBudget) -> Result<f64, MaximalError> {
    let norm = opnorm_maximal(basis, w, w, p, budget)?.value;
    let char_p = characteristic_p(w, p, basis)?.value;
    let p_dual = p.dual().map_err(WeightError::from)?;
    Ok(norm / char_p.powf(1.0 / p_dual.recip()))
}

fn ascent_start(basis: &SetBasis, v: &Weight, p: Exponent, seed: u64, i: usize) -> Vec<f64> {
    let n = basis.n_points();
    // v^{-p'} is the usual testing function for two-weight bounds
    let pd = 1.0 / (1.0 - p.recip());
    let base: Vec<f64> = v.values().iter().map(|x| x.powf(-pd)).collect();
    match i {
        0 => base,
        1 => vec![1.0; n],
        _ => {
            let mut r = rng::stream(seed, rng::tag("maximal-ascent"), i as u64);
            let localize = r.gen_bool(0.5) && !basis.is_empty();
            let set = if localize {
                Some(basis.set(r.gen_range(0..basis.len())).to_vec())
            } else {
                None
            };
            (0..n)
                .map(|x| {
                    let inside = set.as_ref().is_none_or(|s| s.binary_search(&x).is_ok());
                    if inside {
                        base[x] * r.gen_range(-2.0f64..2.0).exp()
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    }
}

fn ascent_run(basis: &SetBasis, w: &Weight, v: &Weight, p: Exponent, mut f: Vec<f64>, iterations: usize) -> (f64, Vec<f64>) {
    let masses = basis.masses();
    let n = f.len();
    let pe = 1.0 / p.recip();
    normalize(&mut f, v, masses, p);
    let mut best = (maximal_ratio(basis, w, v, p, &f), f.clone());
    let mut grad = vec![0.0; n];
    let mut per_set = vec![0.0; basis.len()];
    for k in 0..iterations {
        let (mf, active) = maximal_with_active(&f, basis);
        let num = weighted_norm(&mf, w.values(), masses, p);
        let den = weighted_norm(&f, v.values(), masses, p);
        if num == 0.0 || den == 0.0 {
            break;
        }
        per_set.iter_mut().for_each(|c| *c = 0.0);
        for x in 0..n {
            if mf[x] > 0.0 {
                let a = mf[x] * w.values()[x] / num;
                per_set[active[x]] += masses[x] * a.powf(pe) / mf[x] / basis.measure(active[x]);
            }
        }
        for (y, g) in grad.iter_mut().enumerate() {
            let up: f64 = basis.containing(y).iter().map(|&k| per_set[k]).sum::<f64>() * masses[y];
            let down = if f[y] > 0.0 {
                masses[y] * (f[y] * v.values()[y] / den).powf(pe) / f[y]
            } else {
                0.0
            };
            *g = up - down;
        }
        let gnorm = lp_norm(&grad, &vec![1.0; n], Exponent::TWO);
        let fnorm = lp_norm(&f, &vec![1.0; n], Exponent::TWO);
        if gnorm == 0.0 || !gnorm.is_finite() {
            break;
        }
        let eta = 0.5 / (1.0 + k as f64 / 20.0) * fnorm / gnorm;
        let candidate: Vec<f64> = f.iter().zip(&grad).map(|(x, g)| (x + eta * g).max(0.0)).collect();
        if candidate.iter().all(|&x| x == 0.0) {
            break;
        }
        f = candidate;
        normalize(&mut f, v, masses, p);
        let r = maximal_ratio(basis, w, v, p, &f);
        if r > best.0 {
            best = (r, f.clone());
        }
    }
    best
}

fn normalize(f: &mut [f64], v: &Weight, masses: &[f64], p: Exponent) {
    let d = weighted_norm(f, v.values(), masses, p);
    if d > 0.0 && d.is_finite() {
        f.iter_mut().for_each(|x| *x /= d);
    }
}

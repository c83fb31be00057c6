//! Fourier multipliers on finite abelian groups `Z_{n_1} × ... × Z_{n_d}` and
//! transference of weighted multiplier norms along homomorphisms.
//!
//! Elements and characters are both residue tuples, stored mixed-radix row-major.
//! The pairing is `(x, χ) = exp(2πi Σ x_i χ_i / n_i)`, evaluated from an exact
//! integer phase. The forward transform is the plain sum
//! `f̂(χ) = Σ_x f(x) conj((x, χ))`; the inverse carries `1/|G|`. The group has unit
//! point masses and the dual group masses `1/|G|`, so Plancherel holds as an equality.
//!
//! Finite groups need none of the approximation machinery of the continuous
//! setting: `δ_0` is an exact approximate identity and every function is a
//! trigonometric polynomial.

use std::collections::HashSet;
use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exponents::{Exponent, RECIP_TOL};
use crate::maximal::{AscentBudget, EstimateKind, OpNormEstimate};
use crate::rng;
use crate::weights::{Weight, WeightError};

/// Groups up to this order get exhaustive pair checks.
pub const EXHAUSTIVE_LIMIT: usize = 1 << 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransferError {
    #[error("group factors must all be at least 1, got {0:?}")]
    BadFactors(Vec<usize>),
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("multiplier entry {0} is not finite")]
    NonFinite(usize),
    #[error("matrix has shape {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    Shape {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("not a homomorphism: entry ({k}, {l}) = {a} times {n_source} is not divisible by {n_target}")]
    NotHomomorphism {
        k: usize,
        l: usize,
        a: i64,
        n_source: usize,
        n_target: usize,
    },
    #[error("homomorphism groups do not match the supplied groups")]
    GroupMismatch,
    #[error("multiplier norms need p in (1, inf), got {0}")]
    BadExponent(Exponent),
    #[error(transparent)]
    Weight(#[from] WeightError),
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `Z_{n_1} × ... × Z_{n_d}` with unit Haar mass per element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct FiniteAbelianGroup {
    factors: Vec<usize>,
}

impl TryFrom<Vec<usize>> for FiniteAbelianGroup {
    type Error = TransferError;
    fn try_from(factors: Vec<usize>) -> Result<Self, Self::Error> {
        Self::new(factors)
    }
}

impl From<FiniteAbelianGroup> for Vec<usize> {
    fn from(g: FiniteAbelianGroup) -> Self {
        g.factors
    }
}

impl FiniteAbelianGroup {
    pub fn new(factors: Vec<usize>) -> Result<Self, TransferError> {
        if factors.is_empty() || factors.contains(&0) {
            return Err(TransferError::BadFactors(factors));
        }
        Ok(Self { factors })
    }

    pub fn cyclic(n: usize) -> Result<Self, TransferError> {
        Self::new(vec![n])
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn order(&self) -> usize {
        self.factors.iter().product()
    }

    /// Least common multiple of the factors; all phases live in `Z_L`.
    pub fn exponent_lcm(&self) -> u64 {
        self.factors.iter().fold(1u64, |l, &n| l / gcd(l, n as u64) * n as u64)
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.rank());
        coords
            .iter()
            .zip(&self.factors)
            .fold(0, |acc, (&c, &n)| acc * n + c % n)
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.rank()];
        for (c, &n) in out.iter_mut().zip(&self.factors).rev() {
            *c = index % n;
            index /= n;
        }
        out
    }

    pub fn add(&self, a: usize, b: usize) -> usize {
        let (ca, cb) = (self.coords(a), self.coords(b));
        let sum: Vec<usize> = ca.iter().zip(&cb).zip(&self.factors).map(|((x, y), n)| (x + y) % n).collect();
        self.index(&sum)
    }

    pub fn neg(&self, a: usize) -> usize {
        let c: Vec<usize> = self.coords(a).iter().zip(&self.factors).map(|(x, n)| (n - x) % n).collect();
        self.index(&c)
    }

    pub fn sub(&self, a: usize, b: usize) -> usize {
        self.add(a, self.neg(b))
    }

    /// `Σ x_i χ_i / n_i mod 1` as a numerator over [`Self::exponent_lcm`].
    pub fn phase(&self, x: usize, chi: usize) -> u64 {
        let l = self.exponent_lcm();
        let (cx, cc) = (self.coords(x), self.coords(chi));
        cx.iter()
            .zip(&cc)
            .zip(&self.factors)
            .fold(0u64, |acc, ((&a, &b), &n)| (acc + (a as u64 * b as u64 % n as u64) * (l / n as u64)) % l)
    }

    /// `(x, χ)`.
    pub fn character(&self, x: usize, chi: usize) -> Complex64 {
        let l = self.exponent_lcm();
        Complex64::from_polar(1.0, TAU * self.phase(x, chi) as f64 / l as f64)
    }

    fn check(&self, len: usize) -> Result<(), TransferError> {
        if len != self.order() {
            return Err(TransferError::Length {
                expected: self.order(),
                got: len,
            });
        }
        Ok(())
    }

    fn transform(&self, f: &[Complex64], sign: f64) -> Vec<Complex64> {
        let mut data = f.to_vec();
        let total = self.order();
        let mut stride = total;
        for &n in &self.factors {
            stride /= n;
            if n == 1 {
                continue;
            }
            let twiddle: Vec<Complex64> = (0..n).map(|k| Complex64::from_polar(1.0, sign * TAU * k as f64 / n as f64)).collect();
            let block = n * stride;
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            for start in (0..total).step_by(block) {
                for inner in 0..stride {
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[start + j * stride + inner];
                    }
                    for k in 0..n {
                        data[start + k * stride + inner] = line.iter().enumerate().map(|(j, v)| v * twiddle[j * k % n]).sum();
                    }
                }
            }
        }
        data
    }

    /// `f̂(χ) = Σ_x f(x) conj((x, χ))`.
    pub fn dft(&self, f: &[Complex64]) -> Result<Vec<Complex64>, TransferError> {
        self.check(f.len())?;
        Ok(self.transform(f, -1.0))
    }

    /// `f(x) = |G|^{-1} Σ_χ f̂(χ) (x, χ)`.
    pub fn idft(&self, fhat: &[Complex64]) -> Result<Vec<Complex64>, TransferError> {
        self.check(fhat.len())?;
        let scale = 1.0 / self.order() as f64;
        Ok(self.transform(fhat, 1.0).into_iter().map(|z| z * scale).collect())
    }

    /// `y ↦ w(y - z)`.
    pub fn translate(&self, w: &Weight, z: usize) -> Weight {
        let vals = (0..self.order()).map(|y| w.values()[self.sub(y, z)]).collect();
        Weight::new(vals).expect("translate keeps positivity")
    }
}

/// `‖f‖_2` on the group (unit masses).
pub fn group_l2(f: &[Complex64]) -> f64 {
    f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖f̂‖_2` on the dual group (masses `1/|G|`).
pub fn dual_l2(fhat: &[Complex64]) -> f64 {
    (fhat.iter().map(|z| z.norm_sqr()).sum::<f64>() / fhat.len() as f64).sqrt()
}

/// A function on the dual group. JSON entries are numbers or `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Multiplier(Vec<Complex64>);

#[derive(Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Pair([f64; 2]),
}

impl<'de> Deserialize<'de> for Multiplier {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Vec::<Entry>::deserialize(d)?;
        let vals = raw
            .into_iter()
            .map(|e| match e {
                Entry::Real(x) => Complex64::new(x, 0.0),
                Entry::Pair([a, b]) => Complex64::new(a, b),
            })
            .collect();
        Multiplier::new(vals).map_err(serde::de::Error::custom)
    }
}

impl Multiplier {
    pub fn new(values: Vec<Complex64>) -> Result<Self, TransferError> {
        if let Some(i) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(TransferError::NonFinite(i));
        }
        Ok(Self(values))
    }

    pub fn real(values: &[f64]) -> Result<Self, TransferError> {
        Self::new(values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn constant(n: usize, c: Complex64) -> Self {
        Self(vec![c; n])
    }

    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sup(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    /// The multiplier of translation by `k`: `χ ↦ conj((k, χ))`.
    pub fn translation(group: &FiniteAbelianGroup, k: usize) -> Self {
        Self((0..group.order()).map(|chi| group.character(k, chi).conj()).collect())
    }

    /// `χ ↦ m(Φ(χ))`.
    pub fn compose(&self, phi: &GroupHom) -> Result<Self, TransferError> {
        if self.len() != phi.target().order() {
            return Err(TransferError::Length {
                expected: phi.target().order(),
                got: self.len(),
            });
        }
        Ok(Self((0..phi.source().order()).map(|chi| self.0[phi.apply(chi)]).collect()))
    }
}

/// `T_m f = F^{-1}(m f̂)`.
pub fn multiplier_apply(group: &FiniteAbelianGroup, m: &Multiplier, f: &[Complex64]) -> Result<Vec<Complex64>, TransferError> {
    group.check(m.len())?;
    let fhat = group.dft(f)?;
    let prod: Vec<Complex64> = fhat.iter().zip(m.values()).map(|(a, b)| a * b).collect();
    group.idft(&prod)
}

/// `D_w T_m D_w^{-1}`, whose `ℓ^p` norm is the `L^p_w` norm of `T_m`.
pub fn conjugated_matrix(group: &FiniteAbelianGroup, m: &Multiplier, w: &Weight) -> Result<DMatrix<Complex64>, TransferError> {
    let n = group.order();
    group.check(m.len())?;
    w.check_len(n)?;
    let kernel = group.idft(m.values())?;
    let wv = w.values();
    Ok(DMatrix::from_fn(n, n, |x, y| kernel[group.sub(x, y)] * (wv[x] / wv[y])))
}

/// `‖T_m‖_{L^2_v → L^2_w}`, the largest singular value of `D_w T_m D_v^{-1}`.
pub fn two_weight_l2_norm(group: &FiniteAbelianGroup, m: &Multiplier, w: &Weight, v: &Weight) -> Result<f64, TransferError> {
    let n = group.order();
    group.check(m.len())?;
    w.check_len(n)?;
    v.check_len(n)?;
    let kernel = group.idft(m.values())?;
    let (wv, vv) = (w.values(), v.values());
    let a = DMatrix::from_fn(n, n, |x, y| kernel[group.sub(x, y)] * (wv[x] / vv[y]));
    Ok(a.singular_values().iter().fold(0.0f64, |m, s| m.max(*s)))
}

fn lp(x: &[Complex64], p: f64) -> f64 {
    let top = x.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if top == 0.0 {
        return 0.0;
    }
    top * x.iter().map(|z| (z.norm() / top).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `|z|^{p-1} sgn z`, normalised to unit `ℓ^{p'}` norm.
fn dual_vector(y: &[Complex64], p: f64) -> Vec<Complex64> {
    let top = y.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let raw: Vec<Complex64> = y
        .iter()
        .map(|z| {
            let a = z.norm();
            if a == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                (z / a) * (a / top).powf(p - 1.0)
            }
        })
        .collect();
    let pd = p / (p - 1.0);
    let n = lp(&raw, pd);
    raw.into_iter().map(|z| z / n).collect()
}

fn matvec(a: &DMatrix<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    let v = nalgebra::DVector::from_column_slice(x);
    (a * v).as_slice().to_vec()
}

fn matvec_adjoint(a: &DMatrix<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    let v = nalgebra::DVector::from_column_slice(x);
    (a.adjoint() * v).as_slice().to_vec()
}

/// Alternating primal/dual power steps for `‖A‖_{ℓ^p → ℓ^p}`.
/// Returns the best ratio seen and the vector attaining it.
fn power_ascent(a: &DMatrix<Complex64>, start: Vec<Complex64>, p: f64, iterations: usize) -> (f64, Vec<Complex64>) {
    let pd = p / (p - 1.0);
    let mut x = start;
    let nx = lp(&x, p);
    if nx == 0.0 {
        return (0.0, x);
    }
    x.iter_mut().for_each(|z| *z /= nx);
    let mut best = (lp(&matvec(a, &x), p), x.clone());
    for _ in 0..iterations {
        let y = matvec(a, &x);
        if lp(&y, p) == 0.0 {
            break;
        }
        let z = dual_vector(&y, p);
        let u = matvec_adjoint(a, &z);
        if lp(&u, pd) == 0.0 {
            break;
        }
        let next = dual_vector(&u, pd);
        let value = lp(&matvec(a, &next), p);
        let gain = value - best.0;
        x = next;
        if value > best.0 {
            best = (value, x.clone());
        }
        if gain.abs() <= 1e-15 * value {
            break;
        }
    }
    best
}

/// `‖m‖_{M_{p,w}} = ‖T_m‖_{L^p_w → L^p_w}`.
///
/// Exact at `p = 2` (largest singular value of the conjugated matrix); a
/// witnessed lower bound otherwise. The witness is the function `f` itself.
pub fn multiplier_norm(group: &FiniteAbelianGroup, m: &Multiplier, p: Exponent, w: &Weight, budget: &AscentBudget) -> Result<OpNormEstimate<Complex64>, TransferError> {
    if p.recip() >= 1.0 - RECIP_TOL || p.recip() <= RECIP_TOL {
        return Err(TransferError::BadExponent(p));
    }
    let a = conjugated_matrix(group, m, w)?;
    let n = group.order();
    let to_f = |x: &[Complex64]| -> Vec<Complex64> { x.iter().zip(w.values()).map(|(z, w)| z / w).collect() };
    if (p.recip() - 0.5).abs() <= RECIP_TOL {
        let svd = a.clone().svd(false, true);
        let (k, &value) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, &0.0), |best, (i, s)| if *s > *best.1 { (i, s) } else { best });
        let witness = svd
            .v_t
            .map(|vt| vt.row(k).iter().map(|z| z.conj()).collect::<Vec<_>>())
            .unwrap_or_else(|| vec![Complex64::new(1.0, 0.0); n]);
        return Ok(OpNormEstimate {
            value,
            kind: EstimateKind::Exact,
            witness: to_f(&witness),
            method: "largest singular value".into(),
        });
    }
    let pv = p.value();
    let runs: Vec<(f64, Vec<Complex64>)> = (0..budget.restarts.max(2))
        .into_par_iter()
        .map(|i| {
            let start: Vec<Complex64> = match i {
                0 => vec![Complex64::new(1.0, 0.0); n],
                1 => {
                    let mut e = vec![Complex64::new(0.0, 0.0); n];
                    e[0] = Complex64::new(1.0, 0.0);
                    e
                }
                _ => {
                    let mut r = rng::stream(budget.seed, rng::tag("multiplier-norm"), i as u64);
                    (0..n).map(|_| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect()
                }
            };
            power_ascent(&a, start, pv, budget.iterations)
        })
        .collect();
    let (value, x) = runs
        .into_iter()
        .fold((0.0, Vec::new()), |best, run| if run.0 > best.0 { run } else { best });
    // the dual pairing at the witness gives the same number through the frequency side
    let f = to_f(&x);
    let y = matvec(&a, &x);
    let z = dual_vector(&y, pv);
    let g_reflected: Vec<Complex64> = z.iter().zip(w.values()).map(|(z, w)| z.conj() * w).collect();
    let g: Vec<Complex64> = (0..n).map(|x| g_reflected[group.neg(x)]).collect();
    let form = duality_form(group, m, &f, &g)?;
    let dual_value = form.integral.norm();
    Ok(OpNormEstimate {
        value: value.max(dual_value),
        kind: EstimateKind::LowerBound,
        witness: f,
        method: format!("power ascent ({} restarts); duality pairing {dual_value:.6e}", budget.restarts.max(2)),
    })
}

/// Both evaluations of the bilinear form `∫ m f̂ ĝ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityForm {
    /// `|G|^{-1} Σ_χ m(χ) f̂(χ) ĝ(χ)`, the integral against the dual Haar measure.
    pub integral: Complex64,
    /// `Σ_χ m(χ) f̂(χ) ĝ(χ)` without the dual mass.
    pub raw_sum: Complex64,
    /// `Σ_x T_m f(x) g(-x)`.
    pub spatial: Complex64,
}

impl DualityForm {
    pub fn discrepancy(&self) -> f64 {
        (self.integral - self.spatial).norm()
    }
}

pub fn duality_form(group: &FiniteAbelianGroup, m: &Multiplier, f: &[Complex64], g: &[Complex64]) -> Result<DualityForm, TransferError> {
    group.check(m.len())?;
    let (fh, gh) = (group.dft(f)?, group.dft(g)?);
    let raw_sum: Complex64 = m.values().iter().zip(&fh).zip(&gh).map(|((m, a), b)| m * a * b).sum();
    let tf = multiplier_apply(group, m, f)?;
    let spatial = (0..group.order()).map(|x| tf[x] * g[group.neg(x)]).sum();
    Ok(DualityForm {
        integral: raw_sum / group.order() as f64,
        raw_sum,
        spatial,
    })
}

/// `χ ↦ (Σ_l a_{kl} χ_l mod n_k)_k` from `source` to `target`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupHom {
    source: FiniteAbelianGroup,
    target: FiniteAbelianGroup,
    matrix: Vec<Vec<i64>>,
}

impl GroupHom {
    /// `matrix[k][l]`, one row per target factor.
    pub fn new(source: FiniteAbelianGroup, target: FiniteAbelianGroup, matrix: Vec<Vec<i64>>) -> Result<Self, TransferError> {
        let (rows, cols) = (matrix.len(), matrix.first().map_or(0, Vec::len));
        if rows != target.rank() || matrix.iter().any(|r| r.len() != source.rank()) {
            return Err(TransferError::Shape {
                rows,
                cols,
                expected_rows: target.rank(),
                expected_cols: source.rank(),
            });
        }
        let mut reduced = matrix;
        for (k, row) in reduced.iter_mut().enumerate() {
            let nk = target.factors()[k];
            for (l, a) in row.iter_mut().enumerate() {
                *a = a.rem_euclid(nk as i64);
                let nl = source.factors()[l];
                if (*a as i128 * nl as i128) % nk as i128 != 0 {
                    return Err(TransferError::NotHomomorphism {
                        k,
                        l,
                        a: *a,
                        n_source: nl,
                        n_target: nk,
                    });
                }
            }
        }
        Ok(Self {
            source,
            target,
            matrix: reduced,
        })
    }

    pub fn identity(group: &FiniteAbelianGroup) -> Self {
        let d = group.rank();
        let matrix = (0..d).map(|k| (0..d).map(|l| i64::from(k == l)).collect()).collect();
        Self::new(group.clone(), group.clone(), matrix).expect("identity is a homomorphism")
    }

    pub fn zero(source: &FiniteAbelianGroup, target: &FiniteAbelianGroup) -> Self {
        let matrix = vec![vec![0; source.rank()]; target.rank()];
        Self::new(source.clone(), target.clone(), matrix).expect("zero is a homomorphism")
    }

    pub fn source(&self) -> &FiniteAbelianGroup {
        &self.source
    }

    pub fn target(&self) -> &FiniteAbelianGroup {
        &self.target
    }

    pub fn matrix(&self) -> &[Vec<i64>] {
        &self.matrix
    }

    pub fn apply(&self, chi: usize) -> usize {
        let c = self.source.coords(chi);
        let image: Vec<usize> = self
            .matrix
            .iter()
            .zip(self.target.factors())
            .map(|(row, &nk)| {
                let s: i128 = row.iter().zip(&c).map(|(a, x)| *a as i128 * *x as i128).sum();
                s.rem_euclid(nk as i128) as usize
            })
            .collect();
        self.target.index(&image)
    }

    pub fn image(&self) -> HashSet<usize> {
        (0..self.source.order()).map(|c| self.apply(c)).collect()
    }

    pub fn is_surjective(&self) -> bool {
        self.image().len() == self.target.order()
    }

    /// `Φ(a + b) = Φ(a) + Φ(b)` over all pairs (skipped above [`EXHAUSTIVE_LIMIT`]).
    pub fn is_additive_exhaustive(&self) -> Option<bool> {
        let n = self.source.order();
        if n > EXHAUSTIVE_LIMIT {
            return None;
        }
        let images: Vec<usize> = (0..n).map(|c| self.apply(c)).collect();
        Some((0..n).all(|a| (0..n).all(|b| images[self.source.add(a, b)] == self.target.add(images[a], images[b]))))
    }
}

/// The dual homomorphism, characterised by `(Φ̂(x), χ) = (x, Φ(χ))`.
///
/// With `Φ: Z^H → Z^G` given by `a_{kl}`, the dual goes from `Z^G` to `Z^H` with
/// `b_{lk} = a_{kl} n_l^H / n_k^G`, an integer by the homomorphism condition.
pub fn dual_hom(phi: &GroupHom) -> GroupHom {
    let (h, g) = (phi.source(), phi.target());
    let matrix = (0..h.rank())
        .map(|l| {
            (0..g.rank())
                .map(|k| phi.matrix[k][l] * h.factors()[l] as i64 / g.factors()[k] as i64)
                .collect()
        })
        .collect();
    GroupHom::new(g.clone(), h.clone(), matrix).expect("dual of a homomorphism is a homomorphism")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingReport {
    pub pairs_checked: usize,
    pub mismatches: usize,
}

/// Compares the exact phases of `(Φ̂(x), χ)_H` and `(x, Φ(χ))_G` for every pair.
pub fn dual_pairing_check(phi: &GroupHom, dual: &GroupHom) -> Result<PairingReport, TransferError> {
    let (h, g) = (phi.source(), phi.target());
    if dual.source() != g || dual.target() != h {
        return Err(TransferError::GroupMismatch);
    }
    let (lh, lg) = (h.exponent_lcm() as u128, g.exponent_lcm() as u128);
    let mut mismatches = 0;
    for x in 0..g.order() {
        let px = dual.apply(x);
        for chi in 0..h.order() {
            let left = h.phase(px, chi) as u128 * lg;
            let right = g.phase(x, phi.apply(chi)) as u128 * lh;
            if left % (lh * lg) != right % (lh * lg) {
                mismatches += 1;
            }
        }
    }
    Ok(PairingReport {
        pairs_checked: g.order() * h.order(),
        mismatches,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityResidual {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
}

/// Both sides of `Σ_x E(Φ̂x) m̌(x) = |H|^{-1} Σ_χ m(Φχ) Ê(χ)` with
/// `m̌(x) = |G|^{-1} Σ_γ m(γ) conj((x, γ))`, for `m` on the dual of `G` and `E` on `H`.
pub fn homomorphism_duality_check(phi: &GroupHom, m: &Multiplier, e: &[Complex64]) -> Result<DualityResidual, TransferError> {
    let (h, g) = (phi.source(), phi.target());
    g.check(m.len())?;
    h.check(e.len())?;
    let dual = dual_hom(phi);
    let scale = 1.0 / g.order() as f64;
    let mcheck: Vec<Complex64> = g.dft(m.values())?.into_iter().map(|z| z * scale).collect();
    let lhs: Complex64 = (0..g.order()).map(|x| e[dual.apply(x)] * mcheck[x]).sum();
    let ehat = h.dft(e)?;
    let rhs: Complex64 = (0..h.order()).map(|chi| m.values()[phi.apply(chi)] * ehat[chi]).sum::<Complex64>() / h.order() as f64;
    Ok(DualityResidual {
        lhs,
        rhs,
        residual: (lhs - rhs).norm(),
    })
}

/// Largest relative spread of `‖m‖_{M_{2, τ_z w}}` over the given shifts.
pub fn translation_invariance_check(group: &FiniteAbelianGroup, m: &Multiplier, w: &Weight, shifts: &[usize]) -> Result<f64, TransferError> {
    let budget = AscentBudget::default();
    let base = multiplier_norm(group, m, Exponent::TWO, w, &budget)?.value;
    let mut worst = 0.0f64;
    for &z in shifts {
        let shifted = group.translate(w, z % group.order());
        let v = multiplier_norm(group, m, Exponent::TWO, &shifted, &budget)?.value;
        let scale = base.max(f64::MIN_POSITIVE);
        worst = worst.max((v - base).abs() / scale);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferVerdict {
    /// Exact norms, inequality holds.
    Holds,
    /// Exact norms, inequality fails.
    Violated,
    /// Lower bounds only, and they do not contradict the inequality.
    Consistent,
    /// Lower bounds only, and the left one exceeds the right one; nothing follows.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferenceReport {
    pub p: Exponent,
    /// `‖m ∘ Φ‖_{M_{p,w}}` on the dual of `H`.
    pub lhs: f64,
    /// `‖m‖_{M_{p, w ∘ Φ̂}}` on the dual of `G`.
    pub rhs: f64,
    pub c: f64,
    pub surjective: bool,
    pub exact: bool,
    pub verdict: TransferVerdict,
    pub note: String,
}

/// Slack for the exact comparison.
pub const TRANSFER_TOL: f64 = 1e-9;

/// `‖m ∘ Φ‖_{M_{p,w}(ĥ)} ≤ c ‖m‖_{M_{p, w∘Φ̂}(ĝ)}` for `Φ` from the dual of `H` to the dual of `G`.
///
/// `c = 1` when `Φ̂` is onto. Otherwise `c` is measured for this `m` as the largest
/// ratio `‖m‖_{M_{p, (τ_u w)∘Φ̂}} / ‖m‖_{M_{p, w∘Φ̂}}` over `u ∈ H`.
pub fn transference_check(g: &FiniteAbelianGroup, h: &FiniteAbelianGroup, phi: &GroupHom, w: &Weight, p: Exponent, m: &Multiplier, budget: &AscentBudget) -> Result<TransferenceReport, TransferError> {
    if phi.source() != h || phi.target() != g {
        return Err(TransferError::GroupMismatch);
    }
    w.check_len(h.order())?;
    g.check(m.len())?;
    let dual = dual_hom(phi);
    let pull = |w: &Weight| Weight::new((0..g.order()).map(|x| w.values()[dual.apply(x)]).collect());
    let lhs_est = multiplier_norm(h, &m.compose(phi)?, p, w, budget)?;
    let rhs_est = multiplier_norm(g, m, p, &pull(w)?, budget)?;
    let exact = lhs_est.kind == EstimateKind::Exact && rhs_est.kind == EstimateKind::Exact;
    let surjective = dual.is_surjective();
    let c = if surjective {
        1.0
    } else {
        let mut worst = 1.0f64;
        for u in 0..h.order() {
            let shifted = pull(&h.translate(w, u))?;
            let v = multiplier_norm(g, m, p, &shifted, budget)?.value;
            if rhs_est.value > 0.0 {
                worst = worst.max(v / rhs_est.value);
            }
        }
        worst
    };
    let (lhs, rhs) = (lhs_est.value, rhs_est.value);
    let ok = lhs <= c * rhs * (1.0 + TRANSFER_TOL) + f64::MIN_POSITIVE;
    let (verdict, note) = match (exact, ok) {
        (true, true) => (TransferVerdict::Holds, "both norms exact".to_string()),
        (true, false) => (TransferVerdict::Violated, "both norms exact".to_string()),
        (false, true) => (
            TransferVerdict::Consistent,
            "both norms are lower bounds; no upper bound is available at this exponent, so a violation cannot be certified".to_string(),
        ),
        (false, false) => (
            TransferVerdict::Inconclusive,
            "the left lower bound exceeds the right lower bound, but the right side is not an upper bound".to_string(),
        ),
    };
    let note = if surjective {
        format!("{note}; dual map onto, c = 1")
    } else {
        format!("{note}; dual map not onto, c measured over translates for this multiplier")
    };
    Ok(TransferenceReport {
        p,
        lhs,
        rhs,
        c,
        surjective,
        exact,
        verdict,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::sampling;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vec(n: usize, seed: u64) -> Vec<Complex64> {
        let mut r = rng::stream(seed, 7, 0);
        (0..n).map(|_| c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn indexing_round_trips() {
        let g = FiniteAbelianGroup::new(vec![2, 3, 4]).unwrap();
        assert_eq!(g.order(), 24);
        assert_eq!(g.exponent_lcm(), 12);
        for i in 0..24 {
            assert_eq!(g.index(&g.coords(i)), i);
            assert_eq!(g.add(i, g.neg(i)), 0);
        }
        assert_eq!(g.coords(g.index(&[1, 2, 3])), vec![1, 2, 3]);
        assert!(FiniteAbelianGroup::new(vec![3, 0]).is_err());
    }

    #[test]
    fn delta_and_character() {
        let g = FiniteAbelianGroup::new(vec![4, 3]).unwrap();
        let mut delta = vec![c(0.0, 0.0); 12];
        delta[0] = c(1.0, 0.0);
        assert!(g.dft(&delta).unwrap().iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-15));
        let chi = 7;
        let f: Vec<Complex64> = (0..12).map(|x| g.character(x, chi)).collect();
        let fh = g.dft(&f).unwrap();
        for (k, z) in fh.iter().enumerate() {
            let expect = if k == chi { 12.0 } else { 0.0 };
            assert!((z - c(expect, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn dft_matches_direct_sum() {
        let g = FiniteAbelianGroup::new(vec![3, 4, 2]).unwrap();
        let f = random_vec(24, 1);
        let fast = g.dft(&f).unwrap();
        for (chi, fc) in fast.iter().enumerate() {
            let direct: Complex64 = (0..24).map(|x| f[x] * g.character(x, chi).conj()).sum();
            assert!((direct - fc).norm() < 1e-12);
        }
        let back = g.idft(&fast).unwrap();
        assert!(back.iter().zip(&f).all(|(a, b)| (a - b).norm() < 1e-12));
        assert!((group_l2(&f) - dual_l2(&fast)).abs() < 1e-12);
    }

    #[test]
    fn translation_multiplier_shifts() {
        let g = FiniteAbelianGroup::cyclic(8).unwrap();
        let f = random_vec(8, 2);
        let out = multiplier_apply(&g, &Multiplier::translation(&g, 3), &f).unwrap();
        for x in 0..8 {
            assert!((out[x] - f[(x + 8 - 3) % 8]).norm() < 1e-12);
        }
    }

    #[test]
    fn symmetric_real_multiplier_keeps_real() {
        let g = FiniteAbelianGroup::cyclic(6).unwrap();
        let m = Multiplier::real(&[1.0, 2.0, -0.5, 3.0, -0.5, 2.0]).unwrap();
        let f: Vec<Complex64> = [1.0, -2.0, 0.5, 0.0, 4.0, 1.5].iter().map(|&x| c(x, 0.0)).collect();
        let out = multiplier_apply(&g, &m, &f).unwrap();
        assert!(out.iter().all(|z| z.im.abs() < 1e-12));
    }

    #[test]
    fn unweighted_l2_norm_is_sup() {
        let g = FiniteAbelianGroup::new(vec![2, 4]).unwrap();
        let m = Multiplier::new(random_vec(8, 3)).unwrap();
        let est = multiplier_norm(&g, &m, Exponent::TWO, &Weight::ones(8), &AscentBudget::default()).unwrap();
        assert_eq!(est.kind, EstimateKind::Exact);
        assert!((est.value - m.sup()).abs() < 1e-12);
    }

    #[test]
    fn scalar_multiplier_any_p() {
        let g = FiniteAbelianGroup::cyclic(5).unwrap();
        let mut r = rng::stream(4, 0, 0);
        let w = sampling::log_uniform(5, &mut r);
        let m = Multiplier::constant(5, c(0.0, -2.5));
        for p in [1.5, 2.0, 3.0, 7.0] {
            let est = multiplier_norm(&g, &m, Exponent::new(p).unwrap(), &w, &AscentBudget::default()).unwrap();
            assert!((est.value - 2.5).abs() < 1e-12, "p = {p}: {}", est.value);
        }
        assert!(multiplier_norm(&g, &m, Exponent::ONE, &w, &AscentBudget::default()).is_err());
    }

    #[test]
    fn general_p_ascent_bounds_witness() {
        let g = FiniteAbelianGroup::cyclic(8).unwrap();
        let mut r = rng::stream(5, 0, 0);
        let w = sampling::log_uniform(8, &mut r);
        let m = Multiplier::new(random_vec(8, 6)).unwrap();
        let p = Exponent::new(3.0).unwrap();
        let est = multiplier_norm(&g, &m, p, &w, &AscentBudget::default()).unwrap();
        let tf = multiplier_apply(&g, &m, &est.witness).unwrap();
        let num = lp(&tf.iter().zip(w.values()).map(|(z, w)| z * w).collect::<Vec<_>>(), 3.0);
        let den = lp(&est.witness.iter().zip(w.values()).map(|(z, w)| z * w).collect::<Vec<_>>(), 3.0);
        assert!(num / den <= est.value * (1.0 + 1e-12));
        assert!(num / den >= est.value * (1.0 - 1e-9));
    }

    #[test]
    fn duality_form_normalisation() {
        let g = FiniteAbelianGroup::cyclic(6).unwrap();
        let mut delta = vec![c(0.0, 0.0); 6];
        delta[0] = c(1.0, 0.0);
        let form = duality_form(&g, &Multiplier::constant(6, c(1.0, 0.0)), &delta, &delta).unwrap();
        assert!((form.raw_sum - c(6.0, 0.0)).norm() < 1e-12);
        assert!((form.integral - c(1.0, 0.0)).norm() < 1e-12);
        assert!(form.discrepancy() < 1e-12);
        let zero = duality_form(&g, &Multiplier::constant(6, c(0.0, 0.0)), &delta, &delta).unwrap();
        assert_eq!(zero.raw_sum, c(0.0, 0.0));
    }

    #[test]
    fn doubling_hom_and_dual() {
        let h = FiniteAbelianGroup::cyclic(2).unwrap();
        let g = FiniteAbelianGroup::cyclic(4).unwrap();
        let phi = GroupHom::new(h.clone(), g.clone(), vec![vec![2]]).unwrap();
        let dual = dual_hom(&phi);
        assert_eq!(dual.matrix(), &[vec![1]]);
        assert_eq!((0..4).map(|x| dual.apply(x)).collect::<Vec<_>>(), vec![0, 1, 0, 1]);
        assert!(dual.is_surjective());
        let rep = dual_pairing_check(&phi, &dual).unwrap();
        assert_eq!((rep.pairs_checked, rep.mismatches), (8, 0));
        assert!(GroupHom::new(h, g, vec![vec![1]]).is_err());
    }

    #[test]
    fn identity_and_zero_duals() {
        let g = FiniteAbelianGroup::new(vec![2, 6]).unwrap();
        let id = GroupHom::identity(&g);
        assert_eq!(dual_hom(&id), id);
        let h = FiniteAbelianGroup::cyclic(3).unwrap();
        let z = GroupHom::zero(&h, &g);
        assert_eq!(dual_hom(&z), GroupHom::zero(&g, &h));
        assert_eq!(id.is_additive_exhaustive(), Some(true));
    }

    #[test]
    fn duality_identity_on_doubling() {
        let h = FiniteAbelianGroup::cyclic(4).unwrap();
        let g = FiniteAbelianGroup::cyclic(8).unwrap();
        let phi = GroupHom::new(h.clone(), g, vec![vec![2]]).unwrap();
        let m = Multiplier::new(random_vec(8, 8)).unwrap();
        let e = random_vec(4, 9);
        let res = homomorphism_duality_check(&phi, &m, &e).unwrap();
        assert!(res.residual < 1e-12, "{res:?}");
    }

    #[test]
    fn transference_cyclic_doubling_flat_weight() {
        let h = FiniteAbelianGroup::cyclic(2).unwrap();
        let g = FiniteAbelianGroup::cyclic(4).unwrap();
        let phi = GroupHom::new(h.clone(), g.clone(), vec![vec![2]]).unwrap();
        let m = Multiplier::real(&[0.5, 3.0, -1.0, 2.0]).unwrap();
        let rep = transference_check(&g, &h, &phi, &Weight::ones(2), Exponent::TWO, &m, &AscentBudget::default()).unwrap();
        assert!((rep.lhs - 1.0).abs() < 1e-12);
        assert!((rep.rhs - 3.0).abs() < 1e-12);
        assert_eq!(rep.c, 1.0);
        assert_eq!(rep.verdict, TransferVerdict::Holds);
    }

    #[test]
    fn translation_invariance_exact_at_two() {
        let g = FiniteAbelianGroup::cyclic(6).unwrap();
        let mut r = rng::stream(10, 0, 0);
        let w = sampling::log_uniform(6, &mut r);
        let m = Multiplier::new(random_vec(6, 11)).unwrap();
        let dev = translation_invariance_check(&g, &m, &w, &[0, 1, 2, 3, 4, 5]).unwrap();
        assert!(dev < 1e-10);
        let trivial = FiniteAbelianGroup::cyclic(1).unwrap();
        let dev = translation_invariance_check(&trivial, &Multiplier::constant(1, c(2.0, 0.0)), &Weight::ones(1), &[0]).unwrap();
        assert_eq!(dev, 0.0);
    }

    #[test]
    fn multiplier_json_accepts_reals_and_pairs() {
        let m: Multiplier = serde_json::from_str("[1, [0.5, -2], 3.25]").unwrap();
        assert_eq!(m.values(), &[c(1.0, 0.0), c(0.5, -2.0), c(3.25, 0.0)]);
        let g: FiniteAbelianGroup = serde_json::from_str("[2, 4]").unwrap();
        assert_eq!(g.order(), 8);
        assert!(serde_json::from_str::<FiniteAbelianGroup>("[]").is_err());
    }
}

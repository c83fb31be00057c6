//! Finite measure spaces carrying a basis of sets.
//!
//! Points are indexed `0..n`. A [`SetBasis`] owns a copy of its measure space so
//! that every routine taking a basis also knows the point masses.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest point count for which pair containment is checked by brute force.
pub const EXHAUSTIVE_PAIR_LIMIT: usize = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("dyadic levels must lie in 1..=16, got {0}")]
    LevelsOutOfRange(u32),
    #[error("cyclic group order must be at least 2, got {0}")]
    GroupTooSmall(usize),
    #[error("a measure space needs at least one point")]
    Empty,
    #[error("mass at point {index} is {value}; masses must be positive and finite")]
    BadMass { index: usize, value: f64 },
    #[error("basis set {set} refers to point {point}, but the space has {len} points")]
    PointOutOfRange { set: usize, point: usize, len: usize },
    #[error("basis set {0} is empty")]
    EmptySet(usize),
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("invalid group basis: {0}")]
    InvalidGroupBasis(String),
}

/// Finite point set with strictly positive masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpace {
    masses: Vec<f64>,
    label: String,
}

impl MeasureSpace {
    pub fn new(masses: Vec<f64>, label: impl Into<String>) -> Result<Self, SpaceError> {
        if masses.is_empty() {
            return Err(SpaceError::Empty);
        }
        if let Some((index, &value)) = masses
            .iter()
            .enumerate()
            .find(|(_, m)| !(m.is_finite() && **m > 0.0))
        {
            return Err(SpaceError::BadMass { index, value });
        }
        Ok(Self {
            masses,
            label: label.into(),
        })
    }

    pub fn uniform(n: usize, mass: f64, label: impl Into<String>) -> Result<Self, SpaceError> {
        Self::new(vec![mass; n], label)
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn min_mass(&self) -> f64 {
        self.masses.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn measure(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.masses[i]).sum()
    }
}

/// A family of nonempty subsets of a [`MeasureSpace`].
///
/// Construction only checks that the sets are nonempty and in range; use
/// [`validate_basis`] or [`SetBasis::checked`] for the cover and pair axioms.
#[derive(Debug, Clone, PartialEq)]
pub struct SetBasis {
    space: MeasureSpace,
    sets: Vec<Vec<usize>>,
    measures: Vec<f64>,
    containing: Vec<Vec<usize>>,
}

impl SetBasis {
    pub fn new(space: MeasureSpace, sets: Vec<Vec<usize>>) -> Result<Self, SpaceError> {
        let n = space.len();
        let mut cleaned = Vec::with_capacity(sets.len());
        for (k, mut set) in sets.into_iter().enumerate() {
            if set.is_empty() {
                return Err(SpaceError::EmptySet(k));
            }
            set.sort_unstable();
            set.dedup();
            if let Some(&point) = set.iter().find(|&&p| p >= n) {
                return Err(SpaceError::PointOutOfRange { set: k, point, len: n });
            }
            cleaned.push(set);
        }
        let measures = cleaned.iter().map(|s| space.measure(s)).collect();
        let mut containing = vec![Vec::new(); n];
        for (k, set) in cleaned.iter().enumerate() {
            for &x in set {
                containing[x].push(k);
            }
        }
        Ok(Self {
            space,
            sets: cleaned,
            measures,
            containing,
        })
    }

    /// Builds the basis and rejects it unless every axiom holds.
    pub fn checked(space: MeasureSpace, sets: Vec<Vec<usize>>) -> Result<Self, SpaceError> {
        let basis = Self::new(space, sets)?;
        let report = validate_basis(&basis);
        if report.ok {
            Ok(basis)
        } else {
            Err(SpaceError::InvalidBasis(report.summary()))
        }
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn masses(&self) -> &[f64] {
        self.space.masses()
    }

    pub fn n_points(&self) -> usize {
        self.space.len()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn set(&self, k: usize) -> &[usize] {
        &self.sets[k]
    }

    pub fn measure(&self, k: usize) -> f64 {
        self.measures[k]
    }

    /// Indices of the basis sets containing point `x`.
    pub fn containing(&self, x: usize) -> &[usize] {
        &self.containing[x]
    }

    /// True when every set is a run of consecutive indices.
    pub fn is_interval_basis(&self) -> bool {
        self.sets
            .iter()
            .all(|s| s.last().unwrap() - s[0] + 1 == s.len())
    }

    pub fn to_file(&self) -> SpaceFile {
        SpaceFile {
            masses: self.space.masses().to_vec(),
            basis: self.sets.clone(),
            label: Some(self.space.label().to_string()),
        }
    }
}

/// JSON layout `{"masses": [...], "basis": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub masses: Vec<f64>,
    pub basis: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl SpaceFile {
    /// Structural conversion; the axioms are not enforced here.
    pub fn into_basis(self) -> Result<SetBasis, SpaceError> {
        let space = MeasureSpace::new(self.masses, self.label.unwrap_or_default())?;
        SetBasis::new(space, self.basis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub cover: bool,
    pub uncovered: Vec<usize>,
    pub pair_containment: bool,
    pub failing_pair: Option<(usize, usize)>,
    pub measures_positive_finite: bool,
    pub ok: bool,
}

impl ValidationReport {
    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        if !self.cover {
            parts.push(format!("points {:?} are not covered", self.uncovered));
        }
        if let Some((x, y)) = self.failing_pair {
            parts.push(format!("no set contains both {x} and {y}"));
        } else if !self.pair_containment {
            parts.push("pair containment fails".to_string());
        }
        if !self.measures_positive_finite {
            parts.push("a set has zero or infinite measure".to_string());
        }
        if parts.is_empty() {
            "all checks pass".to_string()
        } else {
            parts.join("; ")
        }
    }
}

/// Checks cover, pair containment and set measures. Failures are reported, not thrown.
pub fn validate_basis(basis: &SetBasis) -> ValidationReport {
    let n = basis.n_points();
    let uncovered: Vec<usize> = (0..n).filter(|&x| basis.containing(x).is_empty()).collect();
    let cover = uncovered.is_empty();
    let measures_positive_finite = basis.measures.iter().all(|m| m.is_finite() && *m > 0.0);
    let failing_pair = first_uncontained_pair(basis);
    let pair_containment = failing_pair.is_none();
    ValidationReport {
        cover,
        uncovered,
        pair_containment,
        failing_pair,
        measures_positive_finite,
        ok: cover && pair_containment && measures_positive_finite,
    }
}

fn first_uncontained_pair(basis: &SetBasis) -> Option<(usize, usize)> {
    let n = basis.n_points();
    if basis.sets.iter().any(|s| s.len() == n) {
        return None;
    }
    if n > EXHAUSTIVE_PAIR_LIMIT {
        // Without a full set the brute-force table would not fit; fall back to
        // per-point unions, which is slower but exact.
        return first_uncontained_pair_by_union(basis);
    }
    let words = n.div_ceil(64);
    let mut table = vec![0u64; n * words];
    let mut mask = vec![0u64; words];
    for set in &basis.sets {
        mask.iter_mut().for_each(|m| *m = 0);
        for &y in set {
            mask[y / 64] |= 1 << (y % 64);
        }
        for &x in set {
            let row = &mut table[x * words..(x + 1) * words];
            row.iter_mut().zip(&mask).for_each(|(r, m)| *r |= m);
        }
    }
    for x in 0..n {
        let row = &table[x * words..(x + 1) * words];
        for y in x..n {
            if row[y / 64] & (1 << (y % 64)) == 0 {
                return Some((x, y));
            }
        }
    }
    None
}

fn first_uncontained_pair_by_union(basis: &SetBasis) -> Option<(usize, usize)> {
    let n = basis.n_points();
    let mut seen = vec![false; n];
    for x in 0..n {
        seen.iter_mut().for_each(|s| *s = false);
        for &k in basis.containing(x) {
            for &y in basis.set(k) {
                seen[y] = true;
            }
        }
        if let Some(y) = (x..n).find(|&y| !seen[y]) {
            return Some((x, y));
        }
    }
    None
}

/// Uniform grid of `2^levels` points on `[0,1)` with all dyadic intervals.
///
/// Generation 0 is the full set, so pair containment holds.
pub fn make_dyadic_space(levels: u32) -> Result<SetBasis, SpaceError> {
    if !(1..=16).contains(&levels) {
        return Err(SpaceError::LevelsOutOfRange(levels));
    }
    let n = 1usize << levels;
    let space = MeasureSpace::uniform(n, 1.0 / n as f64, format!("dyadic({levels})"))?;
    let mut sets = Vec::with_capacity(2 * n - 1);
    for generation in 0..=levels {
        let width = n >> generation;
        for start in (0..n).step_by(width) {
            sets.push((start..start + width).collect());
        }
    }
    SetBasis::new(space, sets)
}

/// Nested symmetric neighbourhoods of zero in `Z_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupBasis {
    order: usize,
    levels: Vec<Vec<usize>>,
    doubling_constant: f64,
}

impl GroupBasis {
    /// Verifies nesting, symmetry, sumset containment and computes the doubling
    /// constant by exhaustive enumeration.
    pub fn new(order: usize, levels: Vec<Vec<usize>>) -> Result<Self, SpaceError> {
        if levels.is_empty() {
            return Err(SpaceError::InvalidGroupBasis("no levels".into()));
        }
        let mut levels = levels;
        for level in &mut levels {
            level.sort_unstable();
            level.dedup();
            if level.iter().any(|&x| x >= order) {
                return Err(SpaceError::InvalidGroupBasis("element out of range".into()));
            }
        }
        let basis = Self {
            order,
            levels,
            doubling_constant: f64::NAN,
        };
        let a = basis.verify()?;
        Ok(Self {
            doubling_constant: a,
            ..basis
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn top(&self) -> usize {
        self.levels.len() - 1
    }

    /// `U_k`; levels past the top repeat the top level.
    pub fn level(&self, k: usize) -> &[usize] {
        &self.levels[k.min(self.top())]
    }

    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }

    pub fn theta(&self, k: usize) -> usize {
        k + 1
    }

    pub fn doubling_constant(&self) -> f64 {
        self.doubling_constant
    }

    fn contains(&self, k: usize, x: usize) -> bool {
        self.level(k).binary_search(&x).is_ok()
    }

    fn verify(&self) -> Result<f64, SpaceError> {
        let n = self.order;
        let fail = |msg: String| Err(SpaceError::InvalidGroupBasis(msg));
        if self.levels[self.top()].len() != n {
            return fail("top level is not the whole group".into());
        }
        for k in 0..=self.top() {
            let u = self.level(k);
            if u.is_empty() {
                return fail(format!("level {k} is empty"));
            }
            if k > 0 && !self.level(k - 1).iter().all(|&x| self.contains(k, x)) {
                return fail(format!("level {} is not contained in level {k}", k - 1));
            }
            if !u.iter().all(|&x| self.contains(k, (n - x) % n)) {
                return fail(format!("level {k} is not symmetric"));
            }
            let up = self.theta(k);
            for &x in u {
                for &y in u {
                    if !self.contains(up, (x + y) % n) {
                        return fail(format!("sum {x}+{y} of level {k} leaves level {up}"));
                    }
                }
            }
        }
        // The group measure is translation invariant, but the bound is checked
        // at every point anyway.
        let mut a: f64 = 1.0;
        for k in 0..=self.top() {
            for x in 0..n {
                let small = translate_size(self.level(k), x, n);
                let big = translate_size(self.level(self.theta(k)), x, n);
                a = a.max(big as f64 / small as f64);
            }
        }
        Ok(a)
    }
}

fn translate_size(set: &[usize], x: usize, n: usize) -> usize {
    let mut shifted: Vec<usize> = set.iter().map(|&y| (x + y) % n).collect();
    shifted.sort_unstable();
    shifted.dedup();
    shifted.len()
}

/// `Z_n` with unit masses, intervals `{-a_k..a_k}` with `a_k = min(2^k, n/2)`,
/// and the basis of all their translates.
pub fn make_cyclic_space(n: usize) -> Result<(SetBasis, GroupBasis), SpaceError> {
    if n < 2 {
        return Err(SpaceError::GroupTooSmall(n));
    }
    let half = n / 2;
    let mut levels: Vec<Vec<usize>> = Vec::new();
    let mut k = 0u32;
    loop {
        let a = (1usize << k.min(62)).min(half);
        let mut level: Vec<usize> = (0..=a).flat_map(|d| [d % n, (n - d % n) % n]).collect();
        level.sort_unstable();
        level.dedup();
        let full = level.len() == n;
        levels.push(level);
        if full {
            break;
        }
        k += 1;
    }
    let group = GroupBasis::new(n, levels)?;
    let mut sets: Vec<Vec<usize>> = Vec::new();
    for level in group.levels() {
        for x in 0..n {
            let mut s: Vec<usize> = level.iter().map(|&y| (x + y) % n).collect();
            s.sort_unstable();
            if !sets.contains(&s) {
                sets.push(s);
            }
        }
    }
    let space = MeasureSpace::uniform(n, 1.0, format!("cyclic({n})"))?;
    Ok((SetBasis::new(space, sets)?, group))
}

/// Cartesian product; point `(i, j)` has index `i * b.n_points() + j`, and the
/// basis is every product `U x V`.
pub fn product_space(a: &SetBasis, b: &SetBasis) -> Result<SetBasis, SpaceError> {
    let nb = b.n_points();
    let masses = a
        .masses()
        .iter()
        .flat_map(|&ma| b.masses().iter().map(move |&mb| ma * mb))
        .collect();
    let label = format!("{} x {}", a.space().label(), b.space().label());
    let space = MeasureSpace::new(masses, label)?;
    let mut sets = Vec::with_capacity(a.len() * b.len());
    for u in a.sets() {
        for v in b.sets() {
            sets.push(
                u.iter()
                    .flat_map(|&i| v.iter().map(move |&j| i * nb + j))
                    .collect(),
            );
        }
    }
    SetBasis::new(space, sets)
}

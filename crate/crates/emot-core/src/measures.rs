//! Finitely supported measures on the line and on line x labels.

use alloc::format;
use alloc::vec::Vec;

use crate::num;
use crate::{Error, Result};

/// Atoms closer than this are merged at construction.
pub const MERGE_TOL: f64 = 1e-12;
/// Absolute mass tolerance used by the metric operations.
pub const MASS_TOL: f64 = 1e-12;

pub(crate) fn mass_tol(a: f64, b: f64) -> f64 {
    MASS_TOL * (1.0 + a.abs().max(b.abs()))
}

/// A finitely supported nonnegative measure on the real line.
///
/// Atoms are strictly increasing and weights strictly positive; the empty
/// measure is the zero measure.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscreteMeasure {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    mass: f64,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        for (&a, &w) in atoms.iter().zip(&weights) {
            if !a.is_finite() || !w.is_finite() {
                return Err(Error::InvalidMeasure(format!("non-finite entry ({a}, {w})")));
            }
            if w < 0.0 {
                return Err(Error::InvalidMeasure(format!("negative weight {w} at {a}")));
            }
        }
        Ok(Self::collect(atoms.into_iter().zip(weights)))
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let (a, w) = pairs.iter().copied().unzip();
        Self::new(a, w)
    }

    /// Builds a measure from trusted pairs: nonpositive weights are dropped,
    /// atoms sorted and merged.
    pub(crate) fn collect<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> Self {
        let mut v: Vec<(f64, f64)> = pairs.into_iter().filter(|&(_, w)| w > 0.0).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<f64> = Vec::with_capacity(v.len());
        let mut weights: Vec<f64> = Vec::with_capacity(v.len());
        for (x, w) in v {
            match atoms.last() {
                Some(&last) if x - last <= MERGE_TOL => *weights.last_mut().unwrap() += w,
                _ => {
                    atoms.push(x);
                    weights.push(w);
                }
            }
        }
        let mass = weights.iter().sum();
        Self { atoms, weights, mass }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn dirac(x: f64) -> Self {
        Self { atoms: alloc::vec![x], weights: alloc::vec![1.0], mass: 1.0 }
    }

    /// Equal weights summing to one.
    pub fn uniform(atoms: &[f64]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        let w = 1.0 / atoms.len() as f64;
        Self::new(atoms.to_vec(), alloc::vec![w; atoms.len()])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// ∫ x dm (not normalized).
    pub fn first_moment(&self) -> f64 {
        self.iter().map(|(x, w)| x * w).sum()
    }

    /// Mean of the normalized measure.
    pub fn mean(&self) -> Result<f64> {
        if self.mass <= 0.0 {
            return Err(Error::EmptyMeasure);
        }
        Ok(self.first_moment() / self.mass)
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }

    pub fn min_atom(&self) -> Option<f64> {
        self.atoms.first().copied()
    }

    pub fn max_atom(&self) -> Option<f64> {
        self.atoms.last().copied()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::collect(self.iter().map(|(x, w)| (x, w * c)))
    }

    pub fn normalized(&self) -> Result<Self> {
        if self.mass <= 0.0 {
            return Err(Error::EmptyMeasure);
        }
        Ok(self.scaled(1.0 / self.mass))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::collect(self.iter().chain(other.iter()))
    }

    pub fn sum<'a>(items: impl IntoIterator<Item = &'a DiscreteMeasure>) -> Self {
        Self::collect(items.into_iter().flat_map(|m| m.iter()))
    }

    pub fn restrict(&self, keep: impl Fn(f64) -> bool) -> Self {
        Self::collect(self.iter().filter(|&(x, _)| keep(x)))
    }

    /// Applies `f` to every atom.
    pub fn map_atoms(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::collect(self.iter().map(|(x, w)| (f(x), w)))
    }

    /// Weight carried by atoms within `tol` of `x`.
    pub fn weight_at(&self, x: f64, tol: f64) -> f64 {
        self.iter().filter(|&(a, _)| num::abs(a - x) <= tol).map(|(_, w)| w).sum()
    }

    /// Potential function u(y) = ∫|y - x| m(dx).
    pub fn potential(&self, y: f64) -> f64 {
        self.iter().map(|(x, w)| w * num::abs(y - x)).sum()
    }

    /// Potential evaluated at ascending points in linear time.
    pub fn potentials_at(&self, sorted_points: &[f64]) -> Vec<f64> {
        let total_first = self.first_moment();
        let mut k = 0;
        let (mut w_le, mut m_le) = (0.0, 0.0);
        sorted_points
            .iter()
            .map(|&y| {
                while k < self.atoms.len() && self.atoms[k] <= y {
                    w_le += self.weights[k];
                    m_le += self.weights[k] * self.atoms[k];
                    k += 1;
                }
                (y * w_le - m_le) + ((total_first - m_le) - y * (self.mass - w_le))
            })
            .collect()
    }

    pub fn quantiles(&self) -> QuantileView {
        let mut acc = 0.0;
        let cumulative = self
            .weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        QuantileView { atoms: self.atoms.clone(), cumulative }
    }

    /// Atomwise comparison after sorting: same support (within `tol`) and
    /// weights within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        total_variation(self, other) <= tol
            || (self.len() == other.len()
                && self.iter().zip(other.iter()).all(|((a, w), (b, v))| {
                    num::abs(a - b) <= tol && num::abs(w - v) <= tol
                }))
    }
}

/// Cumulative weights with generalized-inverse lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileView {
    atoms: Vec<f64>,
    cumulative: Vec<f64>,
}

impl QuantileView {
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    /// CDF F(x) = m((-inf, x]).
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|&a| a <= x);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// Smallest atom a with F(a) >= t, for t in (0, mass].
    pub fn quantile(&self, t: f64) -> Option<f64> {
        if self.atoms.is_empty() {
            return None;
        }
        let k = self.cumulative.partition_point(|&c| c < t);
        Some(self.atoms[k.min(self.atoms.len() - 1)])
    }
}

/// Wasserstein distance on the line via quantile functions.
///
/// For equal-mass subprobabilities this is mass^(1/p) times the distance of
/// the normalized measures, i.e. (∫_0^mass |F1^-1 - F2^-1|^p)^(1/p).
pub fn wasserstein_line(a: &DiscreteMeasure, b: &DiscreteMeasure, p: f64) -> Result<f64> {
    wasserstein_line_tol(a, b, p, mass_tol(a.mass, b.mass))
}

/// As [`wasserstein_line`] with an explicit mass tolerance; any leftover
/// mass is ignored.
pub fn wasserstein_line_tol(a: &DiscreteMeasure, b: &DiscreteMeasure, p: f64, tol: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("p must be finite and >= 1, got {p}")));
    }
    if a.mass <= 0.0 || b.mass <= 0.0 {
        return Err(Error::EmptyMeasure);
    }
    if num::abs(a.mass - b.mass) > tol {
        return Err(Error::MassMismatch(a.mass, b.mass));
    }
    Ok(num::powf(transport_line_cost(a, b, p), 1.0 / p))
}

// ∫ |F1^-1 - F2^-1|^p over the common mass range.
pub(crate) fn transport_line_cost(a: &DiscreteMeasure, b: &DiscreteMeasure, p: f64) -> f64 {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return 0.0;
    }
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a.weights[0], b.weights[0]);
    let mut total = 0.0;
    loop {
        let s = ra.min(rb);
        total += s * num::dist_p(a.atoms[i], b.atoms[j], p);
        if ra < rb {
            rb -= ra;
            i += 1;
            if i == n {
                break;
            }
            ra = a.weights[i];
        } else if rb < ra {
            ra -= rb;
            j += 1;
            if j == m {
                break;
            }
            rb = b.weights[j];
        } else {
            i += 1;
            j += 1;
            if i == n || j == m {
                break;
            }
            ra = a.weights[i];
            rb = b.weights[j];
        }
    }
    total
}

/// Outcome of a convex-order test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexOrderCheck {
    pub ordered: bool,
    /// A point where u_{m1} exceeds u_{m2} by more than the tolerance.
    pub witness: Option<f64>,
    /// max over breakpoints of u_{m1} - u_{m2}.
    pub max_violation: f64,
}

/// Tolerance scaled to the size of the inputs, used internally.
pub fn default_order_tol(m1: &DiscreteMeasure, m2: &DiscreteMeasure) -> f64 {
    let span = |m: &DiscreteMeasure| {
        m.atoms.first().map_or(0.0, |a| num::abs(*a)).max(m.atoms.last().map_or(0.0, |a| num::abs(*a)))
    };
    1e-9 * (1.0 + m1.mass.max(m2.mass) * span(m1).max(span(m2)))
}

/// Decides m1 <=_cx m2 through mass, first moment and potentials at the
/// breakpoints of both measures.
pub fn check_convex_order(m1: &DiscreteMeasure, m2: &DiscreteMeasure, tol: f64) -> ConvexOrderCheck {
    if m1.is_empty() && m2.is_empty() {
        return ConvexOrderCheck { ordered: true, witness: None, max_violation: 0.0 };
    }
    if num::abs(m1.mass - m2.mass) > tol {
        return ConvexOrderCheck { ordered: false, witness: None, max_violation: f64::INFINITY };
    }
    let lo = m1.min_atom().unwrap_or(f64::INFINITY).min(m2.min_atom().unwrap_or(f64::INFINITY));
    let hi = m1.max_atom().unwrap_or(f64::NEG_INFINITY).max(m2.max_atom().unwrap_or(f64::NEG_INFINITY));
    let d_mean = m1.first_moment() - m2.first_moment();
    if num::abs(d_mean) > tol {
        let witness = if d_mean > 0.0 { lo - 1.0 } else { hi + 1.0 };
        return ConvexOrderCheck { ordered: false, witness: Some(witness), max_violation: num::abs(d_mean) };
    }
    let mut points: Vec<f64> = m1.atoms.iter().chain(&m2.atoms).copied().collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let u1 = m1.potentials_at(&points);
    let u2 = m2.potentials_at(&points);
    let (mut worst, mut at) = (f64::NEG_INFINITY, points[0]);
    for ((&y, a), b) in points.iter().zip(&u1).zip(&u2) {
        if a - b > worst {
            worst = a - b;
            at = y;
        }
    }
    ConvexOrderCheck { ordered: worst <= tol, witness: (worst > tol).then_some(at), max_violation: worst }
}

/// k atoms at the conditional means of the quantile cells ((i-1)/k, i/k].
pub fn quantile_discretize(m: &DiscreteMeasure, k: usize) -> Result<DiscreteMeasure> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if m.is_empty() {
        return Ok(DiscreteMeasure::zero());
    }
    let mut out = Vec::with_capacity(k);
    let (mut i, mut rem) = (0, m.weights[0]);
    let mut taken_total = 0.0;
    for c in 0..k {
        let end = if c + 1 == k { f64::INFINITY } else { m.mass * (c + 1) as f64 / k as f64 };
        let (mut w, mut fm) = (0.0, 0.0);
        while i < m.len() {
            let room = end - taken_total;
            if room <= 0.0 {
                break;
            }
            let take = rem.min(room);
            w += take;
            fm += take * m.atoms[i];
            taken_total += take;
            rem -= take;
            if rem <= 0.0 {
                i += 1;
                if i < m.len() {
                    rem = m.weights[i];
                }
            } else {
                break;
            }
        }
        if w > 0.0 {
            out.push((fm / w, w));
        }
    }
    Ok(DiscreteMeasure::collect(out))
}

/// Half the l1 distance between weight vectors on the union support.
pub fn total_variation(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a.atoms[i] < b.atoms[j] - MERGE_TOL) {
            s += a.weights[i];
            i += 1;
        } else if i == a.len() || b.atoms[j] < a.atoms[i] - MERGE_TOL {
            s += b.weights[j];
            j += 1;
        } else {
            s += num::abs(a.weights[i] - b.weights[j]);
            i += 1;
            j += 1;
        }
    }
    0.5 * s
}

/// A finitely supported measure on pairs (x, u): a spatial state and an
/// information label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LiftedMeasure {
    atoms: Vec<(f64, f64)>,
    weights: Vec<f64>,
    mass: f64,
}

impl LiftedMeasure {
    pub fn new(atoms: Vec<(f64, f64)>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        for (&(x, u), &w) in atoms.iter().zip(&weights) {
            if !x.is_finite() || !u.is_finite() || !w.is_finite() {
                return Err(Error::InvalidMeasure(format!("non-finite entry ({x}, {u}, {w})")));
            }
            if w < 0.0 {
                return Err(Error::InvalidMeasure(format!("negative weight {w} at ({x}, {u})")));
            }
        }
        Ok(Self::collect(atoms.into_iter().zip(weights)))
    }

    pub(crate) fn collect<I: IntoIterator<Item = ((f64, f64), f64)>>(pairs: I) -> Self {
        let mut v: Vec<((f64, f64), f64)> = pairs.into_iter().filter(|&(_, w)| w > 0.0).collect();
        v.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0).then(a.0 .1.total_cmp(&b.0 .1)));
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        let mut weights: Vec<f64> = Vec::with_capacity(v.len());
        for (a, w) in v {
            match atoms.last() {
                Some(&last) if num::abs(a.0 - last.0) <= MERGE_TOL && num::abs(a.1 - last.1) <= MERGE_TOL => {
                    *weights.last_mut().unwrap() += w
                }
                _ => {
                    atoms.push(a);
                    weights.push(w);
                }
            }
        }
        let mass = weights.iter().sum();
        Self { atoms, weights, mass }
    }

    /// μ ⊗ δ_label.
    pub fn product(mu: &DiscreteMeasure, label: f64) -> Self {
        Self::collect(mu.iter().map(|(x, w)| ((x, label), w)))
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn iter(&self) -> impl Iterator<Item = ((f64, f64), f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn project_x(&self) -> DiscreteMeasure {
        DiscreteMeasure::collect(self.iter().map(|((x, _), w)| (x, w)))
    }

    /// Sorted distinct labels.
    pub fn labels(&self) -> Vec<f64> {
        let mut l: Vec<f64> = self.atoms.iter().map(|a| a.1).collect();
        l.sort_by(f64::total_cmp);
        l.dedup_by(|a, b| num::abs(*a - *b) <= MERGE_TOL);
        l
    }

    pub fn restrict(&self, keep: impl Fn(f64, f64) -> bool) -> Self {
        Self::collect(self.iter().filter(|&((x, u), _)| keep(x, u)))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::collect(self.iter().map(|(a, w)| (a, w * c)))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::collect(self.iter().chain(other.iter()))
    }
}

/// Total variation between lifted measures (half l1 on the union support).
pub fn lifted_total_variation(a: &LiftedMeasure, b: &LiftedMeasure) -> f64 {
    let mut used = alloc::vec![false; b.len()];
    let mut s = 0.0;
    for (pa, wa) in a.iter() {
        let hit = b.atoms.iter().enumerate().position(|(k, pb)| {
            !used[k] && num::abs(pa.0 - pb.0) <= MERGE_TOL && num::abs(pa.1 - pb.1) <= MERGE_TOL
        });
        match hit {
            Some(k) => {
                used[k] = true;
                s += num::abs(wa - b.weights[k]);
            }
            None => s += wa,
        }
    }
    s += b.weights.iter().zip(&used).filter(|(_, &u)| !u).map(|(w, _)| w).sum::<f64>();
    0.5 * s
}

//! Potential functions, irreducible decomposition, the convex-order minimum,
//! Wasserstein projections in convex order and binary martingale kernels.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::lp::{solve_lp, LinearProgram, RowKind, Sense};
use crate::measures::{check_convex_order, default_order_tol, mass_tol, DiscreteMeasure};
use crate::num;
use crate::{Error, Result};

/// Convex piecewise-linear function given by values at sorted breakpoints
/// and the slopes of the two unbounded pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearConvex {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    left_slope: f64,
    right_slope: f64,
}

impl PiecewiseLinearConvex {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>, left_slope: f64, right_slope: f64) -> Result<Self> {
        if breakpoints.len() != values.len() {
            return Err(Error::InvalidArgument("breakpoints and values differ in length".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("breakpoints must be strictly increasing".into()));
        }
        let f = Self { breakpoints, values, left_slope, right_slope };
        if !f.is_convex(1e-9) {
            return Err(Error::InvalidArgument("slopes are not nondecreasing".into()));
        }
        Ok(f)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_slope(&self) -> f64 {
        self.left_slope
    }

    pub fn right_slope(&self) -> f64 {
        self.right_slope
    }

    pub fn eval(&self, y: f64) -> f64 {
        let bp = &self.breakpoints;
        let n = bp.len();
        if n == 0 {
            return 0.0;
        }
        if y <= bp[0] {
            return self.values[0] + self.left_slope * (y - bp[0]);
        }
        if y >= bp[n - 1] {
            return self.values[n - 1] + self.right_slope * (y - bp[n - 1]);
        }
        let k = bp.partition_point(|&b| b <= y);
        let (x0, x1) = (bp[k - 1], bp[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (v1 - v0) * (y - x0) / (x1 - x0)
    }

    /// All slopes from left to right, including the two unbounded pieces.
    pub fn slopes(&self) -> Vec<f64> {
        let mut s = vec![self.left_slope];
        for k in 1..self.breakpoints.len() {
            s.push((self.values[k] - self.values[k - 1]) / (self.breakpoints[k] - self.breakpoints[k - 1]));
        }
        s.push(self.right_slope);
        s
    }

    pub fn is_convex(&self, tol: f64) -> bool {
        self.slopes().windows(2).all(|w| w[1] >= w[0] - tol * (1.0 + num::abs(w[0])))
    }

    /// Half the second distributional derivative: atoms at the kinks with
    /// weight (slope jump)/2. For a potential this recovers the measure.
    pub fn kink_measure(&self) -> DiscreteMeasure {
        let s = self.slopes();
        let scale = num::abs(self.left_slope).max(num::abs(self.right_slope)).max(1.0);
        DiscreteMeasure::collect(
            self.breakpoints
                .iter()
                .enumerate()
                .map(|(k, &x)| (x, (s[k + 1] - s[k]) / 2.0))
                .filter(|&(_, w)| w > 1e-14 * scale),
        )
    }
}

/// u_m(y) = ∫|y - x| m(dx) as an exact piecewise-linear function.
pub fn potential(m: &DiscreteMeasure) -> PiecewiseLinearConvex {
    let bp = m.atoms().to_vec();
    let values = m.potentials_at(&bp);
    PiecewiseLinearConvex { breakpoints: bp, values, left_slope: -m.mass(), right_slope: m.mass() }
}

/// Lower convex hull of points sorted by strictly increasing x (monotone
/// chain; nearly collinear middle points are dropped).
pub(crate) fn lower_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut h: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while h.len() >= 2 {
            let (a, b) = (h[h.len() - 2], h[h.len() - 1]);
            let (dx1, dy1) = (b.0 - a.0, b.1 - a.1);
            let (dx2, dy2) = (p.0 - a.0, p.1 - a.1);
            let cross = dx1 * dy2 - dy1 * dx2;
            let scale = num::abs(dx1 * dy2) + num::abs(dy1 * dx2);
            if cross <= 1e-12 * scale {
                h.pop();
            } else {
                break;
            }
        }
        h.push(p);
    }
    h
}

fn require_same_mass_and_mean(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<()> {
    if num::abs(a.mass() - b.mass()) > mass_tol(a.mass(), b.mass()) * 1e3 {
        return Err(Error::MassMismatch(a.mass(), b.mass()));
    }
    let tol = default_order_tol(a, b);
    if num::abs(a.first_moment() - b.first_moment()) > tol {
        return Err(Error::MeanMismatch(a.first_moment(), b.first_moment()));
    }
    Ok(())
}

/// ρ ∧_c q: the measure whose potential is the lower convex envelope of
/// min(u_ρ, u_q).
pub fn convex_min(rho: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    require_same_mass_and_mean(rho, q)?;
    if rho.is_empty() {
        return Ok(DiscreteMeasure::zero());
    }
    let mut pts: Vec<f64> = rho.atoms().iter().chain(q.atoms()).copied().collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let ur = rho.potentials_at(&pts);
    let uq = q.potentials_at(&pts);
    let mut graph: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for k in 0..pts.len() {
        if k > 0 {
            let (d0, d1) = (ur[k - 1] - uq[k - 1], ur[k] - uq[k]);
            if (d0 < 0.0 && d1 > 0.0) || (d0 > 0.0 && d1 < 0.0) {
                let t = d0 / (d0 - d1);
                let x = pts[k - 1] + t * (pts[k] - pts[k - 1]);
                if x > pts[k - 1] && x < pts[k] {
                    let v = ur[k - 1] + t * (ur[k] - ur[k - 1]);
                    graph.push((x, v));
                }
            }
        }
        graph.push((pts[k], ur[k].min(uq[k])));
    }
    let hull = lower_hull(&graph);
    let mass = rho.mass();
    let f = PiecewiseLinearConvex {
        breakpoints: hull.iter().map(|p| p.0).collect(),
        values: hull.iter().map(|p| p.1).collect(),
        left_slope: -mass,
        right_slope: mass,
    };
    Ok(f.kink_measure())
}

/// One irreducible component: μₙ and νₙ live on the closed interval and
/// μₙ is carried by its interior.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub interval: (f64, f64),
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrreducibleDecomposition {
    pub components: Vec<Component>,
    /// μ restricted to {u_μ = u_ν}; moved by no martingale coupling.
    pub stationary: DiscreteMeasure,
}

impl IrreducibleDecomposition {
    /// (η + Σμₙ, η + Σνₙ).
    pub fn reassemble(&self) -> (DiscreteMeasure, DiscreteMeasure) {
        let mu = DiscreteMeasure::sum(core::iter::once(&self.stationary).chain(self.components.iter().map(|c| &c.mu)));
        let nu = DiscreteMeasure::sum(core::iter::once(&self.stationary).chain(self.components.iter().map(|c| &c.nu)));
        (mu, nu)
    }
}

/// Splits (μ, ν) into the open intervals where u_μ < u_ν plus the part of μ
/// that must stay put.
pub fn irreducible_decomposition(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<IrreducibleDecomposition> {
    let tol = default_order_tol(mu, nu);
    let chk = check_convex_order(mu, nu, tol);
    if !chk.ordered {
        return Err(Error::NotInConvexOrder { witness: chk.witness });
    }
    if mu.is_empty() {
        return Ok(IrreducibleDecomposition { components: Vec::new(), stationary: DiscreteMeasure::zero() });
    }
    let mut pts: Vec<f64> = mu.atoms().iter().chain(nu.atoms()).copied().collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let um = mu.potentials_at(&pts);
    let un = nu.potentials_at(&pts);
    let zero: Vec<bool> = um.iter().zip(&un).map(|(a, b)| b - a <= tol).collect();
    // The difference is linear between atoms and vanishes outside the
    // supports, so components run between consecutive zero points.
    let mut intervals = Vec::new();
    let mut last_zero = 0usize;
    for k in 1..pts.len() {
        if zero[k] {
            if k > last_zero + 1 {
                intervals.push((pts[last_zero], pts[k]));
            }
            last_zero = k;
        }
    }
    let stationary = mu.restrict(|x| pts.binary_search_by(|p| p.total_cmp(&x)).map_or(false, |k| zero[k]));
    let mut nu_left: Vec<(f64, f64)> = nu.iter().collect();
    let mut components = Vec::with_capacity(intervals.len());
    let wtol = 1e-10 * (1.0 + mu.mass());
    for &(a, b) in &intervals {
        let mu_n = mu.restrict(|x| x > a && x < b);
        let nu_in = nu.restrict(|x| x > a && x < b);
        let dm = mu_n.mass() - nu_in.mass();
        let dfm = mu_n.first_moment() - nu_in.first_moment();
        // α + β = dm, αa + βb = dfm
        let beta = (dfm - a * dm) / (b - a);
        let alpha = dm - beta;
        if alpha < -wtol || beta < -wtol {
            return Err(Error::Decomposition(format!(
                "negative endpoint weight on ({a}, {b}): alpha={alpha}, beta={beta}"
            )));
        }
        let (alpha, beta) = (alpha.max(0.0), beta.max(0.0));
        for (x, w) in nu_left.iter_mut() {
            if *x == a {
                *w -= alpha;
            } else if *x == b {
                *w -= beta;
            }
        }
        let nu_n = nu_in.add(&DiscreteMeasure::collect([(a, alpha), (b, beta)]));
        components.push(Component { interval: (a, b), mu: mu_n, nu: nu_n });
    }
    // What is left of ν outside the open intervals must coincide with η.
    for &(x, w) in &nu_left {
        let inside = intervals.iter().any(|&(a, b)| x > a && x < b);
        if inside {
            continue;
        }
        let eta = stationary.weight_at(x, 0.0);
        if num::abs(w - eta) > wtol {
            return Err(Error::Decomposition(format!("residual of nu at {x} is {w}, stationary part has {eta}")));
        }
    }
    Ok(IrreducibleDecomposition { components, stationary })
}

/// W₁-projection of ν onto {η : μ ≤_c η} in closed form.
///
/// With G(t) = ∫₀ᵗ F⁻¹ the integrated quantile, the optimizer has quantile
/// function F_ν⁻¹ + (co(G_μ − G_ν))′ where co is the lower convex envelope
/// on [0, mass]. The result has the mean of μ, dominates μ in convex order
/// and attains inf W₁(·, ν). Masses must agree.
pub fn wasserstein_projection(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    if num::abs(mu.mass() - nu.mass()) > 1e-9 * (1.0 + mu.mass()) {
        return Err(Error::MassMismatch(mu.mass(), nu.mass()));
    }
    if mu.is_empty() {
        return Ok(DiscreteMeasure::zero());
    }
    let (qm, qn) = (mu.quantiles(), nu.quantiles());
    let mass = mu.mass();
    let mut ts: Vec<f64> = vec![0.0];
    ts.extend(qm.cumulative().iter().chain(qn.cumulative()).map(|&t| t.min(mass)));
    ts.push(mass);
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| num::abs(*a - *b) <= 1e-15 * (1.0 + mass));
    *ts.last_mut().unwrap() = mass;
    // φ = G_μ − G_ν at the merged breakpoints; both are linear in between.
    let mut phi = Vec::with_capacity(ts.len());
    let mut acc = 0.0;
    phi.push((0.0, 0.0));
    for k in 1..ts.len() {
        let mid = 0.5 * (ts[k - 1] + ts[k]);
        let slope = qm.quantile(mid).unwrap() - qn.quantile(mid).unwrap();
        acc += slope * (ts[k] - ts[k - 1]);
        phi.push((ts[k], acc));
    }
    let hull = lower_hull(&phi);
    let mut out = Vec::with_capacity(ts.len());
    let mut h = 0;
    for k in 1..ts.len() {
        let mid = 0.5 * (ts[k - 1] + ts[k]);
        while hull[h + 1].0 < mid {
            h += 1;
        }
        let s = (hull[h + 1].1 - hull[h].1) / (hull[h + 1].0 - hull[h].0);
        out.push((qn.quantile(mid).unwrap() + s, ts[k] - ts[k - 1]));
    }
    Ok(DiscreteMeasure::collect(out))
}

/// Supports of both measures plus `refine` uniform points on their hull.
pub fn default_grid(mu: &DiscreteMeasure, nu: &DiscreteMeasure, refine: usize) -> Vec<f64> {
    let mut extra = Vec::new();
    if let (Some(lo), Some(hi)) = (
        mu.min_atom().into_iter().chain(nu.min_atom()).reduce(f64::min),
        mu.max_atom().into_iter().chain(nu.max_atom()).reduce(f64::max),
    ) {
        if refine >= 2 && hi > lo {
            extra.extend((0..refine).map(|k| lo + (hi - lo) * k as f64 / (refine - 1) as f64));
        }
    }
    merge_grid(mu.atoms().iter().chain(nu.atoms()).copied(), extra)
}

/// Sorted union in which a point within 1e-12 of a support atom is
/// replaced by the atom. CDFs are then evaluated exactly at atoms; keeping
/// a rounded neighbour just below an atom would drop its mass.
fn merge_grid(support: impl IntoIterator<Item = f64>, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut sup: Vec<f64> = support.into_iter().collect();
    sup.sort_by(f64::total_cmp);
    sup.dedup_by(|a, b| num::abs(*a - *b) <= 1e-12);
    let near = |x: f64| {
        let k = sup.partition_point(|&s| s < x);
        (k < sup.len() && num::abs(sup[k] - x) <= 1e-12) || (k > 0 && num::abs(x - sup[k - 1]) <= 1e-12)
    };
    let mut g: Vec<f64> = extra.into_iter().filter(|&x| !near(x)).collect();
    g.extend_from_slice(&sup);
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| num::abs(*a - *b) <= 1e-12);
    g
}

/// Grid-restricted 𝒥(μ, ν) as an LP in CDF space:
/// minimize ∫|F_η − F_ν| over η on the grid subject to u_η ≥ u_μ at the grid
/// points, equal mass and the mean of μ. The supports are always added to
/// the grid. Returns the optimizer and the optimal W₁ value.
pub fn convex_order_projection(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    grid: &[f64],
) -> Result<(DiscreteMeasure, f64)> {
    if num::abs(mu.mass() - nu.mass()) > 1e-9 * (1.0 + mu.mass()) {
        return Err(Error::MassMismatch(mu.mass(), nu.mass()));
    }
    if mu.is_empty() {
        return Ok((DiscreteMeasure::zero(), 0.0));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("grid must be finite".into()));
    }
    let g = merge_grid(mu.atoms().iter().chain(nu.atoms()).copied(), grid.iter().copied());
    let n = g.len();
    let qn = nu.quantiles();
    let um = mu.potentials_at(&g);
    // variables: η (n), s⁺ (n-1), s⁻ (n-1)
    let nv = n + 2 * (n - 1);
    let mut lp = LinearProgram::new(Sense::Minimize, nv);
    for i in 0..n - 1 {
        let dg = g[i + 1] - g[i];
        lp.objective[n + i] = dg;
        lp.objective[n + (n - 1) + i] = dg;
        let mut row: Vec<(usize, f64)> = (0..=i).map(|k| (k, 1.0)).collect();
        row.push((n + i, -1.0));
        row.push((n + (n - 1) + i, 1.0));
        lp.add_row(row, RowKind::Eq, qn.cdf(g[i]));
    }
    lp.add_row((0..n).map(|k| (k, 1.0)).collect(), RowKind::Eq, mu.mass());
    lp.add_row((0..n).map(|k| (k, g[k])).collect(), RowKind::Eq, mu.first_moment());
    for j in 0..n {
        lp.add_row((0..n).map(|k| (k, num::abs(g[j] - g[k]))).collect(), RowKind::Ge, um[j]);
    }
    let sol = solve_lp(&lp).require_optimal()?;
    let eta = DiscreteMeasure::collect((0..n).map(|k| (g[k], sol.primal[k])).filter(|&(_, w)| w > 1e-13));
    Ok((eta, sol.objective.max(0.0)))
}

/// B(x, l, r): the law on {l, r} with mean x, or δ_x when l = x or x = r.
pub fn binary_kernel(x: f64, l: f64, r: f64) -> Result<DiscreteMeasure> {
    if !(l <= x && x <= r) {
        return Err(Error::InvalidArgument(format!("need l <= x <= r, got ({x}, {l}, {r})")));
    }
    if l < x && x < r {
        Ok(DiscreteMeasure::collect([(l, (r - x) / (r - l)), (r, (x - l) / (r - l))]))
    } else {
        Ok(DiscreteMeasure::dirac(x))
    }
}

// (left atom, right atom, weight on left) with Diracs as (x, x, 1).
fn binary_parts(x: f64, l: f64, r: f64) -> (f64, f64, f64) {
    if l < x && x < r {
        (l, r, (r - x) / (r - l))
    } else {
        (x, x, 1.0)
    }
}

/// W₁(B(x, yk, zk), B(x, y, z)) in closed form.
pub fn w1_binary(x: f64, y: f64, z: f64, yk: f64, zk: f64) -> Result<f64> {
    if !(y <= x && x <= z && yk <= x && x <= zk) {
        return Err(Error::InvalidArgument(format!(
            "need y <= x <= z and yk <= x <= zk, got x={x}, y={y}, z={z}, yk={yk}, zk={zk}"
        )));
    }
    let (l1, r1, p1) = binary_parts(x, yk, zk);
    let (l2, r2, p2) = binary_parts(x, y, z);
    let lo = p1.min(p2);
    let hi = p1.max(p2);
    Ok(lo * num::abs(l1 - l2)
        + (p2 - p1).max(0.0) * num::abs(r1 - l2)
        + (p1 - p2).max(0.0) * num::abs(l1 - r2)
        + (1.0 - hi) * num::abs(r1 - r2))
}

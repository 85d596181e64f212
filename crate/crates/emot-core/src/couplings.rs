//! Lifted couplings on (x, u, y): disintegration, martingale checks, the
//! kernel-law view, flat and adapted Wasserstein distances, reduction to
//! simple couplings and Hausdorff distances between martingale polytopes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lp::{enumerate_vertices, solve_lp, solve_transport, LinearProgram, RowKind, Sense};
use crate::measures::{transport_line_cost, DiscreteMeasure, LiftedMeasure, MERGE_TOL};
use crate::num;
use crate::{Error, Result};

/// π on (x, u, y) stored as a first marginal on (x, u) and, per atom, a
/// probability kernel over a shared y-support.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCoupling {
    first: LiftedMeasure,
    y_support: Vec<f64>,
    /// Row-major `first.len() x y_support.len()`.
    kernels: Vec<f64>,
    second: DiscreteMeasure,
}

impl DiscreteCoupling {
    /// Rows are renormalized; each must sum to one within 1e-9.
    pub fn new(first: LiftedMeasure, y_support: Vec<f64>, kernels: Vec<f64>) -> Result<Self> {
        let (n, m) = (first.len(), y_support.len());
        if kernels.len() != n * m {
            return Err(Error::InvalidArgument(format!("kernel table has {} entries, expected {}", kernels.len(), n * m)));
        }
        if y_support.windows(2).any(|w| !(w[0] < w[1])) || y_support.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidArgument("y-support must be finite and strictly increasing".into()));
        }
        let mut kernels = kernels;
        for i in 0..n {
            let row = &mut kernels[i * m..(i + 1) * m];
            if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("kernel row {i} has a negative or non-finite entry")));
            }
            let s: f64 = row.iter().sum();
            if num::abs(s - 1.0) > 1e-9 {
                return Err(Error::InvalidArgument(format!("kernel row {i} sums to {s}")));
            }
            // dividing by a sum that is already one up to rounding would
            // drift the last bits and break round trips
            if num::abs(s - 1.0) > 4.0 * f64::EPSILON {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
        Ok(Self::assemble(first, y_support, kernels))
    }

    fn assemble(first: LiftedMeasure, y_support: Vec<f64>, kernels: Vec<f64>) -> Self {
        let m = y_support.len();
        let mut nu = vec![0.0; m];
        for (i, (_, w)) in first.iter().enumerate() {
            for j in 0..m {
                nu[j] += w * kernels[i * m + j];
            }
        }
        let second = DiscreteMeasure::collect(y_support.iter().copied().zip(nu));
        Self { first, y_support, kernels, second }
    }

    /// From a transport plan whose row sums are the first-marginal weights.
    /// Tiny negative entries from LP round-off are clipped.
    pub fn from_plan(first: LiftedMeasure, y_support: Vec<f64>, plan: &[f64]) -> Result<Self> {
        let (n, m) = (first.len(), y_support.len());
        if plan.len() != n * m {
            return Err(Error::InvalidArgument("plan size mismatch".into()));
        }
        let mut kernels = vec![0.0; n * m];
        for (i, (_, w)) in first.iter().enumerate() {
            let row: Vec<f64> = plan[i * m..(i + 1) * m].iter().map(|v| v.max(0.0)).collect();
            let s: f64 = row.iter().sum();
            if s <= 0.0 || num::abs(s - w) > 1e-7 * (1.0 + w) {
                return Err(Error::InvalidArgument(format!("plan row {i} carries {s}, first marginal has {w}")));
            }
            for j in 0..m {
                kernels[i * m + j] = row[j] / s;
            }
        }
        Ok(Self::assemble(first, y_support, kernels))
    }

    /// first ⊗ ν, every kernel equal to ν normalized.
    pub fn product(first: &LiftedMeasure, nu: &DiscreteMeasure) -> Result<Self> {
        let k = nu.normalized()?;
        let row = k.weights().to_vec();
        let kernels = (0..first.len()).flat_map(|_| row.iter().copied()).collect();
        Ok(Self::assemble(first.clone(), k.atoms().to_vec(), kernels))
    }

    pub fn first_marginal(&self) -> &LiftedMeasure {
        &self.first
    }

    pub fn second_marginal(&self) -> &DiscreteMeasure {
        &self.second
    }

    pub fn y_support(&self) -> &[f64] {
        &self.y_support
    }

    pub fn len(&self) -> usize {
        self.first.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.first.mass()
    }

    pub fn kernel_row(&self, i: usize) -> &[f64] {
        let m = self.y_support.len();
        &self.kernels[i * m..(i + 1) * m]
    }

    pub fn kernels(&self) -> &[f64] {
        &self.kernels
    }

    pub fn kernel(&self, i: usize) -> DiscreteMeasure {
        DiscreteMeasure::collect(self.y_support.iter().copied().zip(self.kernel_row(i).iter().copied()))
    }

    /// Nonzero joint weights as (x, u, y, w).
    pub fn joint(&self) -> Vec<(f64, f64, f64, f64)> {
        let mut out = Vec::new();
        for (i, ((x, u), w)) in self.first.iter().enumerate() {
            for (j, &k) in self.kernel_row(i).iter().enumerate() {
                if k > 0.0 {
                    out.push((x, u, self.y_support[j], w * k));
                }
            }
        }
        out
    }

    /// Same coupling with labels mapped through `f`.
    pub fn relabel(&self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let joint: Vec<_> = self.joint().into_iter().map(|(x, u, y, w)| (x, f(x, u), y, w)).collect();
        Ok(disintegrate_with_mass(&joint, self.mass())?.0)
    }

    /// ∫ c(x, u, y) dπ.
    pub fn integrate(&self, c: impl Fn(f64, f64, f64) -> f64) -> f64 {
        self.joint().into_iter().map(|(x, u, y, w)| w * c(x, u, y)).sum()
    }
}

/// Disintegrates a probability table of (x, u, y, weight) entries. Returns
/// the coupling and the number of (x, u) rows dropped for carrying no mass.
pub fn disintegrate(joint: &[(f64, f64, f64, f64)]) -> Result<(DiscreteCoupling, usize)> {
    disintegrate_with_mass(joint, 1.0)
}

/// As [`disintegrate`] for a table of the given total mass.
pub fn disintegrate_with_mass(joint: &[(f64, f64, f64, f64)], mass: f64) -> Result<(DiscreteCoupling, usize)> {
    let mut total = 0.0;
    for &(x, u, y, w) in joint {
        if !(x.is_finite() && u.is_finite() && y.is_finite() && w.is_finite()) || w < 0.0 {
            return Err(Error::InvalidArgument(format!("bad joint entry ({x}, {u}, {y}, {w})")));
        }
        total += w;
    }
    if num::abs(total - mass) > 1e-9 * (1.0 + mass) {
        return Err(Error::InvalidArgument(format!("joint table has total mass {total}, expected {mass}")));
    }
    let mut keys: Vec<(f64, f64)> = joint.iter().map(|e| (e.0, e.1)).collect();
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    keys.dedup();
    let mut ys: Vec<f64> = joint.iter().filter(|e| e.3 > 0.0).map(|e| e.2).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let m = ys.len();
    let mut table = vec![0.0; keys.len() * m];
    let mut row_mass = vec![0.0; keys.len()];
    for &(x, u, y, w) in joint {
        if w <= 0.0 {
            continue;
        }
        let i = keys.binary_search_by(|k| k.0.total_cmp(&x).then(k.1.total_cmp(&u))).unwrap();
        let j = ys.binary_search_by(|v| v.total_cmp(&y)).unwrap();
        table[i * m + j] += w;
        row_mass[i] += w;
    }
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    let mut kernels = Vec::new();
    let mut dropped = 0;
    for (i, &k) in keys.iter().enumerate() {
        if row_mass[i] <= 0.0 {
            dropped += 1;
            continue;
        }
        atoms.push(k);
        weights.push(row_mass[i]);
        kernels.extend(table[i * m..(i + 1) * m].iter().map(|v| v / row_mass[i]));
    }
    let first = LiftedMeasure::new(atoms, weights)?;
    Ok((DiscreteCoupling::assemble(first, ys, kernels), dropped))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleCheck {
    pub ok: bool,
    pub max_deviation: f64,
}

/// max over atoms of |mean(π_{x,u}) − x|.
pub fn check_martingale(c: &DiscreteCoupling, tol: f64) -> MartingaleCheck {
    let mut dev: f64 = 0.0;
    for (i, ((x, _), _)) in c.first.iter().enumerate() {
        let mean: f64 = c.kernel_row(i).iter().zip(&c.y_support).map(|(k, y)| k * y).sum();
        dev = dev.max(num::abs(mean - x));
    }
    MartingaleCheck { ok: dev <= tol, max_deviation: dev }
}

/// The law of (x, u, π_{x,u}) with kernels deduplicated into a table.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedKernelLaw {
    pub atoms: Vec<(f64, f64, usize)>,
    pub weights: Vec<f64>,
    pub y_support: Vec<f64>,
    pub kernels: Vec<Vec<f64>>,
}

impl LiftedKernelLaw {
    pub fn reassemble(&self) -> Result<DiscreteCoupling> {
        let first = LiftedMeasure::new(self.atoms.iter().map(|a| (a.0, a.1)).collect(), self.weights.clone())?;
        if first.len() != self.atoms.len() {
            return Err(Error::InvalidArgument("duplicate (x, u) atoms in kernel law".into()));
        }
        let mut kernels = Vec::with_capacity(first.len() * self.y_support.len());
        for &(x, u) in first.atoms() {
            let a = self.atoms.iter().find(|a| a.0 == x && a.1 == u).unwrap();
            let k = self.kernels.get(a.2).ok_or_else(|| Error::InvalidArgument("kernel id out of range".into()))?;
            kernels.extend_from_slice(k);
        }
        DiscreteCoupling::new(first, self.y_support.clone(), kernels)
    }
}

pub fn lift(c: &DiscreteCoupling) -> LiftedKernelLaw {
    let mut table: Vec<Vec<f64>> = Vec::new();
    let mut atoms = Vec::with_capacity(c.len());
    for (i, ((x, u), _)) in c.first.iter().enumerate() {
        let row = c.kernel_row(i);
        let id = match table.iter().position(|k| k.as_slice() == row) {
            Some(id) => id,
            None => {
                table.push(row.to_vec());
                table.len() - 1
            }
        };
        atoms.push((x, u, id));
    }
    LiftedKernelLaw { atoms, weights: c.first.weights().to_vec(), y_support: c.y_support.clone(), kernels: table }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("p must be finite and >= 1, got {p}")));
    }
    Ok(())
}

/// Flat 𝒲_p on (x, u, y) with cost |Δx|^p + |Δu|^p + |Δy|^p.
pub fn wasserstein_coupling(c1: &DiscreteCoupling, c2: &DiscreteCoupling, p: f64) -> Result<f64> {
    check_p(p)?;
    let a = c1.joint();
    let b = c2.joint();
    let wa: Vec<f64> = a.iter().map(|e| e.3).collect();
    let wb: Vec<f64> = b.iter().map(|e| e.3).collect();
    let (v, _) = solve_transport(&wa, &wb, |i, j| {
        num::dist_p(a[i].0, b[j].0, p) + num::dist_p(a[i].1, b[j].1, p) + num::dist_p(a[i].2, b[j].2, p)
    })?;
    Ok(num::powf(v.max(0.0), 1.0 / p))
}

/// Adapted 𝒲_p: outer transport between first marginals with cost
/// |Δx|^p + |Δu|^p + 𝒲_p^p(kernels).
pub fn adapted_wasserstein(c1: &DiscreteCoupling, c2: &DiscreteCoupling, p: f64) -> Result<f64> {
    check_p(p)?;
    let k1: Vec<DiscreteMeasure> = (0..c1.len()).map(|i| c1.kernel(i)).collect();
    let k2: Vec<DiscreteMeasure> = (0..c2.len()).map(|i| c2.kernel(i)).collect();
    let (a1, a2) = (c1.first.atoms(), c2.first.atoms());
    let (v, _) = solve_transport(c1.first.weights(), c2.first.weights(), |i, j| {
        num::dist_p(a1[i].0, a2[j].0, p) + num::dist_p(a1[i].1, a2[j].1, p) + transport_line_cost(&k1[i], &k2[j], p)
    })?;
    Ok(num::powf(v.max(0.0), 1.0 / p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplifiedCoupling {
    pub coupling: DiscreteCoupling,
    /// Label ranges [lo, hi] of the cells, left to right.
    pub cells: Vec<(f64, f64)>,
    /// AW₁(output, input), computed exactly.
    pub aw1: f64,
    /// Σ w · W₁(π_{x,u}, K_{cell, x}).
    pub spread: f64,
    /// ε + 2 · spread.
    pub bound: f64,
}

/// Greedy label cells of diameter at most ε (left to right over sorted
/// labels), each relabelled to its smallest label; within a cell and for a
/// fixed x the kernels are replaced by their weighted mixture. Martingale
/// property and both marginals of (x, y) are preserved.
pub fn simplify_coupling(c: &DiscreteCoupling, eps: f64) -> Result<SimplifiedCoupling> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be nonnegative, got {eps}")));
    }
    let labels = c.first.labels();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    for &l in &labels {
        match cells.last_mut() {
            Some(cell) if l - cell.0 <= eps => cell.1 = l,
            _ => cells.push((l, l)),
        }
    }
    let cell_of = |u: f64| cells.partition_point(|c| c.1 < u).min(cells.len() - 1);
    let m = c.y_support.len();
    // (x, cell) -> accumulated weight and mixture
    let mut groups: Vec<(f64, usize, f64, Vec<f64>)> = Vec::new();
    let mut group_of = Vec::with_capacity(c.len());
    for (i, ((x, u), w)) in c.first.iter().enumerate() {
        let j = cell_of(u);
        let g = match groups.iter().position(|g| g.0 == x && g.1 == j) {
            Some(g) => g,
            None => {
                groups.push((x, j, 0.0, vec![0.0; m]));
                groups.len() - 1
            }
        };
        groups[g].2 += w;
        for (acc, k) in groups[g].3.iter_mut().zip(c.kernel_row(i)) {
            *acc += w * k;
        }
        group_of.push(g);
    }
    for g in groups.iter_mut() {
        let w = g.2;
        g.3.iter_mut().for_each(|v| *v /= w);
    }
    let mut spread = 0.0;
    for (i, (_, w)) in c.first.iter().enumerate() {
        let g = &groups[group_of[i]];
        let mix = DiscreteMeasure::collect(c.y_support.iter().copied().zip(g.3.iter().copied()));
        spread += w * transport_line_cost(&c.kernel(i), &mix, 1.0);
    }
    let joint: Vec<_> = groups
        .iter()
        .flat_map(|g| {
            let label = cells[g.1].0;
            let w = g.2;
            c.y_support.iter().zip(g.3.clone()).map(move |(&y, k)| (g.0, label, y, w * k))
        })
        .filter(|e| e.3 > 0.0)
        .collect();
    let (coupling, _) = disintegrate_with_mass(&joint, c.mass())?;
    let aw1 = adapted_wasserstein(&coupling, c, 1.0)?;
    Ok(SimplifiedCoupling { coupling, cells, aw1, spread, bound: eps + 2.0 * spread })
}

/// Π_M(μ̄, ν) as LP constraints over π_{ij} = π((x_i, u_i), y_j), index
/// `i * ν.len() + j`; the objective is left at zero.
/// y − x for martingale rows. Displacements below the atom-merge tolerance
/// are rounding noise; row equilibration would otherwise blow them up into
/// a hard constraint.
pub(crate) fn displacement(x: f64, y: f64) -> f64 {
    if num::abs(y - x) <= MERGE_TOL * (1.0 + num::abs(x)) {
        0.0
    } else {
        y - x
    }
}

pub fn martingale_polytope(first: &LiftedMeasure, nu: &DiscreteMeasure) -> LinearProgram {
    let (n, m) = (first.len(), nu.len());
    let mut lp = LinearProgram::new(Sense::Minimize, n * m);
    for (i, (_, w)) in first.iter().enumerate() {
        lp.add_row((0..m).map(|j| (i * m + j, 1.0)).collect(), RowKind::Eq, w);
    }
    for (j, (_, w)) in nu.iter().enumerate() {
        lp.add_row((0..n).map(|i| (i * m + j, 1.0)).collect(), RowKind::Eq, w);
    }
    for (i, ((x, _), _)) in first.iter().enumerate() {
        lp.add_row(nu.atoms().iter().enumerate().map(|(j, &y)| (i * m + j, displacement(x, y))).collect(), RowKind::Eq, 0.0);
    }
    lp
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HausdorffOptions {
    pub p: f64,
    pub max_vertices: usize,
    /// Random-objective vertices per side in sampled mode.
    pub samples: usize,
    pub seed: u64,
}

impl Default for HausdorffOptions {
    fn default() -> Self {
        Self { p: 1.0, max_vertices: 512, samples: 32, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HausdorffEstimate {
    pub lower: f64,
    pub upper: f64,
    /// True when both polytopes were enumerated and lower == upper.
    pub exact: bool,
}

type Side<'a> = (&'a LiftedMeasure, &'a DiscreteMeasure);

// min over b ∈ Π_M(B) of W_p^p(a, b) for a plan `a` on A's grid.
fn distance_to_polytope(a_first: &LiftedMeasure, a_nu: &DiscreteMeasure, plan: &[f64], b: Side<'_>, p: f64) -> Result<f64> {
    let (bf, bn) = b;
    let (ma, mb) = (a_nu.len(), bn.len());
    let src: Vec<(f64, f64, f64, f64)> = a_first
        .iter()
        .enumerate()
        .flat_map(|(i, ((x, u), _))| (0..ma).map(move |j| (i, j, x, u)))
        .filter_map(|(i, j, x, u)| {
            let w = plan[i * ma + j];
            (w > 1e-15).then(|| (x, u, a_nu.atoms()[j], w))
        })
        .collect();
    let nb = bf.len() * mb;
    let ns = src.len();
    // variables γ_{s, l}, l indexes B's grid (i', j')
    let mut lp = LinearProgram::new(Sense::Minimize, ns * nb);
    for (s, &(x, u, y, _)) in src.iter().enumerate() {
        for (i2, ((x2, u2), _)) in bf.iter().enumerate() {
            for (j2, &y2) in bn.atoms().iter().enumerate() {
                lp.objective[s * nb + i2 * mb + j2] =
                    num::dist_p(x, x2, p) + num::dist_p(u, u2, p) + num::dist_p(y, y2, p);
            }
        }
    }
    for (s, e) in src.iter().enumerate() {
        lp.add_row((0..nb).map(|l| (s * nb + l, 1.0)).collect(), RowKind::Eq, e.3);
    }
    let b_cell = |l: usize| (0..ns).map(move |s| (s * nb + l, 1.0));
    for (i2, (_, w)) in bf.iter().enumerate() {
        lp.add_row((0..mb).flat_map(|j2| b_cell(i2 * mb + j2)).collect(), RowKind::Eq, w);
    }
    for (j2, (_, w)) in bn.iter().enumerate() {
        lp.add_row((0..bf.len()).flat_map(|i2| b_cell(i2 * mb + j2)).collect(), RowKind::Eq, w);
    }
    for (i2, ((x2, _), _)) in bf.iter().enumerate() {
        let row = (0..mb)
            .flat_map(|j2| {
                let d = bn.atoms()[j2] - x2;
                (0..ns).map(move |s| (s * nb + i2 * mb + j2, d))
            })
            .collect();
        lp.add_row(row, RowKind::Eq, 0.0);
    }
    Ok(solve_lp(&lp).require_optimal()?.objective.max(0.0))
}

fn sample_vertices(side: Side<'_>, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let base = martingale_polytope(side.0, side.1);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for _ in 0..k {
        let mut lp = base.clone();
        for c in lp.objective.iter_mut() {
            *c = rng.gen::<f64>() * 2.0 - 1.0;
        }
        let v = solve_lp(&lp).require_optimal()?.primal;
        if !out.iter().any(|o| o.iter().zip(&v).all(|(a, b)| num::abs(a - b) <= 1e-9)) {
            out.push(v);
        }
    }
    Ok(out)
}

/// Hausdorff distance (w.r.t. 𝒲_p on (x, u, y)) between Π_M(μ̄, ν) and
/// Π_M(μ̄′, ν′).
///
/// The distance from a point to a polytope is convex, so its supremum over a
/// polytope is attained at a vertex; when both vertex sets can be
/// enumerated the value is exact. Otherwise `lower` comes from sampled
/// vertices and `upper` from the bound
/// OT_p^p(μ̄, μ̄′) + 2^{p−1}(∫|y − c|^p dν + ∫|y − c|^p dν′) with c the common
/// mean, valid for every pair of couplings.
pub fn hausdorff_mot(
    mu_bar: &LiftedMeasure,
    nu: &DiscreteMeasure,
    mu_bar2: &LiftedMeasure,
    nu2: &DiscreteMeasure,
    opts: &HausdorffOptions,
) -> Result<HausdorffEstimate> {
    let p = opts.p;
    check_p(p)?;
    for (a, b) in [(mu_bar, nu), (mu_bar2, nu2)] {
        let chk = crate::measures::check_convex_order(&a.project_x(), b, crate::measures::default_order_tol(&a.project_x(), b));
        if !chk.ordered {
            return Err(Error::NotInConvexOrder { witness: chk.witness });
        }
    }
    let sa = (mu_bar, nu);
    let sb = (mu_bar2, nu2);
    let enumerated = (
        enumerate_vertices(&martingale_polytope(mu_bar, nu), opts.max_vertices),
        enumerate_vertices(&martingale_polytope(mu_bar2, nu2), opts.max_vertices),
    );
    let (va, vb, exact) = match enumerated {
        (Ok(a), Ok(b)) => (a, b, true),
        (Err(Error::TooManyVariables(_) | Error::TooManyVertices(_)), _)
        | (_, Err(Error::TooManyVariables(_) | Error::TooManyVertices(_))) => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            (sample_vertices(sa, opts.samples, &mut rng)?, sample_vertices(sb, opts.samples, &mut rng)?, false)
        }
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    if va.is_empty() || vb.is_empty() {
        return Err(Error::Infeasible);
    }
    let mut worst: f64 = 0.0;
    for v in &va {
        worst = worst.max(distance_to_polytope(mu_bar, nu, v, sb, p)?);
    }
    for v in &vb {
        worst = worst.max(distance_to_polytope(mu_bar2, nu2, v, sa, p)?);
    }
    let lower = num::powf(worst, 1.0 / p);
    if exact {
        return Ok(HausdorffEstimate { lower, upper: lower, exact: true });
    }
    let (a1, a2) = (mu_bar.atoms(), mu_bar2.atoms());
    let (ot, _) = solve_transport(mu_bar.weights(), mu_bar2.weights(), |i, j| {
        num::dist_p(a1[i].0, a2[j].0, p) + num::dist_p(a1[i].1, a2[j].1, p)
    })?;
    let c = 0.5 * (nu.mean()? + nu2.mean()?);
    let spread = nu.integrate(|y| num::dist_p(y, c, p)) + nu2.integrate(|y| num::dist_p(y, c, p));
    let upper = num::powf(ot + num::powf(2.0, p - 1.0) * spread, 1.0 / p).max(lower);
    Ok(HausdorffEstimate { lower, upper, exact: false })
}

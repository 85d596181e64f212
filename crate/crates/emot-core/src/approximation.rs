//! Constructive approximation of a lifted martingale coupling under
//! perturbed marginals: given π ∈ Π_M(μ̄, ν) and (μ̄′, ν′) in convex order,
//! build π′ ∈ Π_M(μ̄′, ν′) close to π in adapted Wasserstein distance.
//!
//! Pipeline: simplify labels → irreducible decomposition → split the new
//! marginals per component and label cell → per component, windowed trim,
//! projection mix and martingale rearrangement of the targets → per piece,
//! an LP fitting kernels to anchored targets → merge.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::convex_order::{binary_kernel, convex_min, irreducible_decomposition, wasserstein_projection};
use crate::couplings::{adapted_wasserstein, disintegrate_with_mass, displacement, simplify_coupling, DiscreteCoupling};
use crate::lp::{solve_lp, solve_transport, LinearProgram, RowKind, Sense};
use crate::measures::{
    check_convex_order, default_order_tol, lifted_total_variation, total_variation, wasserstein_line_tol,
    DiscreteMeasure, LiftedMeasure,
};
use crate::num;
use crate::solvers::{solve_extended_mot, CostSpec};
use crate::{Error, Result};

fn stage(stage: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Approximation { .. } | Error::RearrangementBound { .. } => e,
        other => Error::Approximation { stage, message: format!("{other}") },
    }
}

/// One atom of the source coupling with its kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceAtom {
    pub x: f64,
    pub u: f64,
    pub weight: f64,
    pub kernel: DiscreteMeasure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellPiece {
    /// Label shared by the source atoms of the cell.
    pub label: f64,
    pub source: Vec<SourceAtom>,
    /// Part of μ̄′ transported from this cell.
    pub mu_bar_new: LiftedMeasure,
    /// Image of `mu_bar_new` under the reference coupling of (μ̄′, ν′).
    pub nu_gamma: DiscreteMeasure,
}

impl CellPiece {
    pub fn mu(&self) -> DiscreteMeasure {
        DiscreteMeasure::collect(self.source.iter().map(|a| (a.x, a.weight)))
    }

    pub fn nu(&self) -> DiscreteMeasure {
        DiscreteMeasure::sum(self.source.iter().map(|a| a.kernel.scaled(a.weight)).collect::<Vec<_>>().iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentPiece {
    /// Index into the irreducible components, `None` for the part of μ that
    /// stays put.
    pub component: Option<usize>,
    pub interval: Option<(f64, f64)>,
    pub cells: Vec<CellPiece>,
    /// Σ over cells of `nu_gamma`.
    pub nu_new: DiscreteMeasure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub pieces: Vec<ComponentPiece>,
}

fn source_atoms(pi: &DiscreteCoupling) -> Vec<SourceAtom> {
    pi.first_marginal()
        .iter()
        .enumerate()
        .map(|(i, ((x, u), w))| SourceAtom { x, u, weight: w, kernel: pi.kernel(i) })
        .collect()
}

fn image(first: &LiftedMeasure, gamma: &DiscreteCoupling) -> DiscreteMeasure {
    let atoms = gamma.first_marginal().atoms();
    let ys = gamma.y_support();
    let mut w = vec![0.0; ys.len()];
    for ((x, u), m) in first.iter() {
        let k = atoms
            .binary_search_by(|a| a.0.total_cmp(&x).then(a.1.total_cmp(&u)))
            .or_else(|_| atoms.iter().position(|a| num::abs(a.0 - x) <= 1e-12 && num::abs(a.1 - u) <= 1e-12).ok_or(()))
            .expect("atom of the new first marginal");
        for (acc, p) in w.iter_mut().zip(gamma.kernel_row(k)) {
            *acc += m * p;
        }
    }
    DiscreteMeasure::collect(ys.iter().copied().zip(w))
}

/// Splits (μ̄′, ν′) along the irreducible components of π's marginals and
/// the labels of π: μ̄′ pieces are pushed through a 𝒲₁-optimal coupling of
/// (μ̄, μ̄′), ν′ pieces are their images under the min-∫|y − x| coupling of
/// (μ̄′, ν′).
pub fn split_marginals(pi: &DiscreteCoupling, mu_bar_new: &LiftedMeasure, nu_new: &DiscreteMeasure) -> Result<Split> {
    let mu = pi.first_marginal().project_x();
    let nu = pi.second_marginal();
    let dec = irreducible_decomposition(&mu, nu).map_err(stage("decompose"))?;
    let gamma = solve_extended_mot(mu_bar_new, nu_new, &CostSpec::abs_diff(), Sense::Minimize)
        .map_err(stage("split"))?
        .coupling;
    let src = source_atoms(pi);
    let new_atoms = mu_bar_new.atoms();
    let (_, plan) = solve_transport(pi.first_marginal().weights(), mu_bar_new.weights(), |i, j| {
        num::abs(src[i].x - new_atoms[j].0) + num::abs(src[i].u - new_atoms[j].1)
    })
    .map_err(stage("split"))?;
    let nn = new_atoms.len();
    let labels = pi.first_marginal().labels();
    let comp_of = |x: f64| dec.components.iter().position(|c| x > c.interval.0 && x < c.interval.1);
    let mut keys: Vec<Option<usize>> = dec.components.iter().enumerate().map(|(k, _)| Some(k)).collect();
    keys.push(None);
    let mut pieces = Vec::new();
    for key in keys {
        let mut cells = Vec::new();
        for &label in &labels {
            let idx: Vec<usize> =
                (0..src.len()).filter(|&i| src[i].u == label && comp_of(src[i].x) == key).collect();
            if idx.is_empty() {
                continue;
            }
            let plan = &plan;
            let pushed = LiftedMeasure::collect(
                idx.iter().flat_map(|&i| (0..nn).map(move |j| (new_atoms[j], plan[i * nn + j]))).filter(|e| e.1 > 1e-15),
            );
            let nu_gamma = image(&pushed, &gamma);
            cells.push(CellPiece {
                label,
                source: idx.iter().map(|&i| src[i].clone()).collect(),
                mu_bar_new: pushed,
                nu_gamma,
            });
        }
        if cells.is_empty() {
            continue;
        }
        let nu_new = DiscreteMeasure::sum(cells.iter().map(|c| &c.nu_gamma));
        pieces.push(ComponentPiece {
            component: key,
            interval: key.map(|k| dec.components[k].interval),
            cells,
            nu_new,
        });
    }
    Ok(Split { pieces })
}

/// Window [a^s, b^s] strictly inside (a, b) and containing [lo, hi]:
/// a^s = a + (lo − a)2^{−s}, b^s = b − (b − hi)2^{−s}.
pub fn window(interval: (f64, f64), lo: f64, hi: f64, s: u32) -> (f64, f64) {
    let f = libm::ldexp(1.0, -(s as i32));
    (interval.0 + (lo - interval.0) * f, interval.1 - (interval.1 - hi) * f)
}

/// ρ ∧_c B(mean ρ, a_m, b_m) for a kernel ρ whose mean lies in the window;
/// δ_mean when it lies outside.
pub fn window_trim(rho: &DiscreteMeasure, a_m: f64, b_m: f64) -> Result<DiscreteMeasure> {
    let x = rho.mean()?;
    if x <= a_m || x >= b_m {
        return Ok(DiscreteMeasure::dirac(x).scaled(rho.mass()));
    }
    let q = binary_kernel(x, a_m, b_m)?.scaled(rho.mass());
    convex_min(rho, &q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rearrangement {
    pub coupling: DiscreteCoupling,
    pub cost: f64,
    /// 2 𝒲₁(θ, ν).
    pub bound: f64,
}

/// The martingale coupling of (θ, ν) with least ∫|y − x|; errors if its
/// cost exceeds 2𝒲₁(θ, ν).
pub fn min_cost_martingale_rearrangement(theta: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Rearrangement> {
    let sol = solve_extended_mot(&LiftedMeasure::product(theta, 0.0), nu, &CostSpec::abs_diff(), Sense::Minimize)?;
    let bound = 2.0 * wasserstein_line_tol(theta, nu, 1.0, 1e-9 * (1.0 + theta.mass()))?;
    let cost = sol.value.max(0.0);
    if cost > bound + 1e-9 * (1.0 + bound) {
        return Err(Error::RearrangementBound { cost, bound });
    }
    Ok(Rearrangement { coupling: sol.coupling, cost, bound })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairsOutcome {
    /// ν′_j per cell, in input order.
    pub nu_new: Vec<DiscreteMeasure>,
    /// Mixing weight that passed the Step-2 order check.
    pub eps: f64,
    pub window: (f64, f64),
    pub window_level: u32,
    /// Σ_j 𝒲₁(ν̃_j, ν_j) of the Step-1 trim.
    pub step1_move: f64,
    /// min over breakpoints of u_{ν′} − Σ_j u_{ν̃_j}.
    pub step2_margin: f64,
    pub step3_cost: f64,
    pub step3_bound: f64,
    /// Mixing weights tried before success.
    pub eps_trace: Vec<f64>,
}

const MAX_WINDOW_LEVEL: u32 = 48;
const STEP2_RETRIES: usize = 5;

/// Given the cells of one irreducible component (source atoms with
/// kernels, and μ′_j = proj₁ of each cell's `mu_bar_new`) and the
/// component's new target ν′, returns ν′_j with μ′_j ≤_c ν′_j and
/// Σ_j ν′_j = ν′.
///
/// `window_level` fixes s in the window; by default the smallest s ≥ 1
/// whose trim moves Σ_j ν_j by less than ε/4 is used. When the Step-2
/// order check fails the mixing weight is doubled (capped at 1, where the
/// check holds trivially).
pub fn approximate_pairs(
    cells: &[CellPiece],
    interval: (f64, f64),
    nu_new: &DiscreteMeasure,
    eps: f64,
    window_level: Option<u32>,
) -> Result<PairsOutcome> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1], got {eps}")));
    }
    let mus: Vec<DiscreteMeasure> = cells.iter().map(|c| c.mu()).collect();
    let nus: Vec<DiscreteMeasure> = cells.iter().map(|c| c.nu()).collect();
    let mus_new: Vec<DiscreteMeasure> = cells.iter().map(|c| c.mu_bar_new.project_x()).collect();
    let lo = mus.iter().filter_map(|m| m.min_atom()).fold(f64::INFINITY, f64::min);
    let hi = mus.iter().filter_map(|m| m.max_atom()).fold(f64::NEG_INFINITY, f64::max);
    if !(interval.0 < lo && hi < interval.1) {
        return Err(Error::Approximation { stage: "step1", message: "cell measures must lie inside the component".into() });
    }
    let trim = |s: u32| -> Result<(Vec<DiscreteMeasure>, f64)> {
        let (am, bm) = window(interval, lo, hi, s);
        let mut out = Vec::with_capacity(cells.len());
        let mut moved = 0.0;
        for (c, nu_j) in cells.iter().zip(&nus) {
            let parts: Vec<DiscreteMeasure> = c
                .source
                .iter()
                .map(|a| window_trim(&a.kernel, am, bm).map(|k| k.scaled(a.weight)))
                .collect::<Result<_>>()?;
            let t = DiscreteMeasure::sum(parts.iter());
            moved += wasserstein_line_tol(&t, nu_j, 1.0, 1e-9 * (1.0 + t.mass()))?;
            out.push(t);
        }
        Ok((out, moved))
    };
    let mut eps_cur = eps;
    let mut eps_trace = Vec::new();
    for attempt in 0..=STEP2_RETRIES {
        if attempt == STEP2_RETRIES {
            eps_cur = 1.0;
        }
        eps_trace.push(eps_cur);
        // Step 1
        let (s, (trimmed, moved)) = match window_level {
            Some(s) => (s, trim(s).map_err(stage("step1"))?),
            None => {
                let mut s = 1;
                loop {
                    let r = trim(s).map_err(stage("step1"))?;
                    if r.1 < eps_cur / 4.0 || s >= MAX_WINDOW_LEVEL {
                        break (s, r);
                    }
                    s += 1;
                }
            }
        };
        let (am, bm) = window(interval, lo, hi, s);
        // Step 2
        let mut tilde = Vec::with_capacity(cells.len());
        for ((mu_new_j, nu_t), mu_j) in mus_new.iter().zip(&trimmed).zip(&mus) {
            let inside = mu_new_j.restrict(|x| x >= am && x <= bm);
            let outside = mu_new_j.restrict(|x| x < am || x > bm);
            let mut body = outside.clone();
            if inside.mass() > 0.0 {
                let inside_n = inside.normalized()?;
                let xk = inside_n.mean()?;
                let target = nu_t.scaled(1.0 / mu_j.mass());
                let j = wasserstein_projection(&inside_n, &target).map_err(stage("step2"))?;
                let q = binary_kernel(xk.clamp(am, bm), am, bm)?;
                let hat = convex_min(&j, &q).map_err(stage("step2"))?;
                body = body.add(&hat.scaled(inside.mass()));
            }
            tilde.push(body.scaled(1.0 - eps_cur).add(&mu_new_j.scaled(eps_cur)));
        }
        let theta = DiscreteMeasure::sum(tilde.iter());
        let tol = default_order_tol(&theta, nu_new);
        let chk = check_convex_order(&theta, nu_new, tol);
        let margin = -chk.max_violation;
        if !chk.ordered {
            if eps_cur >= 1.0 {
                break;
            }
            eps_cur = (2.0 * eps_cur).min(1.0);
            continue;
        }
        // Step 3
        let re = match min_cost_martingale_rearrangement(&theta, nu_new) {
            Ok(r) => r,
            Err(e @ Error::RearrangementBound { .. }) => return Err(e),
            Err(_) if eps_cur < 1.0 => {
                eps_cur = (2.0 * eps_cur).min(1.0);
                continue;
            }
            Err(e) => return Err(stage("step3")(e)),
        };
        let chi = &re.coupling;
        let atoms: Vec<f64> = chi.first_marginal().atoms().iter().map(|a| a.0).collect();
        let ys = chi.y_support();
        let mut nu_out = Vec::with_capacity(cells.len());
        for t in &tilde {
            let mut w = vec![0.0; ys.len()];
            for (x, m) in t.iter() {
                let k = nearest(&atoms, x);
                for (acc, p) in w.iter_mut().zip(chi.kernel_row(k)) {
                    *acc += m * p;
                }
            }
            nu_out.push(DiscreteMeasure::collect(ys.iter().copied().zip(w)));
        }
        return Ok(PairsOutcome {
            nu_new: nu_out,
            eps: eps_cur,
            window: (am, bm),
            window_level: s,
            step1_move: moved,
            step2_margin: margin,
            step3_cost: re.cost,
            step3_bound: re.bound,
            eps_trace,
        });
    }
    Err(Error::Approximation {
        stage: "step2",
        message: format!("order check failed for mixing weights {eps_trace:?}"),
    })
}

fn nearest(sorted: &[f64], x: f64) -> usize {
    let k = sorted.partition_point(|&a| a < x);
    if k == sorted.len() || (k > 0 && x - sorted[k - 1] <= sorted[k] - x) {
        k - 1
    } else {
        k
    }
}

/// Kernels for the atoms of `mu_bar_new` with mean x′ and mixture `target`,
/// fitted in CDF-linearized 𝒲₁ to anchored mixtures of the source kernels;
/// the anchor is the monotone coupling of the lexicographically sorted
/// first marginals. Returns the joint table (x, u, y, w) and the fit value.
pub fn reassemble_piece(
    source: &[SourceAtom],
    mu_bar_new: &LiftedMeasure,
    target: &DiscreteMeasure,
) -> Result<(Vec<(f64, f64, f64, f64)>, f64)> {
    let n = mu_bar_new.len();
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let ys = target.atoms();
    let m = ys.len();
    // monotone anchor
    let mut src: Vec<&SourceAtom> = source.iter().collect();
    src.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.u.total_cmp(&b.u)));
    let src_mass: f64 = src.iter().map(|a| a.weight).sum();
    let scale = mu_bar_new.mass() / src_mass;
    let mut grid: Vec<f64> = ys.to_vec();
    for a in &src {
        grid.extend_from_slice(a.kernel.atoms());
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let g = grid.len();
    let mut targets: Vec<Vec<f64>> = vec![vec![0.0; g]; n]; // unnormalized CDF of anchored mixture
    {
        let (mut k, mut rem) = (0usize, src[0].weight * scale);
        for (i, (_, w)) in mu_bar_new.iter().enumerate() {
            let mut need = w;
            while need > 0.0 && k < src.len() {
                let take = need.min(rem);
                let q = src[k].kernel.quantiles();
                for (l, &gl) in grid.iter().enumerate() {
                    targets[i][l] += take * q.cdf(gl) / src[k].kernel.mass();
                }
                need -= take;
                rem -= take;
                if rem <= 1e-15 * (1.0 + src_mass) {
                    k += 1;
                    if k < src.len() {
                        rem = src[k].weight * scale;
                    }
                }
            }
            if need > 1e-12 {
                // round-off left over at the very end: anchor to the last atom
                let a = src.last().unwrap();
                let q = a.kernel.quantiles();
                for (l, &gl) in grid.iter().enumerate() {
                    targets[i][l] += need * q.cdf(gl) / a.kernel.mass();
                }
            }
        }
    }
    let p = |i: usize, j: usize| i * m + j;
    let sp = |i: usize, l: usize| n * m + 2 * (i * (g - 1) + l);
    let nv = n * m + 2 * n * (g - 1);
    let mut lp = LinearProgram::new(Sense::Minimize, nv);
    for (i, ((x, _), w)) in mu_bar_new.iter().enumerate() {
        lp.add_row((0..m).map(|j| (p(i, j), 1.0)).collect(), RowKind::Eq, w);
        lp.add_row((0..m).map(|j| (p(i, j), displacement(x, ys[j]))).collect(), RowKind::Eq, 0.0);
        for l in 0..g - 1 {
            let dg = grid[l + 1] - grid[l];
            lp.objective[sp(i, l)] = dg;
            lp.objective[sp(i, l) + 1] = dg;
            let mut row: Vec<(usize, f64)> = (0..m).filter(|&j| ys[j] <= grid[l]).map(|j| (p(i, j), 1.0)).collect();
            row.push((sp(i, l), -1.0));
            row.push((sp(i, l) + 1, 1.0));
            lp.add_row(row, RowKind::Eq, targets[i][l]);
        }
    }
    for (j, (_, w)) in target.iter().enumerate() {
        lp.add_row((0..n).map(|i| (p(i, j), 1.0)).collect(), RowKind::Eq, w);
    }
    let sol = solve_lp(&lp).require_optimal().map_err(stage("reassembly"))?;
    let mut joint = Vec::with_capacity(n * m);
    for (i, ((x, u), _)) in mu_bar_new.iter().enumerate() {
        for j in 0..m {
            let w = sol.primal[p(i, j)];
            if w > 1e-15 {
                joint.push((x, u, ys[j], w));
            }
        }
    }
    Ok((joint, sol.objective))
}

#[derive(Debug, Clone, Copy)]
pub struct ApproximationOptions {
    /// Label-cell diameter of the simplification and Step-1/Step-2 scale.
    pub eps: f64,
    pub window_level: Option<u32>,
}

impl Default for ApproximationOptions {
    fn default() -> Self {
        Self { eps: 0.05, window_level: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PieceDiagnostics {
    pub component: Option<usize>,
    pub cells: usize,
    pub pairs: Option<PairsOutcome>,
    pub reassembly_fit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationResult {
    pub coupling: DiscreteCoupling,
    /// 𝒜𝒲₁(output, π).
    pub aw1: f64,
    pub simplify_aw1: f64,
    pub simplify_bound: f64,
    pub pieces: Vec<PieceDiagnostics>,
    /// Largest marginal error of the output (TV on atoms).
    pub marginal_error: f64,
    pub identity: bool,
}

/// π′ ∈ Π_M(μ̄′, ν′) close to π; see the module docs for the stages.
pub fn approximate_coupling(
    pi: &DiscreteCoupling,
    mu_bar_new: &LiftedMeasure,
    nu_new: &DiscreteMeasure,
    opts: &ApproximationOptions,
) -> Result<ApproximationResult> {
    let eps = opts.eps;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if lifted_total_variation(pi.first_marginal(), mu_bar_new) <= 1e-14 && total_variation(pi.second_marginal(), nu_new) <= 1e-14
    {
        return Ok(ApproximationResult {
            coupling: pi.clone(),
            aw1: 0.0,
            simplify_aw1: 0.0,
            simplify_bound: 0.0,
            pieces: Vec::new(),
            marginal_error: 0.0,
            identity: true,
        });
    }
    let mu_new = mu_bar_new.project_x();
    let chk = check_convex_order(&mu_new, nu_new, default_order_tol(&mu_new, nu_new));
    if !chk.ordered {
        return Err(Error::NotInConvexOrder { witness: chk.witness });
    }
    let simple = simplify_coupling(pi, eps).map_err(stage("simplify"))?;
    let split = split_marginals(&simple.coupling, mu_bar_new, nu_new)?;
    let mix = eps.min(1.0);
    let mut joint = Vec::new();
    let mut diags = Vec::new();
    for piece in &split.pieces {
        let (targets, pairs) = match piece.interval {
            Some(iv) => {
                let out = approximate_pairs(&piece.cells, iv, &piece.nu_new, mix, opts.window_level)?;
                (out.nu_new.clone(), Some(out))
            }
            None => (piece.cells.iter().map(|c| c.nu_gamma.clone()).collect(), None),
        };
        let mut fit = 0.0;
        for (cell, target) in piece.cells.iter().zip(&targets) {
            let (j, f) = reassemble_piece(&cell.source, &cell.mu_bar_new, target)?;
            joint.extend(j);
            fit += f;
        }
        diags.push(PieceDiagnostics { component: piece.component, cells: piece.cells.len(), pairs, reassembly_fit: fit });
    }
    let total: f64 = joint.iter().map(|e| e.3).sum();
    let (coupling, _) = disintegrate_with_mass(&joint, total).map_err(stage("merge"))?;
    let marginal_error = lifted_total_variation(coupling.first_marginal(), mu_bar_new)
        .max(total_variation(coupling.second_marginal(), nu_new));
    let aw1 = adapted_wasserstein(&coupling, pi, 1.0).map_err(stage("merge"))?;
    Ok(ApproximationResult {
        coupling,
        aw1,
        simplify_aw1: simple.aw1,
        simplify_bound: simple.bound,
        pieces: diags,
        marginal_error,
        identity: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::couplings::{check_martingale, disintegrate};
    use crate::measures::wasserstein_line;
    use crate::solvers::solve_mot;

    fn m(p: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::from_pairs(p).unwrap()
    }

    fn f1() -> DiscreteCoupling {
        disintegrate(&[(-1.0, 0.0, -2.0, 0.375), (-1.0, 0.0, 2.0, 0.125), (1.0, 0.0, -2.0, 0.125), (1.0, 0.0, 2.0, 0.375)])
            .unwrap()
            .0
    }

    #[test]
    fn rearrangement_examples() {
        let nu = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        let r = min_cost_martingale_rearrangement(&nu, &nu).unwrap();
        assert!(r.cost.abs() < 1e-12);
        let r = min_cost_martingale_rearrangement(&DiscreteMeasure::dirac(0.0), &nu).unwrap();
        assert!((r.cost - 1.0).abs() < 1e-12);
        assert!((r.bound - 2.0).abs() < 1e-12);
    }

    #[test]
    fn window_trim_shrinks_to_identity() {
        let rho = m(&[(-2.0, 0.25), (0.0, 0.25), (2.0, 0.5)]);
        let mean = rho.mean().unwrap();
        let mut prev = f64::INFINITY;
        for s in 1..30 {
            let (a, b) = window((-2.0, 2.0), mean, mean, s);
            let t = window_trim(&rho, a, b).unwrap();
            let w = wasserstein_line(&t, &rho, 1.0).unwrap();
            assert!(w <= prev + 1e-12);
            prev = w;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn split_identity() {
        let c = f1();
        let split = split_marginals(&c, c.first_marginal(), c.second_marginal()).unwrap();
        assert_eq!(split.pieces.len(), 1);
        let p = &split.pieces[0];
        assert_eq!(p.interval, Some((-2.0, 2.0)));
        assert!(p.nu_new.approx_eq(c.second_marginal(), 1e-12));
        assert!(lifted_total_variation(&p.cells[0].mu_bar_new, c.first_marginal()) < 1e-12);
    }

    #[test]
    fn pairs_single_cell_gets_full_target() {
        let c = f1();
        let mu_bar = LiftedMeasure::product(&m(&[(-0.9, 0.5), (1.1, 0.5)]), 0.0);
        let nu = m(&[(-2.1, 0.5), (2.3, 0.5)]);
        let split = split_marginals(&c, &mu_bar, &nu).unwrap();
        let p = &split.pieces[0];
        let out = approximate_pairs(&p.cells, p.interval.unwrap(), &p.nu_new, 0.1, None).unwrap();
        assert_eq!(out.nu_new.len(), 1);
        assert!(out.nu_new[0].approx_eq(&nu, 1e-10));
        assert!(out.step3_cost <= out.step3_bound + 1e-12);
    }

    #[test]
    fn identity_short_circuit() {
        let c = f1();
        let r = approximate_coupling(&c, c.first_marginal(), c.second_marginal(), &ApproximationOptions::default()).unwrap();
        assert!(r.identity);
        assert_eq!(r.coupling, c);
        assert_eq!(r.aw1, 0.0);
    }

    #[test]
    fn dirac_first_marginal() {
        let nu = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        let first = LiftedMeasure::product(&DiscreteMeasure::dirac(0.0), 0.3);
        let c = DiscreteCoupling::product(&first, &nu).unwrap();
        let nu2 = m(&[(-1.5, 0.25), (0.0, 0.25), (0.75, 0.5)]);
        let r = approximate_coupling(&c, &first, &nu2, &ApproximationOptions { eps: 0.1, window_level: None }).unwrap();
        assert!(r.coupling.kernel(0).approx_eq(&nu2, 1e-10));
        assert!((r.aw1 - wasserstein_line(&nu, &nu2, 1.0).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn f1_shift_keeps_marginals_and_stays_close() {
        let c = f1();
        let d = 0.05;
        let nu_raw = c.second_marginal().map_atoms(|y| y + d);
        let mu = c.first_marginal().project_x();
        let nu2 = wasserstein_projection(&mu, &nu_raw).unwrap();
        let r = approximate_coupling(&c, c.first_marginal(), &nu2, &ApproximationOptions { eps: d, window_level: None }).unwrap();
        assert!(r.marginal_error <= 1e-9);
        assert!(check_martingale(&r.coupling, 1e-9).ok);
        assert!(r.aw1 <= 10.0 * d, "aw1 {}", r.aw1);
        let forced = solve_mot(&mu, &nu2, &CostSpec::abs_diff(), Sense::Minimize).unwrap().coupling;
        assert!(adapted_wasserstein(&r.coupling, &forced, 1.0).unwrap() < 1e-9);
    }

    #[test]
    fn two_component_perturbation() {
        let mu = m(&[(-2.0, 0.5), (2.0, 0.5)]);
        let nu = m(&[(-3.0, 0.25), (-1.0, 0.25), (1.0, 0.25), (3.0, 0.25)]);
        let c = solve_mot(&mu, &nu, &CostSpec::abs_diff(), Sense::Minimize).unwrap().coupling;
        let mu2 = m(&[(-2.01, 0.5), (2.02, 0.5)]);
        let nu_raw = m(&[(-3.0, 0.25), (-0.98, 0.25), (1.01, 0.25), (3.02, 0.25)]);
        let nu2 = wasserstein_projection(&mu2, &nu_raw).unwrap();
        let r = approximate_coupling(&c, &LiftedMeasure::product(&mu2, 0.0), &nu2, &ApproximationOptions { eps: 0.02, window_level: None })
            .unwrap();
        assert!(r.marginal_error <= 1e-9);
        assert!(check_martingale(&r.coupling, 1e-9).ok);
        assert!(r.aw1 < 0.2, "{}", r.aw1);
    }
}

//! LP formulations: MOT, lifted MOT, convex weak MOT by Frank–Wolfe,
//! American option bounds, the VIX subreplication sandwich and shadow
//! couplings with barrier extraction.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::couplings::{disintegrate_with_mass, displacement, martingale_polytope, DiscreteCoupling};
use crate::lp::{solve_lp, LinearProgram, LpSolution, RowKind, Sense};
use crate::measures::{check_convex_order, default_order_tol, DiscreteMeasure, LiftedMeasure};
use crate::num;
use crate::{Error, Result};

type CostFn = Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// A cost c(x, u, y), either tabulated on a grid or given by a closure.
///
/// Growth conditions are the caller's responsibility; on finite supports
/// every finite cost is admissible.
pub enum CostSpec {
    /// Entries (x, u, y, value); lookups are exact on the stored keys.
    Tabulated(Vec<(f64, f64, f64, f64)>),
    Function { name: String, f: CostFn },
}

impl fmt::Debug for CostSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostSpec::Tabulated(t) => write!(f, "Tabulated({} entries)", t.len()),
            CostSpec::Function { name, .. } => write!(f, "Function({name})"),
        }
    }
}

impl CostSpec {
    pub fn from_fn(name: &str, f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        CostSpec::Function { name: name.into(), f: Box::new(f) }
    }

    pub fn tabulated(mut entries: Vec<(f64, f64, f64, f64)>) -> Result<Self> {
        if entries.iter().any(|e| !(e.0.is_finite() && e.1.is_finite() && e.2.is_finite() && e.3.is_finite())) {
            return Err(Error::InvalidArgument("tabulated cost must be finite".into()));
        }
        entries.sort_by(|a, b| key_cmp((a.0, a.1, a.2), (b.0, b.1, b.2)));
        Ok(CostSpec::Tabulated(entries))
    }

    /// |y − x|
    pub fn abs_diff() -> Self {
        Self::from_fn("abs_diff", |x, _, y| num::abs(y - x))
    }

    /// (y − x)²
    pub fn squared_diff() -> Self {
        Self::from_fn("squared_diff", |x, _, y| (y - x) * (y - x))
    }

    /// y²
    pub fn y_squared() -> Self {
        Self::from_fn("y_squared", |_, _, y| y * y)
    }

    /// u · y
    pub fn u_times_y() -> Self {
        Self::from_fn("u_times_y", |_, u, y| u * y)
    }

    /// max(y − x, 0)
    pub fn call_spread() -> Self {
        Self::from_fn("call_spread", |x, _, y| (y - x).max(0.0))
    }

    /// (1 − u)√(1 + y²), the lifted shadow cost.
    pub fn shadow() -> Self {
        Self::from_fn("shadow", |_, u, y| (1.0 - u) * num::sqrt(1.0 + y * y))
    }

    /// Built-in costs by name.
    pub fn named(name: &str) -> Option<Self> {
        Some(match name {
            "abs_diff" | "abs" => Self::abs_diff(),
            "squared_diff" => Self::squared_diff(),
            "y_squared" | "y2" => Self::y_squared(),
            "u_times_y" | "uy" => Self::u_times_y(),
            "call_spread" => Self::call_spread(),
            "shadow" => Self::shadow(),
            _ => return None,
        })
    }

    pub fn eval(&self, x: f64, u: f64, y: f64) -> Result<f64> {
        match self {
            CostSpec::Function { f, .. } => Ok(f(x, u, y)),
            CostSpec::Tabulated(t) => t
                .binary_search_by(|e| key_cmp((e.0, e.1, e.2), (x, u, y)))
                .map(|k| t[k].3)
                .map_err(|_| Error::InvalidArgument(format!("tabulated cost has no entry at ({x}, {u}, {y})"))),
        }
    }
}

fn key_cmp(a: (f64, f64, f64), b: (f64, f64, f64)) -> core::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    pub value: f64,
    pub coupling: DiscreteCoupling,
    pub lp: LpSolution,
}

fn require_order(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    let chk = check_convex_order(mu, nu, default_order_tol(mu, nu));
    if chk.ordered {
        Ok(())
    } else {
        Err(Error::NotInConvexOrder { witness: chk.witness })
    }
}

/// Classical MOT over Π_M(μ, ν).
pub fn solve_mot(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostSpec, sense: Sense) -> Result<TransportSolution> {
    solve_extended_mot(&LiftedMeasure::product(mu, 0.0), nu, cost, sense)
}

/// MOT over Π_M(μ̄, ν): every kernel π_{x,u} has mean x.
pub fn solve_extended_mot(
    mu_bar: &LiftedMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    sense: Sense,
) -> Result<TransportSolution> {
    require_order(&mu_bar.project_x(), nu)?;
    let mut lp = martingale_polytope(mu_bar, nu);
    lp.sense = sense;
    let m = nu.len();
    for (i, ((x, u), _)) in mu_bar.iter().enumerate() {
        for (j, &y) in nu.atoms().iter().enumerate() {
            lp.objective[i * m + j] = cost.eval(x, u, y)?;
        }
    }
    let sol = solve_lp(&lp).require_optimal()?;
    let coupling = DiscreteCoupling::from_plan(mu_bar.clone(), nu.atoms().to_vec(), &sol.primal)?;
    Ok(TransportSolution { value: sol.objective, coupling, lp: sol })
}

/// A cost C(x, u, ρ) of the kernel ρ = Σ_j p_j δ_{y_j}, with its gradient
/// in the weights p.
pub trait KernelCost {
    fn value(&self, x: f64, u: f64, ys: &[f64], probs: &[f64]) -> Result<f64>;
    fn gradient(&self, x: f64, u: f64, ys: &[f64], probs: &[f64]) -> Result<Vec<f64>>;
}

/// C(x, u, ρ) = ∫ c(x, u, y) ρ(dy).
#[derive(Debug)]
pub struct LinearKernelCost(pub CostSpec);

impl KernelCost for LinearKernelCost {
    fn value(&self, x: f64, u: f64, ys: &[f64], probs: &[f64]) -> Result<f64> {
        let mut s = 0.0;
        for (&y, &p) in ys.iter().zip(probs) {
            s += p * self.0.eval(x, u, y)?;
        }
        Ok(s)
    }

    fn gradient(&self, x: f64, u: f64, ys: &[f64], _probs: &[f64]) -> Result<Vec<f64>> {
        ys.iter().map(|&y| self.0.eval(x, u, y)).collect()
    }
}

/// C(x, u, ρ) = (∫|y| ρ(dy))².
#[derive(Debug, Clone, Copy, Default)]
pub struct AbsMomentSquared;

impl KernelCost for AbsMomentSquared {
    fn value(&self, _x: f64, _u: f64, ys: &[f64], probs: &[f64]) -> Result<f64> {
        let m: f64 = ys.iter().zip(probs).map(|(y, p)| p * num::abs(*y)).sum();
        Ok(m * m)
    }

    fn gradient(&self, _x: f64, _u: f64, ys: &[f64], probs: &[f64]) -> Result<Vec<f64>> {
        let m: f64 = ys.iter().zip(probs).map(|(y, p)| p * num::abs(*y)).sum();
        Ok(ys.iter().map(|y| 2.0 * m * num::abs(*y)).collect())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FrankWolfeOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Skip the finite-difference gradient check.
    pub skip_gradient_check: bool,
}

impl Default for FrankWolfeOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iterations: 500, skip_gradient_check: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmotSolution {
    pub value: f64,
    pub coupling: DiscreteCoupling,
    pub fw_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct WmotProblem<'a, C: KernelCost + ?Sized> {
    first: &'a LiftedMeasure,
    ys: &'a [f64],
    cost: &'a C,
    base: LinearProgram,
}

impl<'a, C: KernelCost + ?Sized> WmotProblem<'a, C> {
    fn m(&self) -> usize {
        self.ys.len()
    }

    fn objective(&self, plan: &[f64]) -> Result<f64> {
        let m = self.m();
        let mut s = 0.0;
        for (i, ((x, u), w)) in self.first.iter().enumerate() {
            let row: Vec<f64> = plan[i * m..(i + 1) * m].iter().map(|v| v / w).collect();
            s += w * self.cost.value(x, u, self.ys, &row)?;
        }
        Ok(s)
    }

    fn gradient(&self, plan: &[f64]) -> Result<Vec<f64>> {
        let m = self.m();
        let mut g = Vec::with_capacity(plan.len());
        for (i, ((x, u), w)) in self.first.iter().enumerate() {
            let row: Vec<f64> = plan[i * m..(i + 1) * m].iter().map(|v| v / w).collect();
            g.extend(self.cost.gradient(x, u, self.ys, &row)?);
        }
        Ok(g)
    }

    fn lmo(&self, g: &[f64]) -> Result<Vec<f64>> {
        let mut lp = self.base.clone();
        lp.objective.copy_from_slice(g);
        Ok(solve_lp(&lp).require_optimal()?.primal.into_iter().map(|v| v.max(0.0)).collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(x: &[f64], g: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + g * b).collect()
}

// Golden-section minimization of a convex scalar function on [0, hi].
fn golden_section(f: impl Fn(f64) -> Result<f64>, hi: f64, tol: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (num::sqrt(5.0) - 1.0);
    let (mut a, mut b) = (0.0, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    let mut best = (0.5 * (a + b), f(0.5 * (a + b))?);
    for t in [0.0, hi] {
        let v = f(t)?;
        if v < best.1 {
            best = (t, v);
        }
    }
    Ok(best)
}

/// min over Π_M(μ̄, ν) of Σ μ̄(x, u) C(x, u, π_{x,u}) for convex C, by
/// away-step Frank–Wolfe with exact line search. The linear minimization
/// oracle is the lifted MOT LP with the linearized cost.
pub fn solve_wmot_fw<C: KernelCost + ?Sized>(
    mu_bar: &LiftedMeasure,
    nu: &DiscreteMeasure,
    cost: &C,
    opts: &FrankWolfeOptions,
) -> Result<WmotSolution> {
    require_order(&mu_bar.project_x(), nu)?;
    let prob = WmotProblem { first: mu_bar, ys: nu.atoms(), cost, base: martingale_polytope(mu_bar, nu) };
    let m = nu.len();
    let nu_prob = nu.normalized()?;
    let reference: Vec<f64> =
        mu_bar.weights().iter().flat_map(|&w| nu_prob.weights().iter().map(move |p| w * p)).collect();
    let start = prob.lmo(&prob.gradient(&reference)?)?;
    let mut active: Vec<(Vec<f64>, f64)> = vec![(start.clone(), 1.0)];
    let mut plan = start;
    let mut value = prob.objective(&plan)?;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let same = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| num::abs(x - y) <= 1e-12);
    while iterations < opts.max_iterations {
        iterations += 1;
        let g = prob.gradient(&plan)?;
        if iterations == 1 && !opts.skip_gradient_check {
            // Directional derivative toward uniform kernels, or toward ν when
            // the plan already is uniform.
            let uniform: Vec<f64> = mu_bar.weights().iter().flat_map(|&w| (0..m).map(move |_| w / m as f64)).collect();
            for target in [&uniform, &reference] {
                let d: Vec<f64> = target.iter().zip(&plan).map(|(r, p)| r - p).collect();
                if d.iter().all(|v| num::abs(*v) <= 1e-12) {
                    continue;
                }
                let h = 1e-7;
                let numeric = (prob.objective(&axpy(&plan, h, &d))? - value) / h;
                let analytic = dot(&g, &d);
                if num::abs(numeric - analytic) > 1e-4 * (1.0 + num::abs(analytic)) {
                    return Err(Error::GradientCheck { analytic, numeric });
                }
                break;
            }
        }
        let s = prob.lmo(&g)?;
        let gp = dot(&g, &plan);
        gap = (gp - dot(&g, &s)).max(0.0);
        if gap <= opts.tol {
            break;
        }
        let (ai, away_gap) = active
            .iter()
            .enumerate()
            .map(|(k, (v, _))| (k, dot(&g, v) - gp))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let fw_step = gap >= away_gap || active.len() == 1;
        let (d, gmax): (Vec<f64>, f64) = if fw_step {
            (s.iter().zip(&plan).map(|(a, b)| a - b).collect(), 1.0)
        } else {
            let (v, alpha) = &active[ai];
            (plan.iter().zip(v).map(|(a, b)| a - b).collect(), alpha / (1.0 - alpha))
        };
        let (mut gamma, mut new_value) = golden_section(|t| prob.objective(&axpy(&plan, t, &d)), gmax, 1e-10)?;
        if !(new_value <= value) {
            gamma = (2.0 / (iterations as f64 + 2.0)).min(gmax);
            new_value = prob.objective(&axpy(&plan, gamma, &d))?;
        }
        if fw_step {
            for (_, a) in active.iter_mut() {
                *a *= 1.0 - gamma;
            }
            match active.iter().position(|(v, _)| same(v, &s)) {
                Some(k) => active[k].1 += gamma,
                None => active.push((s, gamma)),
            }
        } else {
            for (_, a) in active.iter_mut() {
                *a *= 1.0 + gamma;
            }
            active[ai].1 -= gamma;
        }
        active.retain(|(_, a)| *a > 1e-14);
        plan = axpy(&plan, gamma, &d).into_iter().map(|v| v.max(0.0)).collect();
        value = new_value;
    }
    let coupling = DiscreteCoupling::from_plan(mu_bar.clone(), nu.atoms().to_vec(), &plan)?;
    Ok(WmotSolution { value, coupling, fw_gap: gap, iterations, converged: gap <= opts.tol })
}

pub const EXERCISE: f64 = 1.0;
pub const CONTINUE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AmericanSolution {
    pub value: f64,
    /// Lifted coupling with label 1 = exercise at time 1, 2 = continue.
    pub coupling: DiscreteCoupling,
    pub exercise_mass: f64,
    pub continue_mass: f64,
}

/// Robust American price: sup over martingale couplings split into an
/// exercise branch paying Φ₁(x) and a continuation branch paying Φ₂(x, y).
pub fn price_american(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    phi1: impl Fn(f64) -> f64,
    phi2: impl Fn(f64, f64) -> f64,
) -> Result<AmericanSolution> {
    require_order(mu, nu)?;
    let (n, m) = (mu.len(), nu.len());
    let idx = |b: usize, i: usize, j: usize| (b * n + i) * m + j;
    let mut lp = LinearProgram::new(Sense::Maximize, 2 * n * m);
    for (i, &x) in mu.atoms().iter().enumerate() {
        for (j, &y) in nu.atoms().iter().enumerate() {
            lp.objective[idx(0, i, j)] = phi1(x);
            lp.objective[idx(1, i, j)] = phi2(x, y);
        }
    }
    for (i, (_, w)) in mu.iter().enumerate() {
        lp.add_row((0..2).flat_map(|b| (0..m).map(move |j| (idx(b, i, j), 1.0))).collect(), RowKind::Eq, w);
    }
    for (j, (_, w)) in nu.iter().enumerate() {
        lp.add_row((0..2).flat_map(|b| (0..n).map(move |i| (idx(b, i, j), 1.0))).collect(), RowKind::Eq, w);
    }
    for b in 0..2 {
        for (i, &x) in mu.atoms().iter().enumerate() {
            lp.add_row(nu.atoms().iter().enumerate().map(|(j, &y)| (idx(b, i, j), displacement(x, y))).collect(), RowKind::Eq, 0.0);
        }
    }
    let sol = solve_lp(&lp).require_optimal()?;
    let mut joint = Vec::new();
    let (mut ex, mut co) = (0.0, 0.0);
    for b in 0..2 {
        for (i, &x) in mu.atoms().iter().enumerate() {
            for (j, &y) in nu.atoms().iter().enumerate() {
                let w = sol.primal[idx(b, i, j)];
                if w > 1e-15 {
                    joint.push((x, if b == 0 { EXERCISE } else { CONTINUE }, y, w));
                    if b == 0 {
                        ex += w;
                    } else {
                        co += w;
                    }
                }
            }
        }
    }
    let total: f64 = joint.iter().map(|e| e.3).sum();
    let (coupling, _) = disintegrate_with_mass(&joint, total)?;
    Ok(AmericanSolution { value: sol.objective, coupling, exercise_mass: ex, continue_mass: co })
}

/// ℓ_x(y) = (2/τ) ln(x / y).
pub fn vix_ell(x: f64, y: f64, tau: f64) -> f64 {
    2.0 / tau * num::ln(x / y)
}

fn vix_check(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if mu.atoms().iter().chain(nu.atoms()).any(|&a| a <= 0.0) {
        return Err(Error::InvalidArgument("VIX marginals need strictly positive atoms".into()));
    }
    require_order(mu, nu)
}

/// Uniform edges 0 = e₀ < … < e_B = √(max ℓ⁺) over the supports.
pub fn vix_bin_edges(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tau: f64, bins: usize) -> Vec<f64> {
    let mut top: f64 = 0.0;
    for &x in mu.atoms() {
        for &y in nu.atoms() {
            top = top.max(vix_ell(x, y, tau));
        }
    }
    let top = num::sqrt(top);
    (0..=bins).map(|k| top * k as f64 / bins as f64).collect()
}

// Bin LP over π(x, b, y): marginals, per-(x, b) martingale and moment
// interval e_b² ≤ ∫ℓ_x dπ_{x,b} / mass ≤ e_{b+1}².
fn vix_bin_lp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tau: f64, edges: &[f64], upper: bool) -> LinearProgram {
    let (n, m, nb) = (mu.len(), nu.len(), edges.len() - 1);
    let idx = |i: usize, b: usize, j: usize| (i * nb + b) * m + j;
    let mut lp = LinearProgram::new(Sense::Minimize, n * nb * m);
    for i in 0..n {
        for b in 0..nb {
            for j in 0..m {
                lp.objective[idx(i, b, j)] = if upper { edges[b + 1] } else { edges[b] };
            }
        }
    }
    for (i, (_, w)) in mu.iter().enumerate() {
        lp.add_row((0..nb).flat_map(|b| (0..m).map(move |j| (idx(i, b, j), 1.0))).collect(), RowKind::Eq, w);
    }
    for (j, (_, w)) in nu.iter().enumerate() {
        lp.add_row((0..n).flat_map(|i| (0..nb).map(move |b| (idx(i, b, j), 1.0))).collect(), RowKind::Eq, w);
    }
    for (i, &x) in mu.atoms().iter().enumerate() {
        for b in 0..nb {
            let ys = nu.atoms();
            lp.add_row((0..m).map(|j| (idx(i, b, j), displacement(x, ys[j]))).collect(), RowKind::Eq, 0.0);
            let lo = edges[b] * edges[b];
            let hi = edges[b + 1] * edges[b + 1];
            lp.add_row((0..m).map(|j| (idx(i, b, j), vix_ell(x, ys[j], tau) - lo)).collect(), RowKind::Ge, 0.0);
            lp.add_row((0..m).map(|j| (idx(i, b, j), hi - vix_ell(x, ys[j], tau))).collect(), RowKind::Ge, 0.0);
        }
    }
    lp
}

#[derive(Debug, Clone, PartialEq)]
pub struct VixDual {
    pub d_lo: f64,
    pub d_hi: f64,
    pub edges: Vec<f64>,
    /// Admissible coupling from the lower LP, labelled by u = √(∫ℓ_x dπ_{x,u}).
    pub coupling: DiscreteCoupling,
}

/// Two-sided bounds d_lo ≤ D_sub ≤ d_hi on the VIX subreplication dual of
/// the discrete instance, from moment-interval binning of u.
pub fn vix_dual_lp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tau: f64, bins: usize) -> Result<VixDual> {
    vix_check(mu, nu, tau)?;
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be positive".into()));
    }
    let edges = vix_bin_edges(mu, nu, tau, bins);
    let lo = solve_lp(&vix_bin_lp(mu, nu, tau, &edges, false)).require_optimal()?;
    let hi = solve_lp(&vix_bin_lp(mu, nu, tau, &edges, true)).require_optimal()?;
    let (m, nb) = (nu.len(), bins);
    let mut joint = Vec::new();
    for (i, &x) in mu.atoms().iter().enumerate() {
        for b in 0..nb {
            let cell = &lo.primal[(i * nb + b) * m..(i * nb + b + 1) * m];
            let mass: f64 = cell.iter().map(|v| v.max(0.0)).sum();
            if mass <= 1e-14 {
                continue;
            }
            let moment: f64 =
                cell.iter().zip(nu.atoms()).map(|(w, &y)| w.max(0.0) * vix_ell(x, y, tau)).sum::<f64>() / mass;
            let u = num::sqrt(moment.max(0.0));
            for (j, &y) in nu.atoms().iter().enumerate() {
                if cell[j] > 1e-15 {
                    joint.push((x, u, y, cell[j]));
                }
            }
        }
    }
    let total: f64 = joint.iter().map(|e| e.3).sum();
    let (coupling, _) = disintegrate_with_mass(&joint, total)?;
    Ok(VixDual { d_lo: lo.objective, d_hi: hi.objective, edges, coupling })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VixPrimal {
    pub p_value: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    /// ΔS per (x, bin), row-major.
    pub delta_s: Vec<f64>,
    /// Multipliers of the lower moment bound per (x, bin).
    pub delta_l: Vec<f64>,
    /// Multipliers of the upper moment bound per (x, bin).
    pub cap: Vec<f64>,
}

/// Subreplication LP: maximize μ(φ) + ν(ψ) subject to, for every x, bin b
/// and y,
/// φ(x) + ψ(y) + ΔS(y − x) + λ(ℓ_x(y) − e_b²) + κ(e_{b+1}² − ℓ_x(y)) ≤ e_b
/// with λ, κ ≥ 0. `u_grid` holds the bin edges; this is the exact LP dual of
/// the lower bin LP of [`vix_dual_lp`] on the same edges.
pub fn vix_primal_lp(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tau: f64, u_grid: &[f64]) -> Result<VixPrimal> {
    vix_check(mu, nu, tau)?;
    if u_grid.len() < 2 || u_grid.windows(2).any(|w| !(w[0] <= w[1])) || !(u_grid[0] >= 0.0) {
        return Err(Error::InvalidArgument("u_grid must be nondecreasing nonnegative edges".into()));
    }
    let (n, m, nb) = (mu.len(), nu.len(), u_grid.len() - 1);
    let phi = |i: usize| i;
    let psi = |j: usize| n + j;
    let ds = |i: usize, b: usize| n + m + i * nb + b;
    let dl = |i: usize, b: usize| n + m + n * nb + i * nb + b;
    let kp = |i: usize, b: usize| n + m + 2 * n * nb + i * nb + b;
    let nv = n + m + 3 * n * nb;
    let mut lp = LinearProgram::new(Sense::Maximize, nv);
    for (i, (_, w)) in mu.iter().enumerate() {
        lp.objective[phi(i)] = w;
        lp.set_lower(phi(i), f64::NEG_INFINITY);
    }
    for (j, (_, w)) in nu.iter().enumerate() {
        lp.objective[psi(j)] = w;
        lp.set_lower(psi(j), f64::NEG_INFINITY);
    }
    for i in 0..n {
        for b in 0..nb {
            lp.set_lower(ds(i, b), f64::NEG_INFINITY);
        }
    }
    for (i, &x) in mu.atoms().iter().enumerate() {
        for b in 0..nb {
            let (lo, hi) = (u_grid[b] * u_grid[b], u_grid[b + 1] * u_grid[b + 1]);
            for (j, &y) in nu.atoms().iter().enumerate() {
                let l = vix_ell(x, y, tau);
                lp.add_row(
                    vec![(phi(i), 1.0), (psi(j), 1.0), (ds(i, b), y - x), (dl(i, b), l - lo), (kp(i, b), hi - l)],
                    RowKind::Le,
                    u_grid[b],
                );
            }
        }
    }
    let sol = solve_lp(&lp).require_optimal()?;
    let x = &sol.primal;
    Ok(VixPrimal {
        p_value: sol.objective,
        phi: (0..n).map(|i| x[phi(i)]).collect(),
        psi: (0..m).map(|j| x[psi(j)]).collect(),
        delta_s: (0..n * nb).map(|k| x[n + m + k]).collect(),
        delta_l: (0..n * nb).map(|k| x[n + m + n * nb + k]).collect(),
        cap: (0..n * nb).map(|k| x[n + m + 2 * n * nb + k]).collect(),
    })
}

/// Lifted shadow coupling: minimizes ∫(1 − u)√(1 + y²) dπ over Π_M(μ̄, ν)
/// with labels in [0, 1].
pub fn shadow_coupling(mu_bar: &LiftedMeasure, nu: &DiscreteMeasure) -> Result<TransportSolution> {
    if mu_bar.atoms().iter().any(|a| !(0.0..=1.0).contains(&a.1)) {
        return Err(Error::InvalidArgument("shadow labels must lie in [0, 1]".into()));
    }
    solve_extended_mot(mu_bar, nu, &CostSpec::shadow(), Sense::Minimize)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barrier {
    pub x: f64,
    pub u: f64,
    pub weight: f64,
    pub t1: f64,
    pub t2: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BarrierMaps {
    pub barriers: Vec<Barrier>,
    /// Kernels with more than two support points.
    pub excluded_count: usize,
    pub excluded_mass: f64,
}

/// (T₁, T₂) = support endpoints of each kernel with at most two points;
/// wider kernels are left out and counted.
pub fn extract_barriers(c: &DiscreteCoupling) -> BarrierMaps {
    let mut out = BarrierMaps::default();
    for (i, ((x, u), w)) in c.first_marginal().iter().enumerate() {
        let supp: Vec<f64> =
            c.kernel_row(i).iter().zip(c.y_support()).filter(|(k, _)| **k > 1e-9).map(|(_, &y)| y).collect();
        match supp.len() {
            1 => out.barriers.push(Barrier { x, u, weight: w, t1: x, t2: x }),
            2 => out.barriers.push(Barrier { x, u, weight: w, t1: supp[0], t2: supp[1] }),
            _ => {
                out.excluded_count += 1;
                out.excluded_mass += w;
            }
        }
    }
    out
}

impl BarrierMaps {
    /// Mass of barriers breaking T₁(x,u) ≤ T₁(x,v) ≤ x ≤ T₂(x,v) ≤ T₂(x,u)
    /// for v ≤ u, as a fraction of the barrier mass.
    pub fn monotonicity_violation(&self, tol: f64) -> f64 {
        let total: f64 = self.barriers.iter().map(|b| b.weight).sum();
        if total <= 0.0 {
            return 0.0;
        }
        let mut bad = vec![false; self.barriers.len()];
        for (a, ba) in self.barriers.iter().enumerate() {
            if ba.t1 > ba.x + tol || ba.t2 < ba.x - tol {
                bad[a] = true;
            }
            for (b, bb) in self.barriers.iter().enumerate() {
                if ba.x != bb.x || !(bb.u < ba.u) {
                    continue;
                }
                // bb has the smaller label and must be nested inside ba.
                if ba.t1 > bb.t1 + tol || bb.t2 > ba.t2 + tol {
                    bad[a] = true;
                    bad[b] = true;
                }
            }
        }
        self.barriers.iter().zip(&bad).filter(|(_, &f)| f).map(|(b, _)| b.weight).sum::<f64>() / total
    }
}

/// Fraction of the (x, y)-mass violating left-monotonicity: for x < x′ no
/// y′ ∈ supp π_{x′} lies strictly between two support points of π_x.
pub fn left_monotone_violation(c: &DiscreteCoupling, tol: f64) -> f64 {
    let joint = c.joint();
    let mut xs: Vec<f64> = joint.iter().map(|e| e.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let supports: Vec<(f64, f64, Vec<(f64, f64)>)> = xs
        .iter()
        .map(|&x| {
            let mut ys: Vec<(f64, f64)> = Vec::new();
            for e in joint.iter().filter(|e| e.0 == x && e.3 > tol) {
                match ys.iter_mut().find(|(y, _)| *y == e.2) {
                    Some(slot) => slot.1 += e.3,
                    None => ys.push((e.2, e.3)),
                }
            }
            ys.sort_by(|a, b| a.0.total_cmp(&b.0));
            let lo = ys.first().map_or(0.0, |v| v.0);
            let hi = ys.last().map_or(0.0, |v| v.0);
            (lo, hi, ys)
        })
        .collect();
    let total: f64 = joint.iter().map(|e| e.3).sum();
    let mut bad = 0.0;
    for (k2, (_, _, ys2)) in supports.iter().enumerate() {
        for &(y2, w) in ys2 {
            let hit = supports[..k2].iter().any(|(lo, hi, _)| y2 > lo + tol && y2 < hi - tol);
            if hit {
                bad += w;
            }
        }
    }
    if total > 0.0 {
        bad / total
    } else {
        0.0
    }
}

/// Dependence between the quantile level of x and the label u.
#[derive(Debug, Clone, PartialEq)]
pub enum Copula {
    /// Comonotone: level = label.
    HoeffdingFrechet,
    Independence,
    /// m × m cell masses, rows indexed by label cell, columns by level cell;
    /// every row and column must sum to 1/m.
    Tabulated(Vec<Vec<f64>>),
}

fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

/// Lifts μ to μ̄ with labels (i − ½)/m: label cell i receives the part of μ
/// whose quantile level the copula pairs with it. proj₁ μ̄ = μ.
pub fn copula_lift(mu: &DiscreteMeasure, copula: &Copula, m: usize) -> Result<LiftedMeasure> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be positive".into()));
    }
    if mu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let mf = m as f64;
    if let Copula::Tabulated(t) = copula {
        if t.len() != m || t.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidArgument(format!("tabulated copula must be {m} x {m}")));
        }
        for k in 0..m {
            let rs: f64 = t[k].iter().sum();
            let cs: f64 = t.iter().map(|r| r[k]).sum();
            if t[k].iter().any(|v| !(*v >= 0.0)) || num::abs(rs - 1.0 / mf) > 1e-9 || num::abs(cs - 1.0 / mf) > 1e-9 {
                return Err(Error::InvalidArgument("tabulated copula rows and columns must sum to 1/m".into()));
            }
        }
    }
    let mass = mu.mass();
    // quantile-level interval of each atom in [0, 1]
    let mut cells = Vec::with_capacity(mu.len());
    let mut acc = 0.0;
    for (x, w) in mu.iter() {
        let next = acc + w / mass;
        cells.push((x, w, (acc, next)));
        acc = next;
    }
    if let Some(last) = cells.last_mut() {
        last.2 .1 = 1.0;
    }
    let cell = |k: usize| (k as f64 / mf, (k + 1) as f64 / mf);
    let mut atoms = Vec::new();
    for i in 0..m {
        let label = (i as f64 + 0.5) / mf;
        for &(x, w, iv) in &cells {
            let len = iv.1 - iv.0;
            let share = match copula {
                Copula::HoeffdingFrechet => overlap(cell(i), iv),
                Copula::Independence => len / mf,
                Copula::Tabulated(t) => (0..m).map(|k| t[i][k] * mf * overlap(cell(k), iv)).sum(),
            };
            // share is a fraction of the unit level range; rescale to the atom
            let weight = if len > 0.0 { w * share / len } else { 0.0 };
            if weight > 0.0 {
                atoms.push(((x, label), weight));
            }
        }
    }
    let lifted = LiftedMeasure::collect(atoms);
    Ok(lifted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(p: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::from_pairs(p).unwrap()
    }

    fn f1() -> (DiscreteMeasure, DiscreteMeasure) {
        (m(&[(-1.0, 0.5), (1.0, 0.5)]), m(&[(-2.0, 0.5), (2.0, 0.5)]))
    }

    #[test]
    fn mot_examples() {
        let (mu, nu) = f1();
        let s = solve_mot(&mu, &nu, &CostSpec::abs_diff(), Sense::Minimize).unwrap();
        assert!((s.value - 1.5).abs() < 1e-12);
        assert!(s.coupling.kernel(0).approx_eq(&m(&[(-2.0, 0.75), (2.0, 0.25)]), 1e-12));
        assert!(s.coupling.kernel(1).approx_eq(&m(&[(-2.0, 0.25), (2.0, 0.75)]), 1e-12));

        let d0 = DiscreteMeasure::dirac(0.0);
        let nu2 = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        let c = CostSpec::from_fn("t", |x, _, y| (x + 1.0) * y * y * y + 3.0 * y);
        let s = solve_mot(&d0, &nu2, &c, Sense::Maximize).unwrap();
        let expect = 0.5 * (c.eval(0.0, 0.0, -1.0).unwrap() + c.eval(0.0, 0.0, 1.0).unwrap());
        assert!((s.value - expect).abs() < 1e-12);

        let nu3 = m(&[(-3.0, 0.2), (-1.0, 0.3), (1.0, 0.3), (3.0, 0.2)]);
        for sense in [Sense::Minimize, Sense::Maximize] {
            let s = solve_mot(&mu, &nu3, &CostSpec::y_squared(), sense).unwrap();
            assert!((s.value - nu3.integrate(|y| y * y)).abs() < 1e-9);
        }
        assert!(matches!(
            solve_mot(&nu, &mu, &CostSpec::abs_diff(), Sense::Minimize),
            Err(Error::NotInConvexOrder { .. })
        ));
    }

    #[test]
    fn extended_mot_examples() {
        let (mu, nu) = f1();
        let lifted = LiftedMeasure::product(&mu, 0.0);
        let a = solve_extended_mot(&lifted, &nu, &CostSpec::abs_diff(), Sense::Minimize).unwrap();
        let b = solve_mot(&mu, &nu, &CostSpec::abs_diff(), Sense::Minimize).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);

        let mb = LiftedMeasure::new(vec![(0.0, 0.0), (0.0, 1.0)], vec![0.5, 0.5]).unwrap();
        let nu = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        let s = solve_extended_mot(&mb, &nu, &CostSpec::u_times_y(), Sense::Minimize).unwrap();
        assert!(s.value.abs() < 1e-12);
    }

    #[test]
    fn tabulated_cost_lookup() {
        let c = CostSpec::tabulated(vec![(0.0, 0.0, 1.0, 2.0), (0.0, 0.0, -1.0, 4.0)]).unwrap();
        assert_eq!(c.eval(0.0, 0.0, -1.0).unwrap(), 4.0);
        assert!(c.eval(0.0, 0.0, 2.0).is_err());
        let s = solve_mot(&DiscreteMeasure::dirac(0.0), &m(&[(-1.0, 0.5), (1.0, 0.5)]), &c, Sense::Minimize).unwrap();
        assert!((s.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn frank_wolfe_examples() {
        let (mu, nu) = f1();
        let lifted = LiftedMeasure::product(&mu, 0.0);
        let lin = LinearKernelCost(CostSpec::abs_diff());
        let s = solve_wmot_fw(&lifted, &nu, &lin, &FrankWolfeOptions::default()).unwrap();
        assert_eq!(s.iterations, 1);
        assert!((s.value - 1.5).abs() < 1e-12);

        let nu3 = m(&[(-3.0, 0.2), (-1.0, 0.3), (1.0, 0.3), (3.0, 0.2)]);
        let sq = LinearKernelCost(CostSpec::y_squared());
        let s = solve_wmot_fw(&lifted, &nu3, &sq, &FrankWolfeOptions::default()).unwrap();
        assert!((s.value - nu3.integrate(|y| y * y)).abs() < 1e-9);

        let s = solve_wmot_fw(&lifted, &nu, &AbsMomentSquared, &FrankWolfeOptions::default()).unwrap();
        assert!((s.value - 4.0).abs() < 1e-12);
        assert!(s.converged);
    }

    #[test]
    fn frank_wolfe_genuinely_convex() {
        // Two labels share x = 0; (∫|y|ρ)² prefers equal kernels.
        let mb = LiftedMeasure::new(vec![(0.0, 0.0), (0.0, 1.0)], vec![0.5, 0.5]).unwrap();
        let nu = m(&[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]);
        let s = solve_wmot_fw(&mb, &nu, &AbsMomentSquared, &FrankWolfeOptions { tol: 1e-10, ..Default::default() })
            .unwrap();
        // optimum: both kernels ½δ0 + ¼δ±2 -> (1)² each -> value 1
        assert!((s.value - 1.0).abs() < 1e-6, "{}", s.value);
        assert!(s.fw_gap <= 1e-6);
    }

    struct BadGradient;
    impl KernelCost for BadGradient {
        fn value(&self, _: f64, _: f64, ys: &[f64], p: &[f64]) -> Result<f64> {
            Ok(ys.iter().zip(p).map(|(y, q)| q * y * y).sum())
        }
        fn gradient(&self, _: f64, _: f64, ys: &[f64], _: &[f64]) -> Result<Vec<f64>> {
            Ok(ys.iter().map(|y| y.abs()).collect())
        }
    }

    #[test]
    fn frank_wolfe_gradient_check() {
        let mb = LiftedMeasure::new(vec![(0.0, 0.0), (0.0, 1.0)], vec![0.5, 0.5]).unwrap();
        let nu = m(&[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]);
        let r = solve_wmot_fw(&mb, &nu, &BadGradient, &FrankWolfeOptions::default());
        assert!(matches!(r, Err(Error::GradientCheck { .. })), "{r:?}");
    }

    #[test]
    fn american_examples() {
        let d0 = DiscreteMeasure::dirac(0.0);
        let nu = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        let s = price_american(&d0, &nu, |_| 0.2, |_, y: f64| y.max(0.0)).unwrap();
        assert!((s.value - 0.5).abs() < 1e-12);

        let nu = m(&[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]);
        let s = price_american(&d0, &nu, |_| 0.6, |_, y: f64| y.abs() / 2.0).unwrap();
        assert!((s.value - 0.8).abs() < 1e-12);
        assert!((s.exercise_mass - 0.5).abs() < 1e-12);

        let (mu, nu) = f1();
        let s = price_american(&mu, &nu, |x: f64| x.abs() + 1.0, |_, _| 0.0).unwrap();
        assert!((s.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn vix_examples() {
        let d1 = DiscreteMeasure::dirac(1.0);
        let v = vix_dual_lp(&d1, &d1, 1.0, 4).unwrap();
        assert_eq!((v.d_lo, v.d_hi), (0.0, 0.0));
        let p = vix_primal_lp(&d1, &d1, 1.0, &v.edges).unwrap();
        assert!(p.p_value.abs() < 1e-12);

        let nu = m(&[(0.5, 0.5), (1.5, 0.5)]);
        let target = (4.0f64 / 3.0).ln().sqrt();
        let mut prev = f64::INFINITY;
        for bins in [4, 8, 16, 32] {
            let v = vix_dual_lp(&d1, &nu, 1.0, bins).unwrap();
            assert!(v.d_lo <= target + 1e-9 && target <= v.d_hi + 1e-9, "{v:?}");
            assert!(v.d_hi - v.d_lo <= prev + 1e-12);
            prev = v.d_hi - v.d_lo;
            let p = vix_primal_lp(&d1, &nu, 1.0, &v.edges).unwrap();
            assert!((p.p_value - v.d_lo).abs() < 1e-6, "{} vs {}", p.p_value, v.d_lo);
            assert!(p.p_value <= v.d_hi + 1e-9);
        }
        assert!(vix_dual_lp(&m(&[(0.0, 1.0)]), &nu, 1.0, 4).is_err());
    }

    #[test]
    fn shadow_examples() {
        let (mu, nu) = f1();
        let lifted = LiftedMeasure::product(&mu, 0.0);
        let s = shadow_coupling(&lifted, &nu).unwrap();
        assert!((s.value - 5.0f64.sqrt()).abs() < 1e-12);

        let u = 0.3;
        let lifted = LiftedMeasure::product(&DiscreteMeasure::dirac(0.0), u);
        let s = shadow_coupling(&lifted, &m(&[(-1.0, 0.5), (1.0, 0.5)])).unwrap();
        assert!((s.value - (1.0 - u) * 2.0f64.sqrt()).abs() < 1e-12);

        let nu3 = m(&[(-3.0, 0.2), (-1.0, 0.3), (1.0, 0.3), (3.0, 0.2)]);
        let a = shadow_coupling(&LiftedMeasure::product(&mu, 0.0), &nu3).unwrap();
        let b = solve_mot(&mu, &nu3, &CostSpec::from_fn("s", |_, _, y| (1.0 + y * y).sqrt()), Sense::Minimize).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
        assert!(shadow_coupling(&LiftedMeasure::product(&mu, 2.0), &nu).is_err());
    }

    #[test]
    fn barrier_examples() {
        use crate::couplings::disintegrate;
        let (c, _) = disintegrate(&[
            (0.0, 0.0, -1.0, 0.25),
            (0.0, 0.0, 1.0, 0.25),
            (0.0, 0.5, 0.0, 0.25),
            (0.0, 1.0, -1.0, 0.0625),
            (0.0, 1.0, 0.0, 0.125),
            (0.0, 1.0, 1.0, 0.0625),
        ])
        .unwrap();
        let b = extract_barriers(&c);
        assert_eq!(b.barriers.len(), 2);
        assert_eq!((b.barriers[0].t1, b.barriers[0].t2), (-1.0, 1.0));
        assert_eq!((b.barriers[1].t1, b.barriers[1].t2), (0.0, 0.0));
        assert_eq!(b.excluded_count, 1);
        assert!((b.excluded_mass - 0.25).abs() < 1e-15);
        // label 0 is wider than label ½: violation
        assert!(b.monotonicity_violation(1e-9) > 0.0);
    }

    #[test]
    fn copula_examples() {
        let mu = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        let ind = copula_lift(&mu, &Copula::Independence, 2).unwrap();
        assert_eq!(ind.len(), 4);
        assert!(ind.weights().iter().all(|w| (w - 0.25).abs() < 1e-15));
        let hf = copula_lift(&mu, &Copula::HoeffdingFrechet, 2).unwrap();
        assert_eq!(hf.atoms(), &[(-1.0, 0.25), (1.0, 0.75)]);
        assert_eq!(hf.weights(), &[0.5, 0.5]);
        let one = copula_lift(&mu, &Copula::HoeffdingFrechet, 1).unwrap();
        assert_eq!(one, LiftedMeasure::product(&mu, 0.5));
        let bad = Copula::Tabulated(vec![vec![0.5, 0.0], vec![0.25, 0.25]]);
        assert!(copula_lift(&mu, &bad, 2).is_err());
        let anti = Copula::Tabulated(vec![vec![0.0, 0.5], vec![0.5, 0.0]]);
        let a = copula_lift(&mu, &anti, 2).unwrap();
        assert_eq!(a.atoms(), &[(-1.0, 0.75), (1.0, 0.25)]);
        let mu3 = m(&[(-1.0, 0.2), (0.0, 0.5), (4.0, 0.3)]);
        for cop in [Copula::HoeffdingFrechet, Copula::Independence] {
            assert!(copula_lift(&mu3, &cop, 7).unwrap().project_x().approx_eq(&mu3, 1e-12));
        }
    }

    #[test]
    fn shadow_hf_lift_is_nearly_monotone() {
        let mu = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        let nu = m(&[(-3.0, 0.25), (-1.0, 0.25), (1.0, 0.25), (3.0, 0.25)]);
        let lifted = copula_lift(&mu, &Copula::HoeffdingFrechet, 8).unwrap();
        let s = shadow_coupling(&lifted, &nu).unwrap();
        let b = extract_barriers(&s.coupling);
        assert!(b.monotonicity_violation(1e-9) <= 0.25);
        assert!(left_monotone_violation(&s.coupling, 1e-9) <= 0.25);
    }
}

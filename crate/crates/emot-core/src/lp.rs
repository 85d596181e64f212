//! Dense revised simplex with dual multipliers, plus basis enumeration of
//! the vertices of tiny polytopes.
//!
//! Problems are stated as
//!
//! ```text
//! min / max  c^T x   s.t.  a_i^T x  (<= | >= | =)  b_i,   x_j >= l_j
//! ```
//!
//! where `l_j` may be `-inf` (free variable). Duals follow the convention
//! that at an optimum `objective = sum_i b_i y_i + sum_j l_j (c_j - a_j^T y)`
//! over the finite lower bounds.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::num;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new(sense: Sense, num_vars: usize) -> Self {
        Self { sense, objective: vec![0.0; num_vars], lower: vec![0.0; num_vars], rows: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_objective(&mut self, j: usize, c: f64) {
        self.objective[j] = c;
    }

    /// `f64::NEG_INFINITY` makes the variable free.
    pub fn set_lower(&mut self, j: usize, lb: f64) {
        self.lower[j] = lb;
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, kind: RowKind, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, kind, rhs });
        self.rows.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n {
            return Err(Error::InvalidArgument("lower bounds length differs from objective".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite objective coefficient".into()));
        }
        if self.lower.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::InvalidArgument("invalid lower bound".into()));
        }
        for (i, r) in self.rows.iter().enumerate() {
            if !r.rhs.is_finite() {
                return Err(Error::InvalidArgument(format!("row {i}: non-finite rhs")));
            }
            for &(j, a) in &r.coeffs {
                if j >= n || !a.is_finite() {
                    return Err(Error::InvalidArgument(format!("row {i}: bad entry ({j}, {a})")));
                }
            }
        }
        Ok(())
    }

    /// Row activities a_i^T x.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.coeffs.iter().map(|&(j, a)| a * x[j]).sum()).collect()
    }

    /// Largest violation of rows and lower bounds at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (r, act) in self.rows.iter().zip(self.activities(x)) {
            let v = match r.kind {
                RowKind::Le => act - r.rhs,
                RowKind::Ge => r.rhs - act,
                RowKind::Eq => num::abs(act - r.rhs),
            };
            worst = worst.max(v);
        }
        for (xj, lj) in x.iter().zip(&self.lower) {
            worst = worst.max(lj - xj);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Plain-text dump:
    ///
    /// ```text
    /// # emot lp v1
    /// sense min
    /// vars 2
    /// objective 1 0
    /// lower 0 -inf
    /// row eq 1 : 0:1 1:1
    /// ```
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# emot lp v1");
        let _ = writeln!(s, "sense {}", if self.sense == Sense::Minimize { "min" } else { "max" });
        let _ = writeln!(s, "vars {}", self.num_vars());
        let _ = write!(s, "objective");
        for c in &self.objective {
            let _ = write!(s, " {c:?}");
        }
        let _ = write!(s, "\nlower");
        for l in &self.lower {
            if l.is_infinite() {
                let _ = write!(s, " -inf");
            } else {
                let _ = write!(s, " {l:?}");
            }
        }
        let _ = writeln!(s);
        for r in &self.rows {
            let k = match r.kind {
                RowKind::Le => "le",
                RowKind::Ge => "ge",
                RowKind::Eq => "eq",
            };
            let _ = write!(s, "row {k} {:?} :", r.rhs);
            for (j, a) in &r.coeffs {
                let _ = write!(s, " {j}:{a:?}");
            }
            let _ = writeln!(s);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub is_vertex: bool,
    pub iterations: usize,
}

impl LpSolution {
    fn failed(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        Self {
            status,
            primal: vec![0.0; n],
            dual: vec![0.0; m],
            objective: f64::NAN,
            dual_objective: f64::NAN,
            is_vertex: false,
            iterations,
        }
    }

    /// Maps non-optimal statuses to errors.
    pub fn require_optimal(self) -> Result<Self> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            LpStatus::Infeasible => Err(Error::Infeasible),
            LpStatus::Unbounded => Err(Error::Unbounded),
            LpStatus::IterationLimit => Err(Error::IterationLimit),
        }
    }

    pub fn duality_gap(&self) -> f64 {
        num::abs(self.objective - self.dual_objective)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Reduced-cost tolerance on the scaled problem.
    pub optimality_tol: f64,
    /// Phase-one infeasibility tolerance relative to the scaled rhs.
    pub feasibility_tol: f64,
    pub pivot_tol: f64,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200_000,
            optimality_tol: 1e-10,
            feasibility_tol: 1e-9,
            pivot_tol: 1e-10,
            refactor_every: 64,
            bland_after: 40,
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> LpSolution {
    solve_lp_with(lp, &SimplexOptions::default())
}

#[derive(Clone, Copy)]
enum Origin {
    Var { j: usize, sign: f64 },
    Slack,
}

struct StdForm {
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    origin: Vec<Origin>,
    cost: Vec<f64>,
    b: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    row_sign: Vec<f64>,
    /// Column holding a positive unit-like slack for the row, if any.
    slack_col: Vec<Option<usize>>,
}

fn standard_form(lp: &LinearProgram) -> StdForm {
    let m = lp.rows.len();
    let n = lp.num_vars();
    let mut by_var: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, r) in lp.rows.iter().enumerate() {
        for &(j, a) in &r.coeffs {
            if a != 0.0 {
                by_var[j].push((i, a));
            }
        }
    }
    for c in by_var.iter_mut() {
        c.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(c.len());
        for &(i, a) in c.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += a,
                _ => merged.push((i, a)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        *c = merged;
    }
    let c_sign = if lp.sense == Sense::Minimize { 1.0 } else { -1.0 };
    let mut b: Vec<f64> = lp.rows.iter().map(|r| r.rhs).collect();
    let mut cols = Vec::new();
    let mut origin = Vec::new();
    let mut cost = Vec::new();
    for j in 0..n {
        let lb = lp.lower[j];
        if lb.is_finite() {
            if lb != 0.0 {
                for &(i, a) in &by_var[j] {
                    b[i] -= a * lb;
                }
            }
            cols.push(by_var[j].clone());
            origin.push(Origin::Var { j, sign: 1.0 });
            cost.push(c_sign * lp.objective[j]);
        } else {
            cols.push(by_var[j].clone());
            origin.push(Origin::Var { j, sign: 1.0 });
            cost.push(c_sign * lp.objective[j]);
            cols.push(by_var[j].iter().map(|&(i, a)| (i, -a)).collect());
            origin.push(Origin::Var { j, sign: -1.0 });
            cost.push(-c_sign * lp.objective[j]);
        }
    }
    let mut slack_col = vec![None; m];
    for (i, r) in lp.rows.iter().enumerate() {
        let s = match r.kind {
            RowKind::Le => 1.0,
            RowKind::Ge => -1.0,
            RowKind::Eq => continue,
        };
        slack_col[i] = Some(cols.len());
        cols.push(vec![(i, s)]);
        origin.push(Origin::Slack);
        cost.push(0.0);
    }
    let row_sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    for c in cols.iter_mut() {
        for e in c.iter_mut() {
            e.1 *= row_sign[e.0];
        }
    }
    for (bi, s) in b.iter_mut().zip(&row_sign) {
        *bi *= s;
    }
    // Equilibrate rows, then columns, to unit max-norm.
    let mut row_max = vec![0.0f64; m];
    for c in &cols {
        for &(i, a) in c {
            row_max[i] = row_max[i].max(num::abs(a));
        }
    }
    let row_scale: Vec<f64> = row_max.iter().map(|&v| if v > 0.0 { 1.0 / v } else { 1.0 }).collect();
    let mut col_scale = vec![1.0; cols.len()];
    for (k, c) in cols.iter_mut().enumerate() {
        let mut cm = 0.0f64;
        for e in c.iter_mut() {
            e.1 *= row_scale[e.0];
            cm = cm.max(num::abs(e.1));
        }
        if cm > 0.0 {
            col_scale[k] = 1.0 / cm;
            for e in c.iter_mut() {
                e.1 *= col_scale[k];
            }
        }
        cost[k] *= col_scale[k];
    }
    for (bi, s) in b.iter_mut().zip(&row_scale) {
        *bi *= s;
    }
    let slack_col = slack_col
        .into_iter()
        .map(|s: Option<usize>| s.filter(|&k| cols[k][0].1 > 0.0))
        .collect();
    StdForm { m, cols, origin, cost, b, row_scale, col_scale, row_sign, slack_col }
}

enum RunStatus {
    Optimal,
    Unbounded,
    IterationLimit,
}

struct Simplex<'a> {
    opts: &'a SimplexOptions,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    n_real: usize,
    b: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
}

impl<'a> Simplex<'a> {
    fn new(sf: &StdForm, opts: &'a SimplexOptions) -> Self {
        let m = sf.m;
        let mut cols = sf.cols.clone();
        let n_real = cols.len();
        let mut basis = Vec::with_capacity(m);
        for i in 0..m {
            match sf.slack_col[i] {
                Some(k) => basis.push(k),
                None => {
                    basis.push(cols.len());
                    cols.push(vec![(i, 1.0)]);
                }
            }
        }
        let mut is_basic = vec![false; cols.len()];
        for &k in &basis {
            is_basic[k] = true;
        }
        let mut s = Self {
            opts,
            m,
            cols,
            n_real,
            b: sf.b.clone(),
            basis,
            is_basic,
            binv: vec![0.0; m * m],
            xb: vec![0.0; m],
            iterations: 0,
            since_refactor: 0,
        };
        for i in 0..m {
            let a = s.cols[s.basis[i]][0].1;
            s.binv[i * m + i] = 1.0 / a;
            s.xb[i] = s.b[i] / a;
        }
        s
    }

    fn is_artificial(&self, k: usize) -> bool {
        k >= self.n_real
    }

    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (pos, &k) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[k] {
                a[i * m + pos] = v;
            }
        }
        // Gauss-Jordan on [A | I] with partial pivoting; yields B^{-1} with
        // rows indexed by basis position.
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = num::abs(a[col * m + col]);
            for r in col + 1..m {
                let v = num::abs(a[r * m + col]);
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-14 {
                return false;
            }
            if piv != col {
                for c in 0..m {
                    a.swap(col * m + c, piv * m + c);
                    inv.swap(col * m + c, piv * m + c);
                }
            }
            let d = a[col * m + col];
            for c in 0..m {
                a[col * m + c] /= d;
                inv[col * m + c] /= d;
            }
            for r in 0..m {
                if r != col {
                    let f = a[r * m + col];
                    if f != 0.0 {
                        for c in 0..m {
                            a[r * m + c] -= f * a[col * m + c];
                            inv[r * m + c] -= f * inv[col * m + c];
                        }
                    }
                }
            }
        }
        // B x = I: row `pos` of the result is row `pos` of B^{-1}.
        self.binv = inv;
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            let v: f64 = row.iter().zip(&self.b).map(|(p, q)| p * q).sum();
            self.xb[k] = if v < 0.0 && v > -1e-9 { 0.0 } else { v };
        }
        self.since_refactor = 0;
        true
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &bk) in self.basis.iter().enumerate() {
            let c = cost[bk];
            if c != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for (yi, r) in y.iter_mut().zip(row) {
                    *yi += c * r;
                }
            }
        }
        y
    }

    fn column_ftran(&self, q: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(i, a) in &self.cols[q] {
            for (k, al) in alpha.iter_mut().enumerate() {
                *al += self.binv[k * m + i] * a;
            }
        }
        alpha
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64], theta: f64) {
        let m = self.m;
        for k in 0..m {
            if k != r {
                self.xb[k] -= theta * alpha[k];
                if self.xb[k] < 0.0 {
                    self.xb[k] = 0.0;
                }
            }
        }
        self.xb[r] = theta;
        let piv = alpha[r];
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        for (k, chunk) in before.chunks_mut(m).enumerate() {
            let f = alpha[k];
            if f != 0.0 {
                for (c, p) in chunk.iter_mut().zip(prow.iter()) {
                    *c -= f * p;
                }
            }
        }
        for (k, chunk) in after.chunks_mut(m).enumerate() {
            let f = alpha[r + 1 + k];
            if f != 0.0 {
                for (c, p) in chunk.iter_mut().zip(prow.iter()) {
                    *c -= f * p;
                }
            }
        }
        self.is_basic[self.basis[r]] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
        self.since_refactor += 1;
    }

    fn run(&mut self, cost: &[f64], phase_two: bool) -> RunStatus {
        let opts = self.opts;
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= opts.max_iterations {
                return RunStatus::IterationLimit;
            }
            if self.since_refactor >= opts.refactor_every {
                self.refactor();
            }
            let y = self.duals(cost);
            let limit = if phase_two { self.n_real } else { self.cols.len() };
            let mut entering = None;
            let mut best = -opts.optimality_tol;
            for j in 0..limit {
                if self.is_basic[j] {
                    continue;
                }
                let d = cost[j] - self.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>();
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = entering else {
                return RunStatus::Optimal;
            };
            let alpha = self.column_ftran(q);
            let tol_p = opts.pivot_tol;
            let mut leave: Option<usize> = None;
            if phase_two {
                // Artificials stuck in the basis at level zero must leave first.
                leave = (0..self.m)
                    .filter(|&k| self.is_artificial(self.basis[k]) && num::abs(alpha[k]) > tol_p)
                    .max_by(|&a, &b| num::abs(alpha[a]).total_cmp(&num::abs(alpha[b])));
            }
            let theta;
            if let Some(r) = leave {
                theta = 0.0;
                self.iterations += 1;
                self.pivot(r, q, &alpha, theta);
                degenerate += 1;
                continue;
            }
            if bland {
                let mut best_ratio = f64::INFINITY;
                for k in 0..self.m {
                    if alpha[k] > tol_p {
                        let ratio = self.xb[k] / alpha[k];
                        let better = match leave {
                            None => true,
                            Some(l) => {
                                ratio < best_ratio - 1e-12
                                    || (ratio <= best_ratio + 1e-12 && self.basis[k] < self.basis[l])
                            }
                        };
                        if better {
                            best_ratio = best_ratio.min(ratio);
                            leave = Some(k);
                        }
                    }
                }
            } else {
                let mut theta_max = f64::INFINITY;
                for k in 0..self.m {
                    if alpha[k] > tol_p {
                        theta_max = theta_max.min((self.xb[k] + opts.feasibility_tol) / alpha[k]);
                    }
                }
                if theta_max.is_finite() {
                    let mut best_alpha = 0.0;
                    for k in 0..self.m {
                        if alpha[k] > tol_p && self.xb[k] / alpha[k] <= theta_max && alpha[k] > best_alpha {
                            best_alpha = alpha[k];
                            leave = Some(k);
                        }
                    }
                }
            }
            let Some(r) = leave else {
                return RunStatus::Unbounded;
            };
            theta = (self.xb[r] / alpha[r]).max(0.0);
            self.iterations += 1;
            self.pivot(r, q, &alpha, theta);
            if theta <= 1e-12 {
                degenerate += 1;
                if degenerate >= opts.bland_after {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
        }
    }

    fn drive_out_artificials(&mut self) {
        let m = self.m;
        for k in 0..m {
            if !self.is_artificial(self.basis[k]) {
                continue;
            }
            let row = self.binv[k * m..(k + 1) * m].to_vec();
            let mut best = (1e-9, None);
            for j in 0..self.n_real {
                if self.is_basic[j] {
                    continue;
                }
                let v = num::abs(self.cols[j].iter().map(|&(i, a)| row[i] * a).sum::<f64>());
                if v > best.0 {
                    best = (v, Some(j));
                }
            }
            if let Some(j) = best.1 {
                let alpha = self.column_ftran(j);
                let theta = self.xb[k] / alpha[k];
                self.pivot(k, j, &alpha, theta.max(0.0));
            }
        }
    }
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SimplexOptions) -> LpSolution {
    let n = lp.num_vars();
    let m_rows = lp.rows.len();
    if lp.validate().is_err() {
        return LpSolution::failed(LpStatus::Infeasible, n, m_rows, 0);
    }
    let sf = standard_form(lp);
    let m = sf.m;
    let mut sx = Simplex::new(&sf, opts);
    let n_total = sx.cols.len();
    let has_artificials = n_total > sx.n_real;
    if has_artificials {
        let mut c1 = vec![0.0; n_total];
        for c in c1.iter_mut().skip(sx.n_real) {
            *c = 1.0;
        }
        match sx.run(&c1, false) {
            RunStatus::IterationLimit => {
                return LpSolution::failed(LpStatus::IterationLimit, n, m_rows, sx.iterations)
            }
            RunStatus::Unbounded | RunStatus::Optimal => {}
        }
        sx.refactor();
        let infeas: f64 = (0..m).filter(|&k| sx.is_artificial(sx.basis[k])).map(|k| sx.xb[k]).sum();
        let bmax = sf.b.iter().fold(0.0f64, |a, v| a.max(num::abs(*v)));
        if infeas > opts.feasibility_tol * (1.0 + bmax) {
            return LpSolution::failed(LpStatus::Infeasible, n, m_rows, sx.iterations);
        }
        sx.drive_out_artificials();
        sx.refactor();
    }
    let mut c2 = sf.cost.clone();
    c2.resize(n_total, 0.0);
    let status = sx.run(&c2, true);
    match status {
        RunStatus::IterationLimit => return LpSolution::failed(LpStatus::IterationLimit, n, m_rows, sx.iterations),
        RunStatus::Unbounded => return LpSolution::failed(LpStatus::Unbounded, n, m_rows, sx.iterations),
        RunStatus::Optimal => {}
    }
    sx.refactor();
    let y_scaled = sx.duals(&c2);

    let mut x_std = vec![0.0; n_total];
    for (k, &bk) in sx.basis.iter().enumerate() {
        x_std[bk] = sx.xb[k];
    }
    let mut primal: Vec<f64> = lp.lower.iter().map(|&l| if l.is_finite() { l } else { 0.0 }).collect();
    for (k, o) in sf.origin.iter().enumerate() {
        if let Origin::Var { j, sign } = *o {
            primal[j] += sign * x_std[k] * sf.col_scale[k];
        }
    }
    let dual_sign = if lp.sense == Sense::Minimize { 1.0 } else { -1.0 };
    let dual: Vec<f64> =
        (0..m).map(|i| dual_sign * sf.row_sign[i] * sf.row_scale[i] * y_scaled[i]).collect();
    let objective = lp.objective_value(&primal);
    let mut dual_objective: f64 = lp.rows.iter().zip(&dual).map(|(r, y)| r.rhs * y).sum();
    let mut aty = vec![0.0; n];
    for (r, y) in lp.rows.iter().zip(&dual) {
        for &(j, a) in &r.coeffs {
            aty[j] += a * y;
        }
    }
    for j in 0..n {
        if lp.lower[j].is_finite() && lp.lower[j] != 0.0 {
            dual_objective += lp.lower[j] * (lp.objective[j] - aty[j]);
        }
    }
    LpSolution {
        status: LpStatus::Optimal,
        primal,
        dual,
        objective,
        dual_objective,
        is_vertex: true,
        iterations: sx.iterations,
    }
}

/// Optimal transport between weight vectors `a` and `b` (equal totals) with
/// cost `cost(i, j)`; returns the value and the row-major plan.
pub fn solve_transport(a: &[f64], b: &[f64], cost: impl Fn(usize, usize) -> f64) -> Result<(f64, Vec<f64>)> {
    let (n, m) = (a.len(), b.len());
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    if num::abs(sa - sb) > 1e-9 * (1.0 + sa.max(sb)) {
        return Err(Error::MassMismatch(sa, sb));
    }
    if n == 0 || m == 0 {
        return Ok((0.0, vec![0.0; n * m]));
    }
    let mut lp = LinearProgram::new(Sense::Minimize, n * m);
    for i in 0..n {
        for j in 0..m {
            lp.objective[i * m + j] = cost(i, j);
        }
    }
    for (i, &ai) in a.iter().enumerate() {
        lp.add_row((0..m).map(|j| (i * m + j, 1.0)).collect(), RowKind::Eq, ai);
    }
    for (j, &bj) in b.iter().enumerate() {
        lp.add_row((0..n).map(|i| (i * m + j, 1.0)).collect(), RowKind::Eq, bj * sa / sb);
    }
    let sol = solve_lp(&lp).require_optimal()?;
    let plan: Vec<f64> = sol.primal.iter().map(|v| v.max(0.0)).collect();
    Ok((sol.objective, plan))
}

/// All vertices of `{x : rows, x >= lower}` for tiny bounded polytopes, by
/// basis enumeration after a light presolve (variables forced to zero and
/// empty columns are removed).
pub fn enumerate_vertices(lp: &LinearProgram, max_vertices: usize) -> Result<Vec<Vec<f64>>> {
    const MAX_VARS: usize = 12;
    lp.validate()?;
    if lp.lower.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument("vertex enumeration needs finite lower bounds".into()));
    }
    let n = lp.num_vars();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let n_slack = lp.rows.iter().filter(|r| r.kind != RowKind::Eq).count();
    let n_std = n + n_slack;
    let mut s = 0;
    for r in &lp.rows {
        let mut row = vec![0.0; n_std];
        let mut rhs = r.rhs;
        for &(j, a) in &r.coeffs {
            row[j] += a;
            rhs -= a * lp.lower[j];
        }
        match r.kind {
            RowKind::Le => {
                row[n + s] = 1.0;
                s += 1;
            }
            RowKind::Ge => {
                row[n + s] = -1.0;
                s += 1;
            }
            RowKind::Eq => {}
        }
        rows.push(row);
        b.push(rhs);
    }
    // Presolve: rows with one-signed coefficients and zero rhs fix their
    // support to zero.
    let mut active = vec![true; n_std];
    loop {
        let mut changed = false;
        for (row, &rhs) in rows.iter().zip(&b) {
            let nz: Vec<usize> = (0..n_std).filter(|&j| active[j] && row[j] != 0.0).collect();
            if nz.is_empty() {
                continue;
            }
            let all_pos = nz.iter().all(|&j| row[j] > 0.0);
            let all_neg = nz.iter().all(|&j| row[j] < 0.0);
            if (all_pos || all_neg) && num::abs(rhs) <= 1e-12 {
                for j in nz {
                    active[j] = false;
                }
                changed = true;
            } else if (all_pos && rhs < -1e-12) || (all_neg && rhs > 1e-12) {
                return Ok(Vec::new());
            }
        }
        for j in 0..n_std {
            if active[j] && rows.iter().all(|r| r[j] == 0.0) {
                active[j] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let cols: Vec<usize> = (0..n_std).filter(|&j| active[j]).collect();
    if cols.len() > MAX_VARS {
        return Err(Error::TooManyVariables(cols.len()));
    }
    // Row echelon reduction of [A_active | b].
    let k = cols.len();
    let mut mat: Vec<Vec<f64>> =
        rows.iter().zip(&b).map(|(r, &rhs)| cols.iter().map(|&j| r[j]).chain(core::iter::once(rhs)).collect()).collect();
    let mut rank = 0;
    for c in 0..k {
        let Some(p) = (rank..mat.len()).max_by(|&x, &y| num::abs(mat[x][c]).total_cmp(&num::abs(mat[y][c]))) else {
            break;
        };
        if num::abs(mat[p][c]) < 1e-10 {
            continue;
        }
        mat.swap(rank, p);
        let d = mat[rank][c];
        for v in mat[rank].iter_mut() {
            *v /= d;
        }
        for r in 0..mat.len() {
            if r != rank {
                let f = mat[r][c];
                if f != 0.0 {
                    for cc in 0..=k {
                        mat[r][cc] -= f * mat[rank][cc];
                    }
                }
            }
        }
        rank += 1;
    }
    if mat.iter().skip(rank).any(|r| num::abs(r[k]) > 1e-9) {
        return Ok(Vec::new());
    }
    mat.truncate(rank);
    let mut out: Vec<Vec<f64>> = Vec::new();
    let push = |full: Vec<f64>, out: &mut Vec<Vec<f64>>| -> Result<()> {
        if !out.iter().any(|v: &Vec<f64>| v.iter().zip(&full).all(|(a, b)| num::abs(a - b) <= 1e-9)) {
            if out.len() >= max_vertices {
                return Err(Error::TooManyVertices(max_vertices));
            }
            out.push(full);
        }
        Ok(())
    };
    let mut combo: Vec<usize> = (0..rank).collect();
    loop {
        if let Some(x_act) = solve_basis(&mat, &combo, k) {
            if x_act.iter().all(|&v| v >= -1e-9) {
                let clamped: Vec<f64> = x_act.iter().map(|v| v.max(0.0)).collect();
                push(clamped, &mut out)?;
            }
        }
        // next combination
        let mut i = rank;
        loop {
            if i == 0 {
                return Ok(out
                    .into_iter()
                    .map(|v| {
                        let mut x = lp.lower.clone();
                        for (t, &j) in cols.iter().enumerate() {
                            if j < n {
                                x[j] += v[t];
                            }
                        }
                        x
                    })
                    .collect());
            }
            i -= 1;
            if combo[i] < k - rank + i {
                combo[i] += 1;
                for t in i + 1..rank {
                    combo[t] = combo[t - 1] + 1;
                }
                break;
            }
        }
    }
}

// Solves the reduced system on the chosen columns; None when singular.
fn solve_basis(mat: &[Vec<f64>], combo: &[usize], k: usize) -> Option<Vec<f64>> {
    let r = combo.len();
    let mut a: Vec<Vec<f64>> = mat.iter().map(|row| combo.iter().map(|&c| row[c]).chain(core::iter::once(row[k])).collect()).collect();
    for c in 0..r {
        let p = (c..r).max_by(|&x, &y| num::abs(a[x][c]).total_cmp(&num::abs(a[y][c])))?;
        if num::abs(a[p][c]) < 1e-10 {
            return None;
        }
        a.swap(c, p);
        let d = a[c][c];
        for v in a[c].iter_mut() {
            *v /= d;
        }
        for rr in 0..r {
            if rr != c {
                let f = a[rr][c];
                if f != 0.0 {
                    for cc in 0..=r {
                        a[rr][cc] -= f * a[c][cc];
                    }
                }
            }
        }
    }
    let mut x = vec![0.0; k];
    for (t, &c) in combo.iter().enumerate() {
        x[c] = a[t][r];
    }
    Some(x)
}

//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use emot::fixtures;
use emot::stability::{noise, perturb_lifted, perturb_measure, repair_order, run_stability, ExperimentConfig, Family};
use emot_core::approximation::{approximate_coupling, min_cost_martingale_rearrangement, ApproximationOptions};
use emot_core::convex_order::{binary_kernel, convex_min, wasserstein_projection, w1_binary};
use emot_core::couplings::{
    adapted_wasserstein, check_martingale, hausdorff_mot, martingale_polytope, wasserstein_coupling, DiscreteCoupling,
    HausdorffOptions,
};
use emot_core::lp::{solve_lp, solve_transport, LpStatus, Sense};
use emot_core::measures::{check_convex_order, default_order_tol, wasserstein_line};
use emot_core::solvers::{
    copula_lift, extract_barriers, left_monotone_violation, price_american, shadow_coupling, solve_mot, vix_dual_lp,
    vix_primal_lp, Copula, CostSpec,
};
use emot_core::{DiscreteMeasure, Error, LiftedMeasure};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<T>(r: emot_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn m(p: &[(f64, f64)]) -> DiscreteMeasure {
    DiscreteMeasure::from_pairs(p).unwrap()
}

/// 1..=max atoms on the half-integer grid in [-3, 3], random weights,
/// total mass 1.
fn grid_measure(rng: &mut ChaCha8Rng, max: usize) -> DiscreteMeasure {
    let grid: Vec<f64> = (-6..=6).map(|k| k as f64 * 0.5).collect();
    let n = rng.gen_range(1..=max);
    let atoms: Vec<f64> = grid.choose_multiple(rng, n).copied().collect();
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let t: f64 = w.iter().sum();
    DiscreteMeasure::new(atoms, w.iter().map(|v| v / t).collect()).unwrap()
}

fn continuous_measure(rng: &mut ChaCha8Rng, max: usize) -> DiscreteMeasure {
    let n = rng.gen_range(1..=max);
    let atoms: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let t: f64 = w.iter().sum();
    DiscreteMeasure::new(atoms, w.iter().map(|v| v / t).collect()).unwrap()
}

/// Each atom split into B(x, x − a, x + b) with random a, b > 0.
fn spread(rng: &mut ChaCha8Rng, mu: &DiscreteMeasure) -> DiscreteMeasure {
    let mut pairs = Vec::new();
    for (x, w) in mu.iter() {
        let (l, r) = (x - rng.gen_range(0.2..2.0), x + rng.gen_range(0.2..2.0));
        for (y, p) in binary_kernel(x, l, r).unwrap().iter() {
            pairs.push((y, w * p));
        }
    }
    m(&pairs)
}

fn with_mean(mu: &DiscreteMeasure, mean: f64) -> DiscreteMeasure {
    let shift = mean - mu.mean().unwrap();
    mu.map_atoms(|x| x + shift)
}

fn nonincreasing_within(v: &[f64], slack: f64) -> bool {
    v.windows(2).all(|w| w[1] <= (1.0 + slack) * w[0] + 1e-12)
}

fn lp_feasible(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<bool, String> {
    let sol = solve_lp(&martingale_polytope(&LiftedMeasure::product(mu, 0.0), nu));
    match sol.status {
        LpStatus::Optimal => Ok(true),
        LpStatus::Infeasible => Ok(false),
        s => Err(format!("Strassen LP ended with {s:?}")),
    }
}

static STEP3_VIOLATIONS: AtomicUsize = AtomicUsize::new(0);
static STEP3_CHECKS: AtomicUsize = AtomicUsize::new(0);
static STEP3_MIN_SLACK: Mutex<f64> = Mutex::new(f64::INFINITY);

fn record_step3(cost: f64, bound: f64) {
    STEP3_CHECKS.fetch_add(1, Ordering::Relaxed);
    let mut s = STEP3_MIN_SLACK.lock().unwrap();
    *s = s.min(bound - cost);
    if cost > bound + 1e-9 * (1.0 + bound) {
        STEP3_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
    }
}

fn c1_forced_kernel_mot() -> Check {
    let (mu, nu) = fixtures::f1();
    let r = e2s(solve_mot(&mu, &nu, &CostSpec::abs_diff(), Sense::Minimize))?;
    ensure((r.value - 1.5).abs() <= 1e-9, || format!("value {}", r.value))?;
    let k0 = r.coupling.kernel_row(0);
    let k1 = r.coupling.kernel_row(1);
    let ok = (k0[0] - 0.75).abs() <= 1e-9 && (k0[1] - 0.25).abs() <= 1e-9 && (k1[0] - 0.25).abs() <= 1e-9 && (k1[1] - 0.75).abs() <= 1e-9;
    ensure(ok, || format!("kernels {k0:?} {k1:?}"))?;
    Ok(format!("value {:.12}, kernels {:?} / {:?}", r.value, k0, k1))
}

fn c2_order_checker_vs_strassen() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut agree, mut ordered) = (0, 0);
    for k in 0..200 {
        let mu = continuous_measure(&mut rng, if k % 2 == 0 { 3 } else { 6 });
        let nu = if k % 2 == 0 {
            spread(&mut rng, &mu)
        } else {
            with_mean(&continuous_measure(&mut rng, 6), mu.mean().unwrap())
        };
        let chk = check_convex_order(&mu, &nu, default_order_tol(&mu, &nu)).ordered;
        let lp = lp_feasible(&mu, &nu)?;
        ensure(chk == lp, || format!("instance {k}: checker {chk}, LP {lp}\nmu {mu:?}\nnu {nu:?}"))?;
        agree += 1;
        ordered += chk as usize;
    }
    Ok(format!("{agree}/200 agree ({ordered} ordered, {} not)", 200 - ordered))
}

fn c3_quantile_w1_vs_lp() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let a = continuous_measure(&mut rng, 8);
        let b = continuous_measure(&mut rng, 8);
        let q = e2s(wasserstein_line(&a, &b, 1.0))?;
        let (lp, _) = e2s(solve_transport(a.weights(), b.weights(), |i, j| (a.atoms()[i] - b.atoms()[j]).abs()))?;
        worst = worst.max((q - lp).abs());
    }
    ensure(worst <= 1e-8, || format!("max |difference| {worst:e}"))?;
    Ok(format!("max |difference| {worst:.2e} over 200 pairs"))
}

fn c4_projection_lipschitz() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut min_slack = f64::INFINITY;
    for k in 0..100 {
        let (mu, nu, mu2, nu2) =
            (grid_measure(&mut rng, 5), grid_measure(&mut rng, 5), grid_measure(&mut rng, 5), grid_measure(&mut rng, 5));
        let j1 = e2s(wasserstein_projection(&mu, &nu))?;
        let j2 = e2s(wasserstein_projection(&mu2, &nu2))?;
        let lhs = e2s(wasserstein_line(&j1, &j2, 1.0))?;
        let rhs = e2s(wasserstein_line(&mu, &mu2, 1.0))? + 2.0 * e2s(wasserstein_line(&nu, &nu2, 1.0))?;
        ensure(lhs <= rhs + 1e-8, || format!("instance {k}: {lhs} > {rhs}"))?;
        min_slack = min_slack.min(rhs - lhs);
    }
    Ok(format!("100 instances, min slack {min_slack:.3e}"))
}

/// Random mean-preserving contraction: consecutive atoms merged into their
/// barycenters.
fn contraction(rng: &mut ChaCha8Rng, mu: &DiscreteMeasure) -> DiscreteMeasure {
    let mut out = Vec::new();
    let mut group: Vec<(f64, f64)> = Vec::new();
    for (x, w) in mu.iter() {
        group.push((x, w));
        if rng.gen_bool(0.5) {
            let t: f64 = group.iter().map(|g| g.1).sum();
            out.push((group.iter().map(|g| g.0 * g.1).sum::<f64>() / t, t));
            group.clear();
        }
    }
    if !group.is_empty() {
        let t: f64 = group.iter().map(|g| g.1).sum();
        out.push((group.iter().map(|g| g.0 * g.1).sum::<f64>() / t, t));
    }
    m(&out)
}

fn c5_convex_min() -> Check {
    let (rho, q) = fixtures::f4();
    let c = e2s(convex_min(&rho, &q))?;
    let expect = fixtures::f4_expected();
    ensure(c.len() == 3 && c.atoms() == expect.atoms(), || format!("F4 atoms {:?}", c.atoms()))?;
    ensure(c.weights().iter().zip(expect.weights()).all(|(a, b)| (a - b).abs() <= 1e-10), || format!("F4 weights {:?}", c.weights()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tested_max = 0;
    for k in 0..100 {
        let rho = grid_measure(&mut rng, 5);
        let q = with_mean(&grid_measure(&mut rng, 5), rho.mean().unwrap());
        let c = e2s(convex_min(&rho, &q))?;
        for (name, big) in [("rho", &rho), ("q", &q)] {
            let chk = check_convex_order(&c, big, default_order_tol(&c, big));
            ensure(chk.ordered, || format!("pair {k}: result not dominated by {name}"))?;
        }
        for _ in 0..4 {
            let src = if rng.gen_bool(0.5) { &rho } else { &q };
            let theta = contraction(&mut rng, src);
            let below = |big: &DiscreteMeasure| check_convex_order(&theta, big, default_order_tol(&theta, big)).ordered;
            if below(&rho) && below(&q) {
                tested_max += 1;
                ensure(below(&c), || format!("pair {k}: maximality fails for {theta:?}"))?;
            }
        }
    }
    ensure(tested_max >= 50, || format!("only {tested_max} maximality samples"))?;
    Ok(format!("F4 exact; 100 pairs dominated; {tested_max} maximality samples hold"))
}

fn c6_american() -> Check {
    let (mu, nu) = fixtures::f1();
    let r = e2s(price_american(&mu, &nu, |x| x, |_, _| 0.0))?;
    // an LP value: "exact" means agreement up to a few ulps of rounding
    let exact = |v: f64, t: f64| (v - t).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0);
    ensure(exact(r.value, 0.5), || format!("Φ₂ ≡ 0 value {}", r.value))?;
    let (mu3, nu3) = fixtures::f3();
    let r3 = e2s(price_american(&mu3, &nu3, |x| x - 1.0, |_, _| 0.0))?;
    ensure(exact(r3.value, 0.5), || format!("F3 Φ₂ ≡ 0 value {}", r3.value))?;
    let d0 = DiscreteMeasure::dirac(0.0);
    let a = e2s(price_american(&d0, &m(&[(-1.0, 0.5), (1.0, 0.5)]), |_| 0.2, |_, y| y.max(0.0)))?;
    ensure((a.value - 0.5).abs() <= 1e-8, || format!("Dirac fixture {}", a.value))?;
    let nu_s = m(&[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]);
    let s = e2s(price_american(&d0, &nu_s, |_| 0.6, |_, y| y.abs() / 2.0))?;
    let cont = e2s(solve_mot(&d0, &nu_s, &CostSpec::from_fn("half_abs", |_, _, y| y.abs() / 2.0), Sense::Maximize))?;
    let unlifted = cont.value.max(0.6);
    ensure((s.value - 0.8).abs() <= 1e-8, || format!("splitting fixture {}", s.value))?;
    ensure((unlifted - 0.6).abs() <= 1e-8 && s.value > unlifted + 0.1, || format!("unlifted {unlifted}"))?;
    Ok(format!("Φ₂≡0 exact (0.5, 0.5); Dirac {:.10}; splitting {:.10} > unlifted {:.10}", a.value, s.value, unlifted))
}

fn c7_vix() -> Check {
    let (mu, nu, tau) = fixtures::f5();
    let target = fixtures::f5_value();
    let d200 = e2s(vix_dual_lp(&mu, &nu, tau, 200))?;
    let d400 = e2s(vix_dual_lp(&mu, &nu, tau, 400))?;
    let (g200, g400) = (d200.d_hi - d200.d_lo, d400.d_hi - d400.d_lo);
    ensure(d200.d_lo <= target && target <= d200.d_hi, || format!("bracket [{}, {}] misses {target}", d200.d_lo, d200.d_hi))?;
    ensure(d400.d_lo <= target && target <= d400.d_hi, || format!("400-bin bracket [{}, {}]", d400.d_lo, d400.d_hi))?;
    ensure(g200 <= 0.02, || format!("gap at 200 bins {g200}"))?;
    ensure(g400 <= 0.6 * g200, || format!("gap at 400 bins {g400} vs 0.6 × {g200}"))?;
    let p = e2s(vix_primal_lp(&mu, &nu, tau, &d200.edges))?;
    ensure((p.p_value - d200.d_lo).abs() <= 1e-6, || format!("primal {} vs d_lo {}", p.p_value, d200.d_lo))?;
    Ok(format!(
        "200 bins [{:.6}, {:.6}] gap {g200:.2e}; 400 bins gap {g400:.2e} (ratio {:.3}); primal − d_lo = {:.1e}",
        d200.d_lo,
        d200.d_hi,
        g400 / g200,
        p.p_value - d200.d_lo
    ))
}

fn scales(k: i32) -> Vec<f64> {
    (1..=k).map(|i| 2f64.powi(-i)).collect()
}

fn c8_approximation() -> Check {
    let mut lines = Vec::new();
    for (fi, (name, pi)) in fixtures::approximation_fixtures().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(80 + fi as u64);
        let z_mu = noise(&mut rng, pi.first_marginal().len());
        let z_nu = noise(&mut rng, pi.second_marginal().len());
        let mut aws = Vec::new();
        for s in scales(8) {
            let mu_bar = perturb_lifted(pi.first_marginal(), Family::AtomJitter, s, &z_mu).map_err(|e| e.to_string())?;
            let nu_raw = perturb_measure(pi.second_marginal(), Family::AtomJitter, s, &z_nu).map_err(|e| e.to_string())?;
            let nu = repair_order(&mu_bar.project_x(), &nu_raw).map_err(|e| e.to_string())?;
            let out = match approximate_coupling(&pi, &mu_bar, &nu, &ApproximationOptions { eps: s, window_level: None }) {
                Ok(o) => o,
                Err(e @ Error::RearrangementBound { .. }) => {
                    STEP3_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
                    return Err(format!("{name} scale {s}: {e}"));
                }
                Err(e) => return Err(format!("{name} scale {s}: {e}")),
            };
            for q in out.pieces.iter().filter_map(|p| p.pairs.as_ref()) {
                record_step3(q.step3_cost, q.step3_bound);
            }
            ensure(out.marginal_error <= 1e-9, || format!("{name} scale {s}: marginal error {:e}", out.marginal_error))?;
            ensure(check_martingale(&out.coupling, 1e-9).ok, || format!("{name} scale {s}: not a martingale"))?;
            aws.push(out.aw1);
        }
        let ratio = aws[aws.len() - 1] / aws[0];
        lines.push(format!("{name}: AW₁ {:.4} → {:.5} (ratio {ratio:.3})", aws[0], aws[aws.len() - 1]));
        ensure(nonincreasing_within(&aws, 0.1), || format!("{name}: AW₁ trend {aws:?}"))?;
        ensure(ratio <= 0.1, || format!("{name}: final/initial {ratio} ({aws:?})"))?;
    }
    Ok(lines.join("; "))
}

fn c9_step3_bound() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for k in 0..200 {
        let theta = continuous_measure(&mut rng, 4);
        let nu = spread(&mut rng, &theta);
        match min_cost_martingale_rearrangement(&theta, &nu) {
            Ok(r) => record_step3(r.cost, r.bound),
            Err(Error::RearrangementBound { cost, bound }) => record_step3(cost, bound),
            Err(e) => return Err(format!("instance {k}: {e}")),
        }
    }
    let forced = e2s(min_cost_martingale_rearrangement(&DiscreteMeasure::dirac(0.0), &m(&[(-1.0, 0.5), (1.0, 0.5)])))?;
    ensure((forced.cost - 1.0).abs() <= 1e-12, || format!("δ₀ fixture cost {}", forced.cost))?;
    let v = STEP3_VIOLATIONS.load(Ordering::Relaxed);
    let n = STEP3_CHECKS.load(Ordering::Relaxed);
    let slack = *STEP3_MIN_SLACK.lock().unwrap();
    ensure(v == 0, || format!("{v} violations in {n} rearrangements"))?;
    Ok(format!("0 violations in {n} rearrangements (pipeline + 200 random), min slack {slack:.3e}"))
}

fn c10_hausdorff() -> Check {
    let mu = m(&[(-1.0, 1.0 / 3.0), (0.0, 1.0 / 3.0), (1.0, 1.0 / 3.0)]);
    let nu = m(&[(-2.0, 0.3), (0.0, 0.4), (2.0, 0.3)]);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (z_mu, z_nu) = (noise(&mut rng, 3), noise(&mut rng, 3));
    let base = LiftedMeasure::product(&mu, 0.0);
    let mut d = Vec::new();
    for s in scales(6) {
        let mu2 = perturb_measure(&mu, Family::AtomJitter, s, &z_mu).map_err(|e| e.to_string())?;
        let nu_raw = perturb_measure(&nu, Family::AtomJitter, s, &z_nu).map_err(|e| e.to_string())?;
        let nu2 = repair_order(&mu2, &nu_raw).map_err(|e| e.to_string())?;
        let h = e2s(hausdorff_mot(&base, &nu, &LiftedMeasure::product(&mu2, 0.0), &nu2, &HausdorffOptions::default()))?;
        ensure(h.exact, || format!("scale {s}: not enumerated exactly (ν′ has {} atoms)", nu2.len()))?;
        d.push(h.upper);
    }
    ensure(nonincreasing_within(&d, 0.1), || format!("d_H trend {d:?}"))?;
    ensure(*d.last().unwrap() <= 0.02, || format!("finest d_H {}", d.last().unwrap()))?;
    Ok(format!("exact d_H {}", d.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")))
}

fn shadow_family() -> Vec<(DiscreteMeasure, DiscreteMeasure)> {
    vec![
        fixtures::f1(),
        (m(&[(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]), m(&[(-2.0, 0.2), (-0.5, 0.3), (0.5, 0.3), (2.0, 0.2)])),
        (m(&[(0.0, 0.5), (1.0, 0.5)]), m(&[(-1.0, 0.2), (0.5, 0.6), (2.0, 0.2)])),
    ]
}

fn c11_shadow() -> Check {
    let mut worst_mono: f64 = 0.0;
    let mut kernels = 0;
    for (mu, nu) in shadow_family() {
        for mm in [8, 16] {
            let lift = e2s(copula_lift(&mu, &Copula::HoeffdingFrechet, mm))?;
            let c = e2s(shadow_coupling(&lift, &nu))?.coupling;
            let b = extract_barriers(&c);
            kernels += b.barriers.len();
            worst_mono = worst_mono.max(b.monotonicity_violation(1e-9));
        }
    }
    ensure(worst_mono == 0.0, || format!("barrier monotonicity violated on mass fraction {worst_mono}"))?;
    let mut worst_left: f64 = 0.0;
    for (mu, nu) in shadow_family() {
        let lift = e2s(copula_lift(&mu, &Copula::HoeffdingFrechet, 64))?;
        let c = e2s(shadow_coupling(&lift, &nu))?.coupling;
        worst_left = worst_left.max(left_monotone_violation(&c, 1e-9));
    }
    ensure(worst_left <= 0.05, || format!("left-monotone violation {worst_left}"))?;
    let cfg = ExperimentConfig::from_toml(
        r#"
name = "barriers"
problem = "shadow"
family = "mass_jitter"
scales = [0.8, 0.4, 0.2, 0.1, 0.05, 0.025]
seed = 11
[base]
mu = { atoms = [-1, 0, 1], weights = [0.25, 0.5, 0.25] }
nu = { atoms = [-2, -0.5, 0.5, 2], weights = [0.2, 0.3, 0.3, 0.2] }
[solver]
copula = "hoeffding_frechet"
m = 8
barrier_threshold = 0.05
"#,
        std::path::Path::new("."),
    )
    .map_err(|e| e.to_string())?;
    let rep = run_stability(&cfg).map_err(|e| e.to_string())?;
    ensure(rep.failures() == 0, || format!("barrier experiment rows failed: {:?}", rep.rows.iter().filter_map(|r| r.reason.clone()).collect::<Vec<_>>()))?;
    let ex: Vec<f64> = rep.curve("barrier_exceedance").iter().map(|p| p.1).collect();
    let tv: Vec<f64> = rep.curve("lift_tv").iter().map(|p| p.1).collect();
    ensure(nonincreasing_within(&ex, 0.0), || format!("exceedance {ex:?}"))?;
    ensure(ex[0] > 0.0 && *ex.last().unwrap() < ex[0], || format!("exceedance does not decrease: {ex:?}"))?;
    Ok(format!(
        "monotone on {kernels} kernels; left-monotone violation {worst_left:.3} at m=64; exceedance {} (lift TV {:.3} → {:.3})",
        ex.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", "),
        tv[0],
        tv[tv.len() - 1]
    ))
}

fn random_coupling(rng: &mut ChaCha8Rng) -> Result<DiscreteCoupling, String> {
    let mu = continuous_measure(rng, 3);
    let nu = spread(rng, &mu);
    let cost = match rng.gen_range(0..3) {
        0 => CostSpec::abs_diff(),
        1 => CostSpec::call_spread(),
        _ => CostSpec::squared_diff(),
    };
    let sense = if rng.gen_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
    let c = e2s(solve_mot(&mu, &nu, &cost, sense))?.coupling;
    let shift = rng.gen_range(0.0..1.0);
    e2s(c.relabel(|x, _| if x > 0.0 { shift } else { 0.0 }))
}

fn c12_metric_sanity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut pairs = 0;
    for _ in 0..60 {
        let a = random_coupling(&mut rng)?;
        let b = random_coupling(&mut rng)?;
        let w = e2s(wasserstein_coupling(&a, &b, 1.0))?;
        let aw = e2s(adapted_wasserstein(&a, &b, 1.0))?;
        ensure(aw >= w - 1e-9, || format!("AW₁ {aw} < W₁ {w}"))?;
        let self_aw = e2s(adapted_wasserstein(&a, &a, 1.0))?;
        ensure(self_aw.abs() <= 1e-12, || format!("AW₁(c, c) = {self_aw}"))?;
        pairs += 1;
    }
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let x = rng.gen_range(-1.0..1.0);
        let mut side = |lo: bool| {
            if rng.gen_bool(0.1) {
                x
            } else if lo {
                x - rng.gen_range(0.01..3.0)
            } else {
                x + rng.gen_range(0.01..3.0)
            }
        };
        let (y, z, yk, zk) = (side(true), side(false), side(true), side(false));
        let (y, z) = if y == x || z == x { (x, x) } else { (y, z) };
        let (yk, zk) = if yk == x || zk == x { (x, x) } else { (yk, zk) };
        let f = e2s(w1_binary(x, y, z, yk, zk))?;
        let q = e2s(wasserstein_line(&e2s(binary_kernel(x, y, z))?, &e2s(binary_kernel(x, yk, zk))?, 1.0))?;
        worst = worst.max((f - q).abs());
    }
    ensure(worst <= 1e-10, || format!("w1_binary vs quantile {worst:e}"))?;
    Ok(format!("AW₁ ≥ W₁ on {pairs} pairs, AW₁(c,c)=0; w1_binary max |diff| {worst:.1e} on 500 pairs"))
}

fn c13_wmot_stability() -> Check {
    let fixtures = [
        ("f1", "[-1, 1]", "[0.5, 0.5]", "[-2, 2]", "[0.5, 0.5]"),
        ("f3", "[-2, 2]", "[0.5, 0.5]", "[-3, -1, 1, 3]", "[0.25, 0.25, 0.25, 0.25]"),
        ("spread4", "[-1, 1]", "[0.5, 0.5]", "[-3, -0.5, 0.5, 3]", "[0.25, 0.25, 0.25, 0.25]"),
    ];
    let mut lines = Vec::new();
    let mut bad = Vec::new();
    for (name, ma, mw, na, nw) in fixtures {
        let cfg = ExperimentConfig::from_toml(
            &format!(
                r#"
name = "{name}"
problem = "wmot"
family = "atom_jitter"
scales = [0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625]
seed = 13
[base]
mu = {{ atoms = {ma}, weights = {mw} }}
nu = {{ atoms = {na}, weights = {nw} }}
[solver]
cost = "abs_moment_squared"
"#
            ),
            std::path::Path::new("."),
        )
        .map_err(|e| e.to_string())?;
        let rep = run_stability(&cfg).map_err(|e| e.to_string())?;
        ensure(rep.failures() == 0, || {
            format!("{name}: rows failed: {:?}", rep.rows.iter().filter_map(|r| r.reason.clone()).collect::<Vec<_>>())
        })?;
        let gaps: Vec<f64> = rep.curve("value_gap").iter().map(|p| p.1).collect();
        let fw: f64 = rep.curve("fw_gap").iter().map(|p| p.1).fold(0.0, f64::max);
        let last = *gaps.last().unwrap();
        if !nonincreasing_within(&gaps, 0.1) {
            bad.push(format!("{name}: gaps not nonincreasing {gaps:?}"));
        }
        if last > 0.02 {
            bad.push(format!("{name}: final gap {last:.4} > 0.02"));
        }
        if fw > 1e-6 {
            bad.push(format!("{name}: fw_gap {fw:e}"));
        }
        lines.push(format!(
            "{name}: gaps {} (max fw_gap {fw:.1e})",
            gaps.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
        ));
    }
    ensure(bad.is_empty(), || format!("{}; {}", bad.join("; "), lines.join("; ")))?;
    Ok(lines.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 13] = [
        ("forced-kernel MOT fixture F1", c1_forced_kernel_mot),
        ("convex-order checker vs Strassen LP", c2_order_checker_vs_strassen),
        ("quantile W1 vs OT LP", c3_quantile_w1_vs_lp),
        ("projection Lipschitz bound", c4_projection_lipschitz),
        ("convex-order minimum", c5_convex_min),
        ("American fixtures", c6_american),
        ("VIX sandwich F5", c7_vix),
        ("approximation pipeline", c8_approximation),
        ("Step-3 rearrangement bound", c9_step3_bound),
        ("Hausdorff convergence", c10_hausdorff),
        ("shadow couplings and barriers", c11_shadow),
        ("adapted metric sanity", c12_metric_sanity),
        ("WMOT value stability", c13_wmot_stability),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!("[PASS] {:>2}. {name}: {detail} ({secs:.1}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {:>2}. {name}: {why} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

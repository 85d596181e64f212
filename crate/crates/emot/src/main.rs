use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use emot::io::{self, CouplingDto, LiftedDto, MeasureDto};
use emot::report;
use emot::stability::{parse_copula, parse_sense, run_stability, ExperimentConfig};
use emot_core::approximation::{approximate_coupling, ApproximationOptions};
use emot_core::convex_order::irreducible_decomposition;
use emot_core::couplings::DiscreteCoupling;
use emot_core::solvers::{
    copula_lift, extract_barriers, left_monotone_violation, price_american, shadow_coupling, solve_extended_mot,
    solve_mot, solve_wmot_fw, vix_dual_lp, vix_primal_lp, AbsMomentSquared, Copula, CostSpec, FrankWolfeOptions,
    KernelCost, LinearKernelCost,
};
use emot_core::{DiscreteMeasure, LiftedMeasure};
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "emot", version, about = "Extended martingale optimal transport on finitely supported measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Martingale transport between μ and ν.
    Mot(Common),
    /// Extended (lifted) martingale transport from μ̄ to ν.
    Emot(Common),
    /// Weak martingale transport with a kernel cost (Frank–Wolfe).
    Wmot(Common),
    /// Robust American option price.
    Amer(Common),
    /// VIX subreplication bounds.
    Vix(Common),
    /// Shadow coupling and its barriers.
    Shadow(Common),
    /// Irreducible decomposition of (μ, ν).
    Decompose(Common),
    /// Approximate a coupling under new marginals.
    Approx(Common),
    /// Run a perturbation experiment from a TOML config.
    Stability(Common),
}

#[derive(Args)]
struct Common {
    /// Problem JSON (TOML config for `stability`).
    #[arg(long)]
    input: PathBuf,
    /// Named cost: abs_diff, squared_diff, y_squared, u_times_y, call_spread, shadow, abs_moment_squared (wmot).
    #[arg(long)]
    cost: Option<String>,
    /// `min` or `max`.
    #[arg(long, default_value = "min")]
    sense: String,
    /// Number of u-bins for `vix`.
    #[arg(long, default_value_t = 200)]
    bins: usize,
    /// Copula lifting μ: hoeffding_frechet or independence.
    #[arg(long)]
    copula: Option<String>,
    /// Number of copula label cells.
    #[arg(long, default_value_t = 8)]
    m: usize,
    /// Approximation ε (overrides the input file).
    #[arg(long)]
    eps: Option<f64>,
    /// Output file (stdout if absent); output directory for `stability`.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit 2 for bad input, 3 when a solver fails.
enum Failure {
    Config(anyhow::Error),
    Solver(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Config(e.into())
    }
}

trait SolverContext<T> {
    fn solver(self, what: &str) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> SolverContext<T> for Result<T, E> {
    fn solver(self, what: &str) -> Result<T, Failure> {
        self.map_err(|e| Failure::Solver(e.into().context(what.to_string())))
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    mu: Option<MeasureDto>,
    nu: Option<MeasureDto>,
    mu_bar: Option<LiftedDto>,
    coupling: Option<CouplingDto>,
    mu_bar_new: Option<LiftedDto>,
    nu_new: Option<MeasureDto>,
    tau: Option<f64>,
    eps: Option<f64>,
    /// Φ₁ per atom of `mu`, in input order.
    phi1: Option<Vec<f64>>,
    /// Φ₂[i][j] per atom pair of (`mu`, `nu`), in input order.
    phi2: Option<Vec<Vec<f64>>>,
    /// Rows (x, u, y, cost).
    cost_table: Option<Vec<[f64; 4]>>,
    /// m × m cell masses for a tabulated copula.
    copula_table: Option<Vec<Vec<f64>>>,
}

struct Inputs {
    file: ProblemFile,
    opts: Common,
}

impl Inputs {
    fn mu(&self) -> anyhow::Result<DiscreteMeasure> {
        Ok(DiscreteMeasure::try_from(self.file.mu.as_ref().context("input needs `mu`")?)?)
    }

    fn nu(&self) -> anyhow::Result<DiscreteMeasure> {
        Ok(DiscreteMeasure::try_from(self.file.nu.as_ref().context("input needs `nu`")?)?)
    }

    fn copula(&self) -> anyhow::Result<Option<Copula>> {
        if let Some(t) = &self.file.copula_table {
            return Ok(Some(Copula::Tabulated(t.clone())));
        }
        self.opts.copula.as_deref().map(parse_copula).transpose()
    }

    /// `mu_bar`, else `mu` lifted by the copula, else μ ⊗ δ₀.
    fn mu_bar(&self, default_copula: Option<Copula>) -> anyhow::Result<LiftedMeasure> {
        if let Some(l) = &self.file.mu_bar {
            return Ok(LiftedMeasure::try_from(l)?);
        }
        let mu = self.mu()?;
        match self.copula()?.or(default_copula) {
            Some(c) => Ok(copula_lift(&mu, &c, self.opts.m)?),
            None => Ok(LiftedMeasure::product(&mu, 0.0)),
        }
    }

    fn cost(&self, default: &str) -> anyhow::Result<CostSpec> {
        if let Some(t) = &self.file.cost_table {
            return Ok(CostSpec::tabulated(t.iter().map(|r| (r[0], r[1], r[2], r[3])).collect())?);
        }
        let name = self.opts.cost.as_deref().unwrap_or(default);
        CostSpec::named(name).with_context(|| format!("unknown cost {name:?}"))
    }
}

fn coupling_json(c: &DiscreteCoupling) -> Value {
    serde_json::to_value(CouplingDto::from(c)).expect("coupling serializes")
}

fn measure_json(m: &DiscreteMeasure) -> Value {
    serde_json::to_value(MeasureDto::from(m)).expect("measure serializes")
}

/// Lookup of per-atom values given in input order.
fn table_1d(atoms: &[f64], values: &[f64], what: &str) -> anyhow::Result<Vec<(f64, f64)>> {
    if atoms.len() != values.len() {
        bail!("{what} has {} entries for {} atoms", values.len(), atoms.len());
    }
    let mut t: Vec<(f64, f64)> = atoms.iter().copied().zip(values.iter().copied()).collect();
    t.sort_by(|a, b| a.0.total_cmp(&b.0));
    if t.windows(2).any(|w| w[0].0 == w[1].0) {
        bail!("{what} needs distinct atoms");
    }
    Ok(t)
}

fn lookup(t: &[(f64, f64)], x: f64) -> f64 {
    let k = t.partition_point(|e| e.0 < x);
    let near = [k.checked_sub(1), Some(k)].into_iter().flatten().filter(|&i| i < t.len());
    near.min_by(|&a, &b| (t[a].0 - x).abs().total_cmp(&(t[b].0 - x).abs())).map_or(0.0, |i| t[i].1)
}

fn run(cmd: Command) -> Result<Value, Failure> {
    let (kind, opts) = match cmd {
        Command::Stability(o) => return run_stability_cmd(o),
        Command::Mot(o) => ("mot", o),
        Command::Emot(o) => ("emot", o),
        Command::Wmot(o) => ("wmot", o),
        Command::Amer(o) => ("amer", o),
        Command::Vix(o) => ("vix", o),
        Command::Shadow(o) => ("shadow", o),
        Command::Decompose(o) => ("decompose", o),
        Command::Approx(o) => ("approx", o),
    };
    let file: ProblemFile = io::read_json(&opts.input)?;
    let sense = parse_sense(&opts.sense)?;
    let inp = Inputs { file, opts };
    Ok(match kind {
        "mot" => {
            let (mu, nu, cost) = (inp.mu()?, inp.nu()?, inp.cost("abs_diff")?);
            let r = solve_mot(&mu, &nu, &cost, sense).solver("mot")?;
            json!({"value": r.value, "dual_objective": r.lp.dual_objective, "iterations": r.lp.iterations, "coupling": coupling_json(&r.coupling)})
        }
        "emot" => {
            let (mu_bar, nu, cost) = (inp.mu_bar(None)?, inp.nu()?, inp.cost("abs_diff")?);
            let r = solve_extended_mot(&mu_bar, &nu, &cost, sense).solver("emot")?;
            json!({"value": r.value, "dual_objective": r.lp.dual_objective, "iterations": r.lp.iterations, "coupling": coupling_json(&r.coupling)})
        }
        "wmot" => {
            let (mu_bar, nu) = (inp.mu_bar(None)?, inp.nu()?);
            let cost: Box<dyn KernelCost> = match inp.opts.cost.as_deref() {
                None | Some("abs_moment_squared") if inp.file.cost_table.is_none() => Box::new(AbsMomentSquared),
                _ => Box::new(LinearKernelCost(inp.cost("abs_diff")?)),
            };
            let r = solve_wmot_fw(&mu_bar, &nu, cost.as_ref(), &FrankWolfeOptions::default()).solver("wmot")?;
            json!({"value": r.value, "fw_gap": r.fw_gap, "iterations": r.iterations, "converged": r.converged, "coupling": coupling_json(&r.coupling)})
        }
        "amer" => {
            let (mu, nu) = (inp.mu()?, inp.nu()?);
            let mu_in = inp.file.mu.as_ref().expect("checked by mu()");
            let nu_in = inp.file.nu.as_ref().expect("checked by nu()");
            let phi1 = table_1d(&mu_in.atoms, inp.file.phi1.as_deref().context("amer needs `phi1`")?, "phi1")?;
            let phi2_rows = inp.file.phi2.as_ref().context("amer needs `phi2`")?;
            if phi2_rows.len() != mu_in.atoms.len() {
                return Err(anyhow::anyhow!("phi2 needs one row per atom of mu").into());
            }
            let phi2: Vec<(f64, Vec<(f64, f64)>)> = mu_in
                .atoms
                .iter()
                .zip(phi2_rows)
                .map(|(&x, row)| Ok((x, table_1d(&nu_in.atoms, row, "phi2 row")?)))
                .collect::<anyhow::Result<_>>()?;
            let mut phi2 = phi2;
            phi2.sort_by(|a, b| a.0.total_cmp(&b.0));
            let rows: Vec<(f64, f64)> = phi2.iter().enumerate().map(|(i, r)| (r.0, i as f64)).collect();
            let r = price_american(&mu, &nu, |x| lookup(&phi1, x), |x, y| lookup(&phi2[lookup(&rows, x) as usize].1, y))
                .solver("amer")?;
            json!({"value": r.value, "exercise_mass": r.exercise_mass, "continue_mass": r.continue_mass, "coupling": coupling_json(&r.coupling)})
        }
        "vix" => {
            let (mu, nu) = (inp.mu()?, inp.nu()?);
            let tau = inp.file.tau.unwrap_or(1.0);
            let d = vix_dual_lp(&mu, &nu, tau, inp.opts.bins).solver("vix dual")?;
            let p = vix_primal_lp(&mu, &nu, tau, &d.edges).solver("vix primal")?;
            json!({"d_lo": d.d_lo, "d_hi": d.d_hi, "p_value": p.p_value, "bins": inp.opts.bins, "edges": d.edges, "coupling": coupling_json(&d.coupling)})
        }
        "shadow" => {
            let (mu_bar, nu) = (inp.mu_bar(Some(Copula::HoeffdingFrechet))?, inp.nu()?);
            let r = shadow_coupling(&mu_bar, &nu).solver("shadow")?;
            let b = extract_barriers(&r.coupling);
            let barriers: Vec<Value> =
                b.barriers.iter().map(|q| json!({"x": q.x, "u": q.u, "weight": q.weight, "t1": q.t1, "t2": q.t2})).collect();
            json!({
                "value": r.value,
                "barriers": barriers,
                "excluded_count": b.excluded_count,
                "excluded_mass": b.excluded_mass,
                "monotonicity_violation": b.monotonicity_violation(1e-9),
                "left_monotone_violation": left_monotone_violation(&r.coupling, 1e-9),
                "coupling": coupling_json(&r.coupling),
            })
        }
        "decompose" => {
            let (mu, nu) = (inp.mu()?, inp.nu()?);
            let d = irreducible_decomposition(&mu, &nu).solver("decompose")?;
            let comps: Vec<Value> = d
                .components
                .iter()
                .map(|c| json!({"interval": [c.interval.0, c.interval.1], "mu": measure_json(&c.mu), "nu": measure_json(&c.nu)}))
                .collect();
            json!({"components": comps, "stationary": measure_json(&d.stationary)})
        }
        "approx" => {
            let pi = DiscreteCoupling::try_from(inp.file.coupling.as_ref().context("approx needs `coupling`")?)?;
            let mu_bar_new = LiftedMeasure::try_from(inp.file.mu_bar_new.as_ref().context("approx needs `mu_bar_new`")?)?;
            let nu_new = DiscreteMeasure::try_from(inp.file.nu_new.as_ref().context("approx needs `nu_new`")?)?;
            let eps = inp.opts.eps.or(inp.file.eps).unwrap_or(ApproximationOptions::default().eps);
            if !(eps > 0.0) {
                return Err(anyhow::anyhow!("eps must be positive").into());
            }
            let r = approximate_coupling(&pi, &mu_bar_new, &nu_new, &ApproximationOptions { eps, window_level: None })
                .solver("approx")?;
            let pieces: Vec<Value> = r
                .pieces
                .iter()
                .map(|p| {
                    let pairs = p.pairs.as_ref().map(|q| {
                        json!({
                            "eps": q.eps, "eps_trace": q.eps_trace, "window": [q.window.0, q.window.1],
                            "window_level": q.window_level, "step1_move": q.step1_move, "step2_margin": q.step2_margin,
                            "step3_cost": q.step3_cost, "step3_bound": q.step3_bound,
                        })
                    });
                    json!({"component": p.component, "cells": p.cells, "reassembly_fit": p.reassembly_fit, "pairs": pairs})
                })
                .collect();
            json!({
                "aw1": r.aw1, "identity": r.identity, "marginal_error": r.marginal_error,
                "simplify_aw1": r.simplify_aw1, "simplify_bound": r.simplify_bound,
                "pieces": pieces, "coupling": coupling_json(&r.coupling),
            })
        }
        _ => unreachable!(),
    })
}

fn run_stability_cmd(opts: Common) -> Result<Value, Failure> {
    let mut cfg = ExperimentConfig::load(&opts.input)?;
    let dir = match &opts.out {
        Some(d) => d.clone(),
        None => cfg.output_dir(),
    };
    if let Some(m) = opts.copula.as_ref() {
        cfg.solver.copula = Some(m.clone());
    }
    let rep = run_stability(&cfg)?;
    let paths = report::emit(&rep, &cfg.output.formats, &dir).map_err(Failure::Config)?;
    let files: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    let summary = json!({"name": rep.name, "rows": rep.rows.len(), "failed_rows": rep.failures(), "files": files});
    if rep.failures() > 0 {
        println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        return Err(Failure::Solver(anyhow::anyhow!("{} of {} scales failed", rep.failures(), rep.rows.len())));
    }
    Ok(summary)
}

fn write_output(out: Option<&Path>, value: &Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match &cli.command {
        Command::Stability(_) => None,
        Command::Mot(o)
        | Command::Emot(o)
        | Command::Wmot(o)
        | Command::Amer(o)
        | Command::Vix(o)
        | Command::Shadow(o)
        | Command::Decompose(o)
        | Command::Approx(o) => o.out.clone(),
    };
    let result = run(cli.command).and_then(|v| write_output(out.as_deref(), &v).map_err(Failure::Config));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver error: {e:#}");
            ExitCode::from(3)
        }
    }
}

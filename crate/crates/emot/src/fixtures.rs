//! Small closed-form instances shared by the acceptance suite, the
//! stability harness and the CLI examples.

use emot_core::couplings::{disintegrate, DiscreteCoupling};
use emot_core::lp::Sense;
use emot_core::solvers::{solve_mot, CostSpec};
use emot_core::{DiscreteMeasure, LiftedMeasure};
use statrs::distribution::{ContinuousCDF, Normal};

fn m(p: &[(f64, f64)]) -> DiscreteMeasure {
    DiscreteMeasure::from_pairs(p).expect("fixture measure")
}

/// F1: μ = {-1: ½, 1: ½}, ν = {-2: ½, 2: ½}. Π_M is a singleton.
pub fn f1() -> (DiscreteMeasure, DiscreteMeasure) {
    (m(&[(-1.0, 0.5), (1.0, 0.5)]), m(&[(-2.0, 0.5), (2.0, 0.5)]))
}

/// The only martingale coupling of F1, kernels (¾, ¼) and (¼, ¾).
pub fn f1_coupling() -> DiscreteCoupling {
    disintegrate(&[(-1.0, 0.0, -2.0, 0.375), (-1.0, 0.0, 2.0, 0.125), (1.0, 0.0, -2.0, 0.125), (1.0, 0.0, 2.0, 0.375)])
        .expect("F1 coupling")
        .0
}

/// F3: two irreducible components, (-3, -1) and (1, 3).
pub fn f3() -> (DiscreteMeasure, DiscreteMeasure) {
    (m(&[(-2.0, 0.5), (2.0, 0.5)]), m(&[(-3.0, 0.25), (-1.0, 0.25), (1.0, 0.25), (3.0, 0.25)]))
}

/// F4: ρ, q with ρ ∧_c q = {-3: ⅙, 0: ⅔, 3: ⅙}.
pub fn f4() -> (DiscreteMeasure, DiscreteMeasure) {
    (m(&[(-3.0, 0.5), (3.0, 0.5)]), m(&[(-10.0, 0.05), (0.0, 0.9), (10.0, 0.05)]))
}

pub fn f4_expected() -> DiscreteMeasure {
    m(&[(-3.0, 1.0 / 6.0), (0.0, 2.0 / 3.0), (3.0, 1.0 / 6.0)])
}

/// F5: VIX instance μ = δ₁, ν = {½: ½, 3/2: ½}, τ = 1.
pub fn f5() -> (DiscreteMeasure, DiscreteMeasure, f64) {
    (DiscreteMeasure::dirac(1.0), m(&[(0.5, 0.5), (1.5, 0.5)]), 1.0)
}

/// √(ln(4/3)), the F5 subreplication value.
pub fn f5_value() -> f64 {
    (4.0f64 / 3.0).ln().sqrt()
}

/// Lifted coupling on labels {0, 1}: at x = 0 and x = 1 the two labels
/// carry different kernels.
pub fn lifted_coupling() -> DiscreteCoupling {
    disintegrate(&[
        (-1.0, 0.0, -3.0, 0.1),
        (-1.0, 0.0, 0.0, 0.2),
        (0.0, 0.0, -3.0, 0.05),
        (0.0, 0.0, 3.0, 0.05),
        (0.0, 1.0, 0.0, 0.3),
        (1.0, 0.0, 0.0, 0.1),
        (1.0, 0.0, 3.0, 0.05),
        (1.0, 1.0, -3.0, 0.05),
        (1.0, 1.0, 3.0, 0.1),
    ])
    .expect("lifted fixture")
    .0
}

/// The three couplings used for the approximation experiments.
pub fn approximation_fixtures() -> Vec<(&'static str, DiscreteCoupling)> {
    let (mu, nu) = f3();
    let f3c = solve_mot(&mu, &nu, &CostSpec::abs_diff(), Sense::Minimize).expect("F3 coupling").coupling;
    vec![("f1", f1_coupling()), ("f3", f3c), ("lifted", lifted_coupling())]
}

/// Dirac μ̄ at (0, u).
pub fn dirac_lift(u: f64) -> LiftedMeasure {
    LiftedMeasure::product(&DiscreteMeasure::dirac(0.0), u)
}

/// Equally weighted lognormal-like grid: exp(σ z_i − σ²/2) at standard
/// normal quantile midpoints, rescaled to mean 1.
pub fn lognormal_like(n: usize, sigma: f64) -> DiscreteMeasure {
    let atoms: Vec<f64> = (0..n)
        .map(|i| {
            let p = (i as f64 + 0.5) / n as f64;
            (sigma * probit(p) - sigma * sigma / 2.0).exp()
        })
        .collect();
    let mean = atoms.iter().sum::<f64>() / n as f64;
    DiscreteMeasure::uniform(&atoms.iter().map(|a| a / mean).collect::<Vec<_>>()).expect("lognormal grid")
}

fn probit(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use emot_core::couplings::check_martingale;

    #[test]
    fn fixtures_are_martingales() {
        for (_, c) in approximation_fixtures() {
            assert!(check_martingale(&c, 1e-12).ok);
        }
    }

    #[test]
    fn lognormal_mean_one() {
        let n = lognormal_like(50, 0.4);
        assert_eq!(n.len(), 50);
        assert!((n.mean().unwrap() - 1.0).abs() < 1e-12);
        assert!((probit(0.975) - 1.959964).abs() < 1e-6);
    }
}

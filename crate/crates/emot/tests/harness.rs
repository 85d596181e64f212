use emot::fixtures;
use emot::io::{CouplingDto, LiftedDto, MeasureDto};
use emot::stability::{noise, perturb_lifted, perturb_measure, repair_order, Family};
use emot_core::couplings::DiscreteCoupling;
use emot_core::measures::{check_convex_order, default_order_tol, lifted_total_variation, wasserstein_line};
use emot_core::{DiscreteMeasure, LiftedMeasure};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn measure() -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((-3.0f64..3.0, 0.1f64..1.0), 1..6).prop_map(|v| {
        let t: f64 = v.iter().map(|p| p.1).sum();
        DiscreteMeasure::from_pairs(&v.iter().map(|&(x, w)| (x, w / t)).collect::<Vec<_>>()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn repaired_pairs_are_ordered(mu in measure(), nu in measure(), seed in any::<u64>(), scale in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (zm, zn) = (noise(&mut rng, mu.len()), noise(&mut rng, nu.len()));
        let mu2 = perturb_measure(&mu, Family::AtomJitter, scale, &zm).unwrap();
        let raw = perturb_measure(&nu, Family::AtomJitter, scale, &zn).unwrap();
        let nu2 = repair_order(&mu2, &raw).unwrap();
        prop_assert!(check_convex_order(&mu2, &nu2, default_order_tol(&mu2, &nu2)).ordered);
        prop_assert!(wasserstein_line(&mu2, &mu, 1.0).unwrap() <= scale + 1e-12);
    }

    #[test]
    fn mass_jitter_renormalizes(mu in measure(), seed in any::<u64>(), scale in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = noise(&mut rng, mu.len());
        let m = perturb_measure(&mu, Family::MassJitter, scale, &z).unwrap();
        prop_assert!((m.mass() - 1.0).abs() <= 1e-12);
        prop_assert_eq!(m.atoms(), mu.atoms());
    }

    #[test]
    fn quantile_family_dominated(mu in measure(), scale in 0.05f64..1.0) {
        let m = perturb_measure(&mu, Family::QuantileDiscretize, scale, &[]).unwrap();
        prop_assert!(check_convex_order(&m, &mu, default_order_tol(&m, &mu)).ordered);
        prop_assert!(m.len() <= (1.0 / scale).ceil() as usize);
    }

    #[test]
    fn noise_is_reproducible(seed in any::<u64>(), n in 0usize..20) {
        let a = noise(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let b = noise(&mut ChaCha8Rng::seed_from_u64(seed), n);
        prop_assert_eq!(&a, &b);
        prop_assert!(a.iter().all(|z| (-1.0..=1.0).contains(z)));
    }

    #[test]
    fn measure_json_round_trip(mu in measure()) {
        let text = serde_json::to_string(&MeasureDto::from(&mu)).unwrap();
        let back: MeasureDto = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(DiscreteMeasure::try_from(&back).unwrap(), mu);
    }
}

#[test]
fn lifted_jitter_moves_little() {
    let c = fixtures::lifted_coupling();
    let base = c.first_marginal();
    let z = noise(&mut ChaCha8Rng::seed_from_u64(1), base.len());
    let small = perturb_lifted(base, Family::MassJitter, 0.01, &z).unwrap();
    let large = perturb_lifted(base, Family::MassJitter, 0.5, &z).unwrap();
    assert!(lifted_total_variation(&small, base) < lifted_total_variation(&large, base));
    assert_eq!(perturb_lifted(base, Family::AtomJitter, 0.0, &z).unwrap(), *base);
}

#[test]
fn coupling_and_lifted_json() {
    let c = fixtures::lifted_coupling();
    let text = serde_json::to_string(&CouplingDto::from(&c)).unwrap();
    let back: CouplingDto = serde_json::from_str(&text).unwrap();
    assert_eq!(DiscreteCoupling::try_from(&back).unwrap(), c);
    let bad = r#"{"atoms": [[0, 0]], "weights": [1], "extra": 1}"#;
    assert!(serde_json::from_str::<LiftedDto>(bad).is_err());
    let l: LiftedDto = serde_json::from_str(r#"{"atoms": [[0, 0.5]], "weights": [1]}"#).unwrap();
    assert_eq!(LiftedMeasure::try_from(&l).unwrap(), fixtures::dirac_lift(0.5));
}

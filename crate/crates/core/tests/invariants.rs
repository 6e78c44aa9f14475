use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use pdetect::analytic::{objective_g, pfa_multi, pfa_single, pmd_multi, pmd_single, OperatingPoint};
use pdetect::pareto::{pareto_compare, MdFaCurve, Outcome, Scheme, ToleranceRegion};
use pdetect::qfunc::q;
use pdetect::weights::{wmd_weights, WeightVector};

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn curve(scheme: Scheme, pfa_exp: Vec<f64>, md_scale: f64) -> MdFaCurve {
    let points = pfa_exp
        .iter()
        .enumerate()
        .map(|(i, &e)| OperatingPoint { rho: 0.05 + i as f64 * 0.01, pfa: 10f64.powf(-e), pmd: md_scale * 10f64.powf(-12.0 + e) })
        .collect();
    MdFaCurve::new(scheme, points)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn q_is_symmetric_and_decreasing(x in -30.0f64..30.0, dx in 1e-6f64..1.0) {
        prop_assert!((q(x) + q(-x) - 1.0).abs() < 1e-15);
        prop_assert!(q(x + dx) <= q(x));
    }

    #[test]
    fn q_matches_normal_survival(x in -8.0f64..8.0) {
        // statrs's erfc is only good to about 1e-11 relative.
        let oracle = Normal::new(0.0, 1.0).unwrap().sf(x);
        prop_assert!(((q(x) - oracle) / oracle).abs() < 1e-10, "x {} q {} oracle {}", x, q(x), oracle);
    }

    #[test]
    fn pfa_falls_as_threshold_rises(eta in 1usize..128, rho in 0.01f64..0.9, step in 1e-3f64..0.09) {
        prop_assert!(pfa_single(eta, rho + step).unwrap() <= pfa_single(eta, rho).unwrap());
    }

    #[test]
    fn pmd_rises_with_threshold(rho in 0.05f64..0.5, step in 1e-3f64..0.1, gamma in 1.0f64..20.0) {
        prop_assert!(pmd_single(16, rho + step, gamma).unwrap() >= pmd_single(16, rho, gamma).unwrap());
    }

    #[test]
    fn equal_weights_minimize_false_alarm(w in simplex(4), rho in 0.05f64..0.95) {
        let eq = pfa_multi(16, rho, &[0.25; 4]).unwrap();
        prop_assert!(eq <= pfa_multi(16, rho, &w).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn probabilities_ignore_weight_scale(w in simplex(3), k in 0.01f64..100.0, rho in 0.1f64..0.6) {
        let g = [2.0, 3.0, 5.0];
        let scaled: Vec<f64> = w.iter().map(|x| x * k).collect();
        let a = pfa_multi(16, rho, &w).unwrap();
        let b = pfa_multi(16, rho, &scaled).unwrap();
        prop_assert!(((a - b) / a).abs() < 1e-12);
        let a = pmd_multi(16, rho, &g, &w).unwrap();
        let b = pmd_multi(16, rho, &g, &scaled).unwrap();
        prop_assert!(((a - b) / a).abs() < 1e-9);
    }

    #[test]
    fn wmd_weights_are_feasible_and_optimal(
        gammas in prop::collection::vec(1.0f64..30.0, 2..6),
        seed_w in prop::collection::vec(0.01f64..1.0, 6),
        rho in 0.05f64..0.45,
    ) {
        let wo = wmd_weights(&gammas, rho).unwrap();
        let s: f64 = wo.as_slice().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        prop_assert!(wo.as_slice().iter().all(|&x| x > 0.0));
        let other = WeightVector::normalized(&seed_w[..gammas.len()]).unwrap();
        let g_opt = objective_g(wo.as_slice(), &gammas, rho).unwrap();
        let g_other = objective_g(other.as_slice(), &gammas, rho).unwrap();
        prop_assert!(g_opt >= g_other * (1.0 - 1e-12));
    }

    #[test]
    fn verdict_is_antisymmetric(
        a in prop::collection::vec(2.0f64..9.0, 3..20),
        b in prop::collection::vec(2.0f64..9.0, 3..20),
        sa in 0.1f64..10.0,
        sb in 0.1f64..10.0,
    ) {
        let ca = curve(Scheme::Wfa, a, sa);
        let cb = curve(Scheme::IWmd, b, sb);
        let region = ToleranceRegion::new(1e-6, 1e-4).unwrap();
        let ab = pareto_compare(&ca, &cb, &region);
        let ba = pareto_compare(&cb, &ca, &region);
        let flipped = match ba.outcome {
            Outcome::AWins => Outcome::BWins,
            Outcome::BWins => Outcome::AWins,
            Outcome::Draw => Outcome::Draw,
        };
        prop_assert_eq!(ab.outcome, flipped);
        prop_assert_eq!(ab.feasible_a, ba.feasible_b);
    }

    #[test]
    fn f32_tracks_f64(eta in 1usize..64, rho in 0.05f64..0.9, gamma in 0.5f64..10.0) {
        let d = pfa_single::<f64>(eta, rho).unwrap();
        let s = pfa_single::<f32>(eta, rho as f32).unwrap();
        prop_assert!(((s as f64 - d) / d).abs() < 1e-3);
        if gamma > rho / (1.0 - rho) {
            let d = pmd_single::<f64>(eta, rho, gamma).unwrap();
            let s = pmd_single::<f32>(eta, rho as f32, gamma as f32).unwrap();
            prop_assert!(d < 1e-30 || ((s as f64 - d) / d).abs() < 1e-2);
        }
    }
}

#[test]
fn a_curve_against_itself_is_a_draw() {
    let c = curve(Scheme::Wfa, vec![3.0, 5.0, 7.0, 8.0], 1.0);
    let v = pareto_compare(&c, &c, &ToleranceRegion::new(1e-6, 1e-4).unwrap());
    assert_eq!(v.outcome, Outcome::Draw);
}

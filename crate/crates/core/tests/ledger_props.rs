//! Bound catalog properties and ledger soundness on random devices.

use proptest::prelude::*;

use magicrect_core::engine::NoiseModel;
use magicrect_core::ledger::{
    bound_catalog, delta_log_slope, exact_epsilons, ledger_verify, BoundReport, CrossCheck, Relation, VerifyOptions,
};
use magicrect_core::strategies::DeviceModel;

fn supported_n() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![3usize, 7, 11, 15, 19, 23, 27, 31, 35, 39, 43])
}

proptest! {
    #[test]
    fn catalog_monotone_in_each_deficit(
        n in supported_n(),
        eps in prop::array::uniform3(0.0f64..1.0),
        k in 0usize..3,
        bump in 0.0f64..1.0,
    ) {
        let mut more = eps;
        more[k] += bump;
        let lo = bound_catalog(n, eps).unwrap();
        let hi = bound_catalog(n, more).unwrap();
        for (a, b) in lo.iter().zip(&hi) {
            prop_assert_eq!(a.relation, b.relation);
            prop_assert!(b.rhs >= a.rhs, "{} fell from {} to {}", a.name, a.rhs, b.rhs);
        }
    }

    #[test]
    fn delta_scales_as_sqrt_eps(n in supported_n(), lo in -7.0f64..-3.0) {
        let grid: Vec<f64> = (0..9).map(|k| 10f64.powf(lo + 0.25 * k as f64)).collect();
        let s = delta_log_slope(n, &grid).unwrap();
        prop_assert!((s - 0.5).abs() <= 0.05, "slope {}", s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ledger_holds_for_random_rotations(angles in prop::collection::vec(-0.6f64..0.6, 3)) {
        let dev = DeviceModel::noisy_honest(3, NoiseModel::PerPair { angles }).unwrap();
        let rep = ledger_verify(&dev, VerifyOptions { cross_check: CrossCheck::All, inject_bug: false }).unwrap();
        prop_assert!(rep.passed(), "min margin {:?}", rep.min_margin());
        for e in &rep.entries {
            prop_assert!(e.cross_check_diff.unwrap_or(0.0) < 1e-10);
        }
    }
}

#[test]
fn rejects_unsupported_sizes() {
    for n in [1, 5, 9, 13] {
        assert!(bound_catalog(n, [0.1; 3]).is_err());
    }
    assert!(bound_catalog(7, [2.5, 0.0, 0.0]).is_err());
}

#[test]
fn adversaries_respect_the_bounds() {
    for dev in [DeviceModel::standard_square().unwrap(), DeviceModel::padded_adversary(7).unwrap()] {
        let (eps, _) = exact_epsilons(&dev).unwrap();
        assert!(eps.iter().any(|&e| e > 0.0));
        let rep = ledger_verify(&dev, VerifyOptions::default()).unwrap();
        assert!(rep.passed(), "{:?}", dev.kind());
    }
}

#[test]
fn injected_bug_is_caught() {
    let dev = DeviceModel::noisy_honest(7, NoiseModel::YRotation { theta: 0.1 }).unwrap();
    let opts = VerifyOptions { cross_check: CrossCheck::None, inject_bug: true };
    let rep = ledger_verify(&dev, opts).unwrap();
    assert!(!rep.passed());
    assert_eq!(rep.entry(Relation::CorrX).and_then(|e| e.pass), Some(false));
}

#[test]
fn report_json_round_trip() {
    let rep = BoundReport::from_catalog(7, [0.01, 0.02, 0.03]).unwrap();
    let back: BoundReport = serde_json::from_str(&serde_json::to_string(&rep).unwrap()).unwrap();
    assert_eq!(back, rep);
}

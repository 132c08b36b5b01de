//! Conservation laws and integration order of the reactor model.

mod common;

use proptest::prelude::*;
use rvl_core::reactor::{simulate, VOLUME_CAP};
use rvl_core::{KineticsParams, ReactorState};

fn controls() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0usize..=9).prop_map(|i| 0.001 * i as f64), 120)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn balances_hold_under_random_feeds(u in controls()) {
        let params = KineticsParams::default();
        let traj = simulate(&u, &params, &ReactorState::INITIAL).unwrap();
        let (ac, sum, volume_ok) = common::balance_violation(&traj, &params);
        prop_assert!(ac < 1e-6, "A/C balance off by {}", ac);
        prop_assert!(sum < 1e-6, "species sum off by {}", sum);
        prop_assert!(volume_ok);
        // Identical inputs give bit-identical trajectories.
        prop_assert_eq!(simulate(&u, &params, &ReactorState::INITIAL).unwrap(), traj);
    }
}

#[test]
fn saturating_feed_respects_the_cap() {
    let params = KineticsParams::default();
    let traj = simulate(&[0.009; 120], &params, &ReactorState::INITIAL).unwrap();
    let (ac, sum, volume_ok) = common::balance_violation(&traj, &params);
    assert!(ac < 1e-6 && sum < 1e-6 && volume_ok);
    assert!((traj.final_state().v - VOLUME_CAP).abs() < 1e-12);
}

#[test]
fn rk4_error_ratio_is_fourth_order() {
    let ratios = common::rk4_error_ratios();
    assert_eq!(ratios.len(), 6);
    for r in ratios {
        assert!((12.0..=20.0).contains(&r), "error ratio {r}");
    }
}

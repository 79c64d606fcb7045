use proptest::prelude::*;
use uavnoma::channel::{array_response, beacon_gain, beacon_link, harvested_tx_power, propulsion_power};
use uavnoma::linalg;
use uavnoma::{Role, Rotor, Scenario, Steering, SystemParams};

fn params(pairs: usize) -> SystemParams {
    SystemParams {
        pairs,
        antennas: pairs.max(2),
        ..SystemParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn pairing_is_a_perfect_matching(seed in any::<u64>(), pairs in 1usize..12) {
        let s = Scenario::generate(seed, params(pairs)).unwrap();
        let mut seen = vec![0; 2 * pairs];
        for p in &s.pairs {
            seen[p.cc] += 1;
            seen[p.ce] += 1;
            prop_assert_eq!(s.user(p.cc).role, Role::CC);
            prop_assert_eq!(s.user(p.ce).role, Role::CE);
        }
        prop_assert!(seen.iter().all(|c| *c == 1));
    }

    #[test]
    fn ce_distances_shrink_as_cc_rank_grows(seed in any::<u64>(), pairs in 1usize..12) {
        let s = Scenario::generate(seed, params(pairs)).unwrap();
        for w in s.pairs.windows(2) {
            let (_, a) = s.pair_members(w[0].n);
            let (_, b) = s.pair_members(w[1].n);
            prop_assert!(a.dist_to_center >= b.dist_to_center);
        }
        for n in 0..pairs {
            let (cc, ce) = s.pair_members(n);
            prop_assert!(cc.dist_to_center <= ce.dist_to_center);
            prop_assert!(ce.dist_to_center <= s.params.disc_radius);
        }
    }

    #[test]
    fn same_seed_same_drop(seed in any::<u64>(), pairs in 1usize..8) {
        let a = Scenario::generate(seed, params(pairs)).unwrap();
        let b = Scenario::generate(seed, params(pairs)).unwrap();
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn array_response_has_unit_norm(theta in -10.0f64..10.0, m in 1usize..64, ratio in 0.1f64..2.0) {
        let a = array_response(theta, m, ratio);
        prop_assert!((linalg::norm(&a.0) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn harvested_power_is_increasing_and_convex(g in 1e-4f64..1e3, t1 in 0.01f64..0.97) {
        let p = SystemParams::default();
        let h = 1e-3;
        let f = |t: f64| harvested_tx_power(t, g, &p).unwrap();
        prop_assert!(f(t1 + h) > f(t1));
        prop_assert!(f(t1 + h) - 2.0 * f(t1) + f(t1 - h) >= -1e-12 * f(t1).max(1.0));
    }

    #[test]
    fn matched_beam_gain_is_the_top_singular_value(x in -50.0f64..50.0, y in -50.0f64..50.0, m in 1usize..9) {
        for steering in [Steering::ArrayAxis, Steering::Elevation] {
            let p = SystemParams { antennas: m, steering, ..SystemParams::default() };
            let uav = [x, y, p.altitude];
            let link = beacon_link(uav, &p);
            let h = nalgebra::DMatrix::from_fn(m, m, |i, j| link.h_pu[i][j]);
            let top = h.singular_values().max();
            prop_assert!((link.gain - top * top).abs() <= 1e-9 * link.gain.max(1.0));
            prop_assert!((beacon_gain(uav, &p) - link.gain).abs() <= 1e-9 * link.gain.max(1.0));
        }
    }
}

#[test]
fn hover_power_is_blade_plus_induced() {
    let r = Rotor::default();
    assert_eq!(propulsion_power(0.0, &r), r.p0 + r.pi);
}

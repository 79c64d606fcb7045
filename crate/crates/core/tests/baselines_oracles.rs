mod common;

use uavnoma::baselines::{etpa_coefficients, exhaustive_search, GridSpec, ES_LIMIT};
use uavnoma::linklayer::{self, pair_rates, CombinerSet, LinkState, Precoder};
use uavnoma::num_complex::Complex64;
use uavnoma::{Access, Allocation, Error, Scenario, SystemParams};

fn spread(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

/// Walks the full Cartesian grid through the public evaluator.
fn brute_force(s: &Scenario, g: &GridSpec) -> Option<f64> {
    let params = &s.params;
    let area = params.area;
    let alphas = spread(0.0, 0.5, g.alpha);
    let mut best: Option<f64> = None;
    for x in spread(area.x_min, area.x_max, g.xy) {
        for y in spread(area.y_min, area.y_max, g.xy) {
            let link = LinkState::at(s, [x, y]).unwrap();
            for i in 1..=g.tau {
                let tau = params.cycle * i as f64 / (g.tau + 1) as f64;
                let p_t = linklayer::tx_power(tau, link.beacon_gain, params).unwrap();
                let powers = spread(0.0, p_t, g.power);
                for &a0 in &alphas {
                    for &a1 in &alphas {
                        for &p0 in &powers {
                            for &p1 in &powers {
                                let alloc = Allocation {
                                    p: vec![p0, p1],
                                    alpha_cc: vec![a0, a1],
                                    alpha_ce: vec![1.0 - a0, 1.0 - a1],
                                    tau,
                                    access: Access::Noma,
                                };
                                let r = linklayer::evaluate(&link, params, &alloc, [x, y]).unwrap();
                                if r.feasibility.all() && best.is_none_or(|b| r.ee > b) {
                                    best = Some(r.ee);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    best
}

#[test]
fn decomposed_search_matches_brute_force() {
    let params = SystemParams {
        pairs: 2,
        antennas: 4,
        r_min: 0.02,
        ..SystemParams::default()
    };
    let grid = GridSpec {
        alpha: 6,
        power: 7,
        tau: 3,
        xy: 5,
    };
    let mut found = 0;
    for seed in 0..4 {
        let s = Scenario::generate(seed, params.clone()).unwrap();
        let es = exhaustive_search(&s, &grid).unwrap();
        let bf = brute_force(&s, &grid);
        match (es, bf) {
            (Some(e), Some(b)) => {
                assert!(common::rel_diff(e.ee, b) < 1e-12, "seed {seed}: {} vs {b}", e.ee);
                assert!(e.report.feasibility.all());
                found += 1;
            }
            (None, None) => {}
            (e, b) => panic!("seed {seed}: {:?} vs {b:?}", e.map(|e| e.ee)),
        }
    }
    assert!(found >= 2);
}

#[test]
fn oversized_grid_is_refused() {
    let s = Scenario::generate(
        0,
        SystemParams {
            pairs: 2,
            antennas: 4,
            ..SystemParams::default()
        },
    )
    .unwrap();
    let grid = GridSpec {
        alpha: 101,
        power: 101,
        tau: 51,
        xy: 51,
    };
    assert!(grid.work(2) > ES_LIMIT);
    match exhaustive_search(&s, &grid) {
        Err(Error::GridTooLarge { points, limit }) => {
            assert_eq!(points, grid.work(2));
            assert_eq!(limit, ES_LIMIT);
        }
        other => panic!("expected refusal, got {:?}", other.map(|r| r.map(|e| e.ee))),
    }
    let s4 = Scenario::generate(0, SystemParams::default()).unwrap();
    let tiny = GridSpec {
        alpha: 2,
        power: 2,
        tau: 1,
        xy: 2,
    };
    assert!(exhaustive_search(&s4, &tiny).is_err());
}

/// Link with prescribed effective gains and no interference structure.
fn link_with_gains(g_cc: f64, g_ce: f64) -> LinkState {
    LinkState {
        precoder: Precoder {
            columns: vec![vec![Complex64::new(1.0, 0.0)]],
        },
        combiners: CombinerSet {
            w_cc: vec![Complex64::new(1.0, 0.0)],
            v_ce: vec![vec![Complex64::new(1.0, 0.0)]],
            w_ce: vec![Complex64::new(g_ce.sqrt(), 0.0)],
        },
        eff_gain_cc: vec![g_cc],
        eff_gain_ce: vec![g_ce],
        swapped: vec![g_cc < g_ce],
        beacon_gain: 1.0,
    }
}

#[test]
fn oma_halves_carry_no_intra_pair_interference() {
    let link = link_with_gains(3.0, 0.4);
    let mut alloc = Allocation::uniform(1, 2.0, 0.5);
    alloc.access = Access::Oma;
    let (a, b) = pair_rates(&link, &alloc, 0, 1.0);
    assert!((a - 0.5 * (1.0 + 6.0f64).log2()).abs() < 1e-15);
    assert!((b - 0.5 * (1.0 + 0.8f64).log2()).abs() < 1e-15);
}

#[test]
fn equal_gains_make_oma_and_even_noma_coincide() {
    for (g, p) in [(1.0, 1.0), (0.3, 7.0), (12.0, 0.05)] {
        let link = link_with_gains(g, g);
        let noma = Allocation::uniform(1, p, 0.5);
        let mut oma = noma.clone();
        oma.access = Access::Oma;
        let (a, b) = pair_rates(&link, &noma, 0, 1.0);
        let (c, d) = pair_rates(&link, &oma, 0, 1.0);
        let full = (1.0 + p * g).log2();
        assert!(((a + b) - full).abs() < 1e-12);
        // orthogonal halves lose exactly the gap to the full-band rate
        assert!((c + d) <= full && full - (c + d) <= full * 0.5 + 1e-15);
    }
}

#[test]
fn etpa_favours_the_weaker_user() {
    let mut rng = common::rng(41);
    for _ in 0..1000 {
        use rand::Rng;
        let g_ce = common::log_uniform(&mut rng, 1e-3, 1e3);
        let g_cc = g_ce * common::log_uniform(&mut rng, 1.0001, 1e3);
        let eta = rng.random_range(0.01..=1.0);
        let (a, b) = etpa_coefficients(g_cc, g_ce, eta);
        assert!(a < b && (a + b - 1.0).abs() < 1e-12);
    }
}

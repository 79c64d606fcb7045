//! Fixtures shared by the benchmarks.

use uavnoma::bcd::{run_algorithm4, BcdOptions, BcdResult};
use uavnoma::game::UtilityParams;
use uavnoma::linklayer::LinkState;
use uavnoma::{Scenario, SystemParams};

/// Seeded drop with `pairs` pairs and `antennas` antennas.
pub fn scenario(seed: u64, pairs: usize, antennas: usize) -> Scenario {
    let params = SystemParams {
        pairs,
        antennas,
        ..SystemParams::default()
    };
    Scenario::generate(seed, params).expect("valid parameters")
}

/// Link state with the UAV at `xy`.
pub fn link(s: &Scenario, xy: [f64; 2]) -> LinkState {
    LinkState::at(s, xy).expect("full-rank channels")
}

/// Game constants of a typical pair.
pub fn utility() -> UtilityParams {
    UtilityParams {
        g_cc: 4.0,
        g_ce: 0.3,
        ps: 6.0,
        kappa: 0.05,
        p_max: 2.5,
    }
}

/// First seed from `seed` on whose drop the pipeline finds a feasible allocation.
pub fn feasible(seed: u64, pairs: usize, antennas: usize) -> (Scenario, BcdResult) {
    (seed..seed + 100)
        .find_map(|k| {
            let s = scenario(k, pairs, antennas);
            run_algorithm4(&s, &BcdOptions::default()).ok().map(|r| (s, r))
        })
        .expect("a feasible drop within 100 seeds")
}

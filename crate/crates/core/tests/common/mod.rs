#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavnoma::game::UtilityParams;
use uavnoma::linalg::CVec;
use uavnoma::num_complex::Complex64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

pub fn complex_vector(rng: &mut impl Rng, m: usize) -> CVec {
    (0..m)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

/// Utility constants spread over the ranges the pipeline produces. The static
/// power contains the UAV transmit power, which is at least the pair's budget.
pub fn utility_instance(rng: &mut impl Rng) -> UtilityParams {
    let g_ce = log_uniform(rng, 0.01, 20.0);
    let p_max = log_uniform(rng, 0.5, 40.0);
    UtilityParams {
        g_cc: g_ce * log_uniform(rng, 1.0, 50.0),
        g_ce,
        ps: p_max * log_uniform(rng, 1.0, 8.0) + rng.random_range(0.3..1.0),
        kappa: log_uniform(rng, 0.005, 0.2),
        p_max,
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

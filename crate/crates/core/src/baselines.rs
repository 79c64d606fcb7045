//! Comparison schemes and the grid oracle.

use serde::{Deserialize, Serialize};

use crate::bcd::{run_algorithm4, BcdOptions, BcdResult};
use crate::error::{Error, Result};
use crate::linklayer::{self, Access, Allocation, EEReport, LinkState};
use crate::params::PowerSupply;
use crate::scenario::Scenario;

/// Largest grid the exhaustive search will walk.
pub const ES_LIMIT: u128 = 100_000_000;
/// Largest pair count the exhaustive search accepts.
pub const ES_MAX_PAIRS: usize = 3;

/// Fractional power split `α_k ∝ g_k^-η`, normalized to sum to one.
pub fn etpa_coefficients(g_cc: f64, g_ce: f64, eta: f64) -> (f64, f64) {
    let a = g_cc.powf(-eta);
    let b = g_ce.powf(-eta);
    (a / (a + b), b / (a + b))
}

/// Pipeline with each pair member on an orthogonal half of the pair's resource.
pub fn oma_ee(scenario: &Scenario, options: &BcdOptions) -> Result<BcdResult> {
    let options = BcdOptions {
        access: Access::Oma,
        ..options.clone()
    };
    run_algorithm4(scenario, &options)
}

/// Pipeline on a battery with transmit power `p_t` and no charging phase.
pub fn no_eh_ee(scenario: &Scenario, options: &BcdOptions, p_t: f64) -> Result<BcdResult> {
    let mut params = scenario.params.clone();
    params.supply = PowerSupply::Battery { p_t };
    let s = scenario.with_params(params)?;
    run_algorithm4(&s, options)
}

/// Point counts per axis of the exhaustive search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Values of `α_cc` per pair, spread over `[0, 1/2]`.
    pub alpha: usize,
    /// Values of `p_n` per pair, spread over `[0, P_T(τ)]`.
    pub power: usize,
    /// Interior values of `τ`, `T i / (k + 1)` for `i = 1..=k`.
    pub tau: usize,
    /// Values per horizontal axis, spread over the box edges included.
    pub xy: usize,
}

impl GridSpec {
    /// Size of the full Cartesian product.
    pub fn points(&self, pairs: usize) -> u128 {
        let per_pair = (self.alpha as u128) * (self.power as u128);
        per_pair.pow(pairs as u32) * self.tau as u128 * (self.xy as u128).pow(2)
    }

    /// Evaluations actually performed: the rate of each pair depends on its own
    /// `(α, p)` only, so pairs are maximized separately before combining powers.
    pub fn work(&self, pairs: usize) -> u128 {
        let per_pair = (pairs as u128) * (self.alpha as u128) * (self.power as u128);
        let combos = (self.power as u128).pow(pairs as u32);
        (per_pair + combos) * self.tau as u128 * (self.xy as u128).pow(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsResult {
    pub alloc: Allocation,
    pub xy: [f64; 2],
    #[serde(rename = "EE")]
    pub ee: f64,
    pub report: EEReport,
    pub work: u128,
}

fn spread(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
}

/// Best feasible NOMA allocation and position on the grid; `Ok(None)` if no
/// grid point is feasible.
pub fn exhaustive_search(scenario: &Scenario, grid: &GridSpec) -> Result<Option<EsResult>> {
    let params = &scenario.params;
    let n = params.pairs;
    if n > ES_MAX_PAIRS {
        return Err(Error::InvalidParams(format!(
            "exhaustive search supports at most {ES_MAX_PAIRS} pairs, got {n}"
        )));
    }
    let work = grid.work(n);
    if work > ES_LIMIT {
        return Err(Error::GridTooLarge {
            points: work,
            limit: ES_LIMIT,
        });
    }
    if grid.alpha == 0 || grid.power == 0 || grid.tau == 0 || grid.xy == 0 {
        return Err(Error::InvalidParams("every grid axis needs at least one point".into()));
    }
    let area = params.area;
    let alphas = spread(0.0, 0.5, grid.alpha);
    let taus: Vec<f64> = (1..=grid.tau)
        .map(|i| params.cycle * i as f64 / (grid.tau + 1) as f64)
        .collect();
    let b = params.bandwidth;
    let r_min = params.r_min;

    let mut best: Option<(f64, Allocation, [f64; 2])> = None;
    for x in spread(area.x_min, area.x_max, grid.xy) {
        for y in spread(area.y_min, area.y_max, grid.xy) {
            let xy = [x, y];
            let Ok(link) = LinkState::at(scenario, xy) else {
                continue;
            };
            for &tau in &taus {
                let p_t = linklayer::tx_power(tau, link.beacon_gain, params)?;
                let budget = params.uav_power_cap.map_or(p_t, |c| c.min(p_t));
                let powers = spread(0.0, p_t, grid.power);
                // best (rate, α_cc) for every pair and power level
                let table: Vec<Vec<Option<(f64, f64)>>> = (0..n)
                    .map(|k| {
                        let (gs, gw) = (link.strong_gain(k), link.weak_gain(k));
                        powers
                            .iter()
                            .map(|&p| {
                                if params.pair_power_cap.is_some_and(|c| p > c) {
                                    return None;
                                }
                                let mut top: Option<(f64, f64)> = None;
                                for &a in &alphas {
                                    let rc = linklayer::rate(linklayer::cc_snr(a, p, gs), b);
                                    let re = linklayer::rate(linklayer::ce_sinr(a, 1.0 - a, p, gw), b);
                                    if rc < r_min || re < r_min {
                                        continue;
                                    }
                                    if top.is_none_or(|(v, _)| rc + re > v) {
                                        top = Some((rc + re, a));
                                    }
                                }
                                top
                            })
                            .collect()
                    })
                    .collect();
                let (e_sum, _) = linklayer::system_energy(&Allocation::uniform(n, 0.0, tau), params, link.beacon_gain)?;
                let scale = (params.cycle - tau) / e_sum;
                let mut idx = vec![0usize; n];
                loop {
                    let p: Vec<f64> = idx.iter().map(|&i| powers[i]).collect();
                    let total: f64 = p.iter().sum();
                    let picks: Option<Vec<(f64, f64)>> = (0..n).map(|k| table[k][idx[k]]).collect();
                    if let Some(picks) = picks {
                        let within_caps = total <= budget * (1.0 + 1e-12)
                            && params
                                .p_antenna
                                .is_none_or(|cap| link.antenna_powers(&p).iter().all(|v| *v <= cap * (1.0 + 1e-12)));
                        if within_caps {
                            let ee = scale * picks.iter().map(|(r, _)| r).sum::<f64>();
                            if best.as_ref().is_none_or(|(v, _, _)| ee > *v) {
                                let alpha_cc: Vec<f64> = picks.iter().map(|(_, a)| *a).collect();
                                let alloc = Allocation {
                                    alpha_ce: alpha_cc.iter().map(|a| 1.0 - a).collect(),
                                    alpha_cc,
                                    p,
                                    tau,
                                    access: Access::Noma,
                                };
                                best = Some((ee, alloc, xy));
                            }
                        }
                    }
                    // odometer over the power indices
                    let mut k = 0;
                    while k < n {
                        idx[k] += 1;
                        if idx[k] < powers.len() {
                            break;
                        }
                        idx[k] = 0;
                        k += 1;
                    }
                    if k == n {
                        break;
                    }
                }
            }
        }
    }
    let Some((_, alloc, xy)) = best else { return Ok(None) };
    let link = LinkState::at(scenario, xy)?;
    let report = linklayer::evaluate(&link, params, &alloc, xy)?;
    Ok(Some(EsResult {
        ee: report.ee,
        alloc,
        xy,
        report,
        work,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn etpa_examples() {
        assert_eq!(etpa_coefficients(3.0, 0.2, 0.0), (0.5, 0.5));
        let (a, b) = etpa_coefficients(4.0, 1.0, 1.0);
        assert!((a - 0.2).abs() < 1e-15 && (b - 0.8).abs() < 1e-15);
        let (a, b) = etpa_coefficients(2.0, 0.5, 0.7);
        assert!(a < b);
    }

    #[test]
    fn grid_counts() {
        let g = GridSpec {
            alpha: 21,
            power: 21,
            tau: 11,
            xy: 11,
        };
        assert_eq!(g.points(2), 441 * 441 * 11 * 121);
        assert_eq!(g.work(2), (2 * 441 + 441) * 11 * 121);
    }
}

//! Zero-forcing precoding, cell-edge combining, per-user SINRs, throughput,
//! energy accounting and energy efficiency.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{self, hover_power};
use crate::error::{Constraint, Error, Result};
use crate::linalg::{self, CVec};
use crate::params::{PowerSupply, SystemParams};
use crate::scenario::Scenario;

const BASIS_TOL: f64 = 1e-12;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub columns: Vec<CVec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinerSet {
    pub w_cc: Vec<Complex64>,
    pub v_ce: Vec<CVec>,
    pub w_ce: Vec<Complex64>,
}

/// Unit vector along the part of `own` orthogonal to `others`.
fn null_space_direction(own: &[Complex64], others: &[&[Complex64]], pair: usize, what: &'static str) -> Result<CVec> {
    let basis = linalg::orthonormal_basis(others.iter().copied(), BASIS_TOL);
    if basis.len() >= own.len() {
        return Err(Error::RankDeficient { pair, what });
    }
    let r = linalg::project_out(own, &basis);
    let rn = linalg::norm(&r);
    if !(rn > BASIS_TOL * linalg::norm(own).max(f64::MIN_POSITIVE)) {
        return Err(Error::RankDeficient { pair, what });
    }
    Ok(linalg::scale(&r, Complex64::new(1.0 / rn, 0.0)))
}

/// Column `n` lies in the null space of the other pairs' effective CC channels
/// `w_cc[m] h_m` and maximizes the own effective gain.
pub fn zf_precoders(cc_channels: &[CVec], w_cc: &[Complex64]) -> Result<Precoder> {
    let g: Vec<CVec> = cc_channels
        .iter()
        .zip(w_cc)
        .map(|(h, w)| linalg::scale(h, *w))
        .collect();
    let columns = (0..g.len())
        .map(|n| {
            let others: Vec<&[Complex64]> = (0..g.len()).filter(|&m| m != n).map(|m| g[m].as_slice()).collect();
            null_space_direction(&g[n], &others, n, "precoder")
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Precoder { columns })
}

/// Combiners of the CE users against `g_m = h_m h_m^H q_m`, `m != n`.
pub fn ce_combiners(ce_channels: &[CVec], precoder: &Precoder) -> Result<CombinerSet> {
    let n_pairs = ce_channels.len();
    let g: Vec<CVec> = ce_channels
        .iter()
        .zip(&precoder.columns)
        .map(|(h, q)| linalg::scale(h, linalg::inner(h, q)))
        .collect();
    let mut v_ce = Vec::with_capacity(n_pairs);
    let mut w_ce = Vec::with_capacity(n_pairs);
    for n in 0..n_pairs {
        let others: Vec<&[Complex64]> = (0..n_pairs).filter(|&m| m != n).map(|m| g[m].as_slice()).collect();
        let v = null_space_direction(&ce_channels[n], &others, n, "combiner")?;
        w_ce.push(linalg::inner(&ce_channels[n], &v));
        v_ce.push(v);
    }
    Ok(CombinerSet {
        w_cc: vec![Complex64::new(1.0, 0.0); n_pairs],
        v_ce,
        w_ce,
    })
}

/// Precoders, combiners and effective gains for one UAV position.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub precoder: Precoder,
    pub combiners: CombinerSet,
    /// `|h_{n,1}^H q_n|^2` of the cell-center user.
    pub eff_gain_cc: Vec<f64>,
    /// `|h_{n,2}^H q_n|^2` of the cell-edge user.
    pub eff_gain_ce: Vec<f64>,
    /// Pairs whose CE user ended up with the stronger effective channel; the
    /// SIC role then moves to the CE user.
    pub swapped: Vec<bool>,
    /// `||H_PU W_PU||^2` at this position.
    pub beacon_gain: f64,
}

impl LinkState {
    pub fn build(scenario: &Scenario) -> Result<Self> {
        Self::at(scenario, scenario.uav_xy)
    }

    pub fn at(scenario: &Scenario, xy: [f64; 2]) -> Result<Self> {
        let params = &scenario.params;
        let uav = [xy[0], xy[1], params.altitude];
        let mut h_cc = Vec::with_capacity(scenario.pairs.len());
        let mut h_ce = Vec::with_capacity(scenario.pairs.len());
        for n in 0..scenario.pairs.len() {
            let (cc, ce) = scenario.pair_members(n);
            h_cc.push(channel::user_channel(uav, cc, params).h);
            h_ce.push(channel::user_channel(uav, ce, params).h);
        }
        let w_cc = vec![Complex64::new(1.0, 0.0); h_cc.len()];
        let precoder = zf_precoders(&h_cc, &w_cc)?;
        let combiners = ce_combiners(&h_ce, &precoder)?;
        let gain = |h: &[CVec]| -> Vec<f64> {
            h.iter()
                .zip(&precoder.columns)
                .map(|(h, q)| linalg::inner(h, q).norm_sqr())
                .collect()
        };
        let eff_gain_cc = gain(&h_cc);
        let eff_gain_ce = gain(&h_ce);
        let swapped = eff_gain_cc.iter().zip(&eff_gain_ce).map(|(a, b)| a < b).collect();
        Ok(Self {
            precoder,
            combiners,
            eff_gain_cc,
            eff_gain_ce,
            swapped,
            beacon_gain: channel::beacon_gain(uav, params),
        })
    }

    pub fn pairs(&self) -> usize {
        self.eff_gain_cc.len()
    }

    /// Effective gain of the SIC (stronger) user of pair `n`.
    pub fn strong_gain(&self, n: usize) -> f64 {
        self.eff_gain_cc[n].max(self.eff_gain_ce[n])
    }

    /// Effective gain of the non-SIC (weaker) user of pair `n`.
    pub fn weak_gain(&self, n: usize) -> f64 {
        self.eff_gain_cc[n].min(self.eff_gain_ce[n])
    }

    /// `Σ_n p_n |q_n[ι]|^2` for every antenna ι.
    pub fn antenna_powers(&self, p: &[f64]) -> Vec<f64> {
        let m = self.precoder.columns.first().map_or(0, |q| q.len());
        let mut out = vec![0.0; m];
        for (q, pn) in self.precoder.columns.iter().zip(p) {
            for (o, x) in out.iter_mut().zip(q) {
                *o += pn * x.norm_sqr();
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    /// Superposition coding with SIC inside each pair.
    #[default]
    Noma,
    /// Each pair member gets an orthogonal half of the pair's resource.
    Oma,
}

/// Resource allocation; `alpha_cc` is the share of the SIC user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub p: Vec<f64>,
    pub alpha_cc: Vec<f64>,
    pub alpha_ce: Vec<f64>,
    pub tau: f64,
    #[serde(default)]
    pub access: Access,
}

impl Allocation {
    pub fn uniform(pairs: usize, p_each: f64, tau: f64) -> Self {
        Self {
            p: vec![p_each; pairs],
            alpha_cc: vec![0.5; pairs],
            alpha_ce: vec![0.5; pairs],
            tau,
            access: Access::Noma,
        }
    }

    pub fn total_power(&self) -> f64 {
        self.p.iter().sum()
    }
}

pub fn cc_snr(alpha_cc: f64, p: f64, eff_gain_cc: f64) -> f64 {
    alpha_cc * p * eff_gain_cc
}

pub fn ce_sinr(alpha_cc: f64, alpha_ce: f64, p: f64, eff_gain_ce: f64) -> f64 {
    alpha_ce * p * eff_gain_ce / (1.0 + alpha_cc * p * eff_gain_ce)
}

/// `B log2(1 + γ)`
pub fn rate(sinr: f64, bandwidth: f64) -> f64 {
    bandwidth * sinr.ln_1p() / std::f64::consts::LN_2
}

/// Instantaneous rates (SIC user, other user) of pair `n`, in bit/s/Hz.
pub fn pair_rates(link: &LinkState, alloc: &Allocation, n: usize, bandwidth: f64) -> (f64, f64) {
    let (gs, gw, p) = (link.strong_gain(n), link.weak_gain(n), alloc.p[n]);
    match alloc.access {
        Access::Noma => (
            rate(cc_snr(alloc.alpha_cc[n], p, gs), bandwidth),
            rate(ce_sinr(alloc.alpha_cc[n], alloc.alpha_ce[n], p, gw), bandwidth),
        ),
        Access::Oma => (0.5 * rate(p * gs, bandwidth), 0.5 * rate(p * gw, bandwidth)),
    }
}

/// `(T - τ) Σ_n (R_cc + R_ce)`
pub fn sum_throughput(link: &LinkState, alloc: &Allocation, params: &SystemParams) -> f64 {
    let per_cycle: f64 = (0..link.pairs())
        .map(|n| {
            let (a, b) = pair_rates(link, alloc, n, params.bandwidth);
            a + b
        })
        .sum();
    (params.cycle - alloc.tau) * per_cycle
}

/// UAV transmit power available after the charging phase.
pub fn tx_power(tau: f64, link_gain: f64, params: &SystemParams) -> Result<f64> {
    match params.supply {
        PowerSupply::Harvest => channel::harvested_tx_power(tau, link_gain, params),
        PowerSupply::Battery { p_t } => {
            if !(0.0..params.cycle).contains(&tau) {
                return Err(Error::InvalidWptTime {
                    tau,
                    cycle: params.cycle,
                });
            }
            Ok(p_t)
        }
    }
}

/// Energy per cycle (J), split by consumer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// RF chains of the beacon during charging, `M P_a τ`.
    pub beacon: f64,
    /// Radiated beacon energy `P τ`; counted in the total only when enabled.
    pub beacon_radiated: f64,
    pub uav_tx: f64,
    pub uav_rf: f64,
    pub hover: f64,
    pub users: f64,
}

/// Static power of everything except the beacon: `P_T + M P_a + P_prop(0) + 2N P_user`.
pub fn static_power(p_t: f64, params: &SystemParams) -> f64 {
    p_t + params.antennas as f64 * params.p_a + hover_power(&params.rotor) + params.users_power()
}

pub fn system_energy(alloc: &Allocation, params: &SystemParams, link_gain: f64) -> Result<(f64, EnergyBreakdown)> {
    let p_t = tx_power(alloc.tau, link_gain, params)?;
    Ok(energy_with_tx_power(alloc.tau, p_t, params))
}

pub(crate) fn energy_with_tx_power(tau: f64, p_t: f64, params: &SystemParams) -> (f64, EnergyBreakdown) {
    let t = params.cycle;
    let rf = params.antennas as f64 * params.p_a;
    let b = EnergyBreakdown {
        beacon: rf * tau,
        beacon_radiated: params.p_beacon * tau,
        uav_tx: p_t * t,
        uav_rf: rf * t,
        hover: hover_power(&params.rotor) * t,
        users: params.users_power() * t,
    };
    let radiated = if params.include_beacon_energy {
        b.beacon_radiated
    } else {
        0.0
    };
    let total = b.beacon + radiated + b.uav_tx + b.uav_rf + b.hover + b.users;
    (total, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct Feasibility {
    pub C1: bool,
    pub C2: bool,
    pub C3: bool,
    pub C4: bool,
    pub C5: bool,
    pub C6: bool,
    pub C7: bool,
    pub C8: bool,
}

impl Feasibility {
    pub fn get(&self, c: Constraint) -> bool {
        match c {
            Constraint::C1 => self.C1,
            Constraint::C2 => self.C2,
            Constraint::C3 => self.C3,
            Constraint::C4 => self.C4,
            Constraint::C5 => self.C5,
            Constraint::C6 => self.C6,
            Constraint::C7 => self.C7,
            Constraint::C8 => self.C8,
        }
    }

    pub fn violations(&self) -> Vec<Constraint> {
        use Constraint::*;
        [C1, C2, C3, C4, C5, C6, C7, C8]
            .into_iter()
            .filter(|c| !self.get(*c))
            .collect()
    }

    pub fn all(&self) -> bool {
        self.violations().is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRates {
    /// Rate of the SIC user.
    pub cc: f64,
    pub ce: f64,
    pub swapped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EEReport {
    #[serde(rename = "R_sum")]
    pub r_sum: f64,
    #[serde(rename = "E_sum")]
    pub e_sum: f64,
    #[serde(rename = "EE")]
    pub ee: f64,
    /// UAV transmit power `P_T` (W).
    pub p_t: f64,
    pub pair_rates: Vec<PairRates>,
    pub energy: EnergyBreakdown,
    pub feasibility: Feasibility,
    /// EE after each round of the producing algorithm, if any.
    #[serde(default)]
    pub trace: Vec<f64>,
}

fn within(x: f64, bound: f64) -> bool {
    x <= bound + FEAS_TOL * bound.abs().max(1.0)
}

/// Full report for `alloc` over a prebuilt link state at `uav_xy`.
pub fn evaluate(link: &LinkState, params: &SystemParams, alloc: &Allocation, uav_xy: [f64; 2]) -> Result<EEReport> {
    let (e_sum, energy) = system_energy(alloc, params, link.beacon_gain)?;
    let p_t = energy.uav_tx / params.cycle;
    let pair_rates: Vec<PairRates> = (0..link.pairs())
        .map(|n| {
            let (cc, ce) = pair_rates(link, alloc, n, params.bandwidth);
            PairRates {
                cc,
                ce,
                swapped: link.swapped[n],
            }
        })
        .collect();
    let r_sum = (params.cycle - alloc.tau) * pair_rates.iter().map(|r| r.cc + r.ce).sum::<f64>();

    let total = alloc.total_power();
    let c1 = alloc.p.iter().all(|p| *p >= 0.0)
        && within(total, p_t)
        && params.uav_power_cap.is_none_or(|cap| within(total, cap))
        && params
            .pair_power_cap
            .is_none_or(|cap| alloc.p.iter().all(|p| within(*p, cap)));
    let r_min = params.r_min;
    let rate_ok = |r: f64| r >= r_min - FEAS_TOL * r_min.max(1.0);
    let c7 = alloc.alpha_cc.iter().zip(&alloc.alpha_ce).all(|(a, b)| {
        *a >= 0.0
            && *b >= 0.0
            && (a + b - 1.0).abs() <= FEAS_TOL
            && (alloc.access == Access::Oma || *a <= *b + FEAS_TOL)
    });
    let feasibility = Feasibility {
        C1: c1,
        C2: (0.0..=params.cycle).contains(&alloc.tau),
        C3: pair_rates.iter().all(|r| rate_ok(r.cc)),
        C4: pair_rates.iter().all(|r| rate_ok(r.ce)),
        C5: (params.area.x_min..=params.area.x_max).contains(&uav_xy[0]),
        C6: (params.area.y_min..=params.area.y_max).contains(&uav_xy[1]),
        C7: c7,
        C8: params
            .p_antenna
            .is_none_or(|cap| link.antenna_powers(&alloc.p).iter().all(|x| within(*x, cap))),
    };
    Ok(EEReport {
        r_sum,
        e_sum,
        ee: r_sum / e_sum,
        p_t,
        pair_rates,
        energy,
        feasibility,
        trace: Vec::new(),
    })
}

/// Builds the link state at the scenario's UAV position and reports on `alloc`.
pub fn system_ee(scenario: &Scenario, alloc: &Allocation) -> Result<EEReport> {
    let link = LinkState::build(scenario)?;
    evaluate(&link, &scenario.params, alloc, scenario.uav_xy)
}

/// Reports an allocation that failed a feasibility check as a structured error.
pub fn require_feasible(report: &EEReport) -> Result<()> {
    match report.feasibility.violations().first() {
        None => Ok(()),
        Some(c) => Err(Error::infeasible(*c, None, "allocation violates the constraint")),
    }
}

//! Inter-pair power and WPT time allocation at fixed intra-pair coefficients
//! and UAV position, by successive lower-bound maximization.
//!
//! The rate of the other user splits as
//! `log2(1 + p g) - log2(1 + α_cc p g)`; the subtracted term is the only
//! non-concave piece and is replaced by its tangent at the expansion point.
//!
//! The total energy does not depend on the powers, and for fixed powers the
//! EE falls with `τ`. With a free WPT time the harvest constraint is therefore
//! tight, `τ = T Σp / (Σp + c)` with `c = |H W|^2 P ξ`, and the subproblem
//! reduces to the power vector alone.

use serde::{Deserialize, Serialize};

use crate::error::{Constraint, Error, Result};
use crate::linklayer::{self, Access, Allocation, LinkState};
use crate::numfmt::sig10;
use crate::params::{PowerSupply, SystemParams};
use crate::projection::Polytope;

/// Guard keeping `τ` away from the `P_T` singularity at `T`, as a fraction of `T`.
pub const TAU_GUARD: f64 = 1e-6;
const INNER_MAX: usize = 5000;
const INNER_TOL: f64 = 1e-7;
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauMode {
    /// `τ` is optimized jointly with the powers.
    Free,
    /// `τ` is held at the given value.
    Fixed(f64),
}

/// One subproblem instance: coefficients, link and the handling of `τ`.
#[derive(Debug, Clone)]
pub struct ScaProblem<'a> {
    pub link: &'a LinkState,
    pub params: &'a SystemParams,
    pub alpha_cc: &'a [f64],
    pub alpha_ce: &'a [f64],
    pub access: Access,
    pub mode: TauMode,
}

/// Smallest power that meets the rate floor of each member of every pair.
pub fn rate_lower_bounds(
    alpha_cc: &[f64],
    alpha_ce: &[f64],
    link: &LinkState,
    params: &SystemParams,
    access: Access,
) -> Result<Vec<(f64, f64)>> {
    (0..link.pairs())
        .map(|n| {
            let (gs, gw) = (link.strong_gain(n), link.weak_gain(n));
            match access {
                Access::Oma => {
                    let th = (2.0 * params.r_min / params.bandwidth).exp2() - 1.0;
                    if th == 0.0 {
                        return Ok((0.0, 0.0));
                    }
                    Ok((th / gs, th / gw))
                }
                Access::Noma => {
                    let th = params.sinr_threshold();
                    if th == 0.0 {
                        return Ok((0.0, 0.0));
                    }
                    let (ac, ae) = (alpha_cc[n], alpha_ce[n]);
                    if !(ac > 0.0 && gs > 0.0) {
                        return Err(Error::infeasible(
                            Constraint::C3,
                            Some(n),
                            "SIC user has no power share",
                        ));
                    }
                    let margin = ae - th * ac;
                    if !(margin > 0.0 && gw > 0.0) {
                        return Err(Error::infeasible(
                            Constraint::C4,
                            Some(n),
                            format!("SINR ceiling {} is below the rate threshold {th}", ae / ac),
                        ));
                    }
                    Ok((th / (ac * gs), th / (gw * margin)))
                }
            }
        })
        .collect()
}

/// Tangent of `log2(1 + a p)` at `p_ref`: (value, slope).
fn tangent(a: f64, p_ref: f64, bandwidth: f64) -> (f64, f64) {
    let ln2 = std::f64::consts::LN_2;
    (
        bandwidth * (a * p_ref).ln_1p() / ln2,
        bandwidth * a / (ln2 * (1.0 + a * p_ref)),
    )
}

fn log2_1p(x: f64, bandwidth: f64) -> f64 {
    bandwidth * x.ln_1p() / std::f64::consts::LN_2
}

impl<'a> ScaProblem<'a> {
    fn t(&self) -> f64 {
        self.params.cycle
    }

    /// `|H W|^2 P ξ`, the harvesting rate constant.
    fn harvest_const(&self) -> f64 {
        self.link.beacon_gain * self.params.p_beacon * self.params.xi
    }

    fn battery(&self) -> Option<f64> {
        match self.params.supply {
            PowerSupply::Battery { p_t } => Some(p_t),
            PowerSupply::Harvest => None,
        }
    }

    /// WPT time used with the powers `p`.
    pub fn tau_for(&self, p: &[f64]) -> f64 {
        if self.battery().is_some() {
            return match self.mode {
                TauMode::Fixed(t) => t,
                TauMode::Free => 0.0,
            };
        }
        match self.mode {
            TauMode::Fixed(t) => t,
            TauMode::Free => {
                let s: f64 = p.iter().sum();
                let c = self.harvest_const();
                if s <= 0.0 {
                    0.0
                } else {
                    (self.t() * s / (s + c)).min(self.t() * (1.0 - TAU_GUARD))
                }
            }
        }
    }

    fn tx_power(&self, tau: f64) -> Result<f64> {
        linklayer::tx_power(tau, self.link.beacon_gain, self.params)
    }

    /// Energy per cycle at `τ` with the given transmit power.
    fn energy(&self, tau: f64, p_t: f64) -> f64 {
        linklayer::energy_with_tx_power(tau, p_t, self.params).0
    }

    /// Rate sum per unit time: concave part and the subtracted part.
    fn rate_terms(&self, p: &[f64]) -> (f64, f64) {
        let b = self.params.bandwidth;
        let mut concave = 0.0;
        let mut coupling = 0.0;
        for (n, pn) in p.iter().enumerate() {
            let (gs, gw) = (self.link.strong_gain(n), self.link.weak_gain(n));
            match self.access {
                Access::Noma => {
                    let ac = self.alpha_cc[n];
                    concave += log2_1p(ac * pn * gs, b) + log2_1p(pn * gw, b);
                    coupling += log2_1p(ac * pn * gw, b);
                }
                Access::Oma => {
                    concave += 0.5 * (log2_1p(pn * gs, b) + log2_1p(pn * gw, b));
                }
            }
        }
        (concave, coupling)
    }

    fn coupling_tangent(&self, p: &[f64], p_ref: &[f64]) -> f64 {
        if self.access == Access::Oma {
            return 0.0;
        }
        p.iter()
            .zip(p_ref)
            .enumerate()
            .map(|(n, (pn, pr))| {
                let (v, s) = tangent(self.alpha_cc[n] * self.link.weak_gain(n), *pr, self.params.bandwidth);
                v + s * (pn - pr)
            })
            .sum()
    }

    /// `(T - τ) / E_sum(τ)` for the powers `p`.
    fn time_over_energy(&self, p: &[f64], tau: f64) -> Result<f64> {
        let p_t = match (self.battery(), self.mode) {
            (None, TauMode::Free) => p.iter().sum(),
            _ => self.tx_power(tau)?,
        };
        Ok((self.t() - tau) / self.energy(tau, p_t))
    }

    /// Three-term EE at explicit `(p, τ)`; equals the link-layer EE.
    pub fn exact_objective(&self, p: &[f64], tau: f64) -> Result<f64> {
        let (concave, coupling) = self.rate_terms(p);
        let p_t = self.tx_power(tau)?;
        Ok((self.t() - tau) * (concave - coupling) / self.energy(tau, p_t))
    }

    /// Exact EE with `τ` set by the mode.
    pub fn objective(&self, p: &[f64]) -> f64 {
        let tau = self.tau_for(p);
        let (concave, coupling) = self.rate_terms(p);
        match self.time_over_energy(p, tau) {
            Ok(k) => k * (concave - coupling),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// Lower bound of the EE at explicit `(p, τ)`, tight at `p = p_ref`.
    pub fn surrogate_at(&self, p: &[f64], tau: f64, p_ref: &[f64]) -> Result<f64> {
        let (concave, _) = self.rate_terms(p);
        let p_t = self.tx_power(tau)?;
        Ok((self.t() - tau) * (concave - self.coupling_tangent(p, p_ref)) / self.energy(tau, p_t))
    }

    /// Lower bound of [`Self::objective`], tight at `p = p_ref`.
    pub fn surrogate(&self, p: &[f64], p_ref: &[f64]) -> f64 {
        let tau = self.tau_for(p);
        let (concave, _) = self.rate_terms(p);
        match self.time_over_energy(p, tau) {
            Ok(k) => k * (concave - self.coupling_tangent(p, p_ref)),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// Gradient of [`Self::surrogate`] with respect to `p`.
    pub fn surrogate_gradient(&self, p: &[f64], p_ref: &[f64]) -> Vec<f64> {
        let b = self.params.bandwidth;
        let ln2 = std::f64::consts::LN_2;
        let d = |a: f64, x: f64| b * a / (ln2 * (1.0 + a * x));
        let rate_grad: Vec<f64> = p
            .iter()
            .zip(p_ref)
            .enumerate()
            .map(|(n, (pn, pr))| {
                let (gs, gw) = (self.link.strong_gain(n), self.link.weak_gain(n));
                match self.access {
                    Access::Noma => {
                        let ac = self.alpha_cc[n];
                        d(ac * gs, *pn) + d(gw, *pn) - d(ac * gw, *pr)
                    }
                    Access::Oma => 0.5 * (d(gs, *pn) + d(gw, *pn)),
                }
            })
            .collect();

        let tau = self.tau_for(p);
        let k = self.time_over_energy(p, tau).unwrap_or(0.0);
        let free_harvest = self.battery().is_none() && self.mode == TauMode::Free;
        let dk = if free_harvest && tau < self.t() * (1.0 - TAU_GUARD) {
            let s: f64 = p.iter().sum();
            let c = self.harvest_const();
            let t = self.t();
            let dtau = t * c / ((s + c) * (s + c));
            let e = self.energy(tau, s);
            let per_tau = self.params.antennas as f64 * self.params.p_a
                + if self.params.include_beacon_energy {
                    self.params.p_beacon
                } else {
                    0.0
                };
            let de = per_tau * dtau + t;
            (-dtau * e - (t - tau) * de) / (e * e)
        } else {
            0.0
        };
        let (concave, _) = self.rate_terms(p);
        let rho = concave - self.coupling_tangent(p, p_ref);
        rate_grad.iter().map(|g| k * g + dk * rho).collect()
    }

    /// Power-vector constraints: rate floors, budgets and per-antenna caps.
    pub fn region(&self) -> Result<Polytope> {
        let n = self.link.pairs();
        let bounds = rate_lower_bounds(self.alpha_cc, self.alpha_ce, self.link, self.params, self.access)?;
        let lb: Vec<f64> = bounds.iter().map(|(a, b)| a.max(*b)).collect();
        let ub = vec![self.params.pair_power_cap.unwrap_or(f64::INFINITY); n];
        let budget = match (self.battery(), self.mode) {
            (Some(p_t), _) => p_t,
            (None, TauMode::Fixed(t)) => self.tx_power(t)?,
            (None, TauMode::Free) => self.tx_power(self.t() * (1.0 - TAU_GUARD))?,
        };
        let sum_max = budget.min(self.params.uav_power_cap.unwrap_or(f64::INFINITY));
        let m = self.link.precoder.columns.first().map_or(0, |q| q.len());
        let rows: Vec<Vec<f64>> = (0..m)
            .filter(|_| self.params.p_antenna.is_some())
            .map(|i| self.link.precoder.columns.iter().map(|q| q[i].norm_sqr()).collect())
            .collect();
        let region = Polytope {
            lb,
            ub,
            sum_max,
            rows,
            row_max: self.params.p_antenna.unwrap_or(f64::INFINITY),
        };
        if let Some(k) = (0..n).find(|&k| region.lb[k] > region.ub[k]) {
            return Err(Error::infeasible(
                Constraint::C1,
                Some(k),
                format!(
                    "rate floor needs {} W above the pair cap {}",
                    region.lb[k], region.ub[k]
                ),
            ));
        }
        let floor: f64 = region.lb.iter().sum();
        if floor > region.sum_max {
            return Err(Error::infeasible(
                Constraint::C1,
                None,
                format!("rate floors need {floor} W, budget is {}", region.sum_max),
            ));
        }
        if !region.contains(&region.lb, 1e-12) {
            return Err(Error::infeasible(
                Constraint::C8,
                None,
                "rate floors exceed the per-antenna cap",
            ));
        }
        Ok(region)
    }

    pub fn allocation(&self, p: &[f64]) -> Allocation {
        Allocation {
            p: p.to_vec(),
            alpha_cc: self.alpha_cc.to_vec(),
            alpha_ce: self.alpha_ce.to_vec(),
            tau: self.tau_for(p),
            access: self.access,
        }
    }
}

/// Result of the inner projected-gradient solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsolution {
    pub p: Vec<f64>,
    pub tau: f64,
    pub iterations: usize,
}

/// Maximizes the surrogate around `p_ref` over `region` by projected gradient
/// ascent with Armijo backtracking, starting from `p_ref`.
pub fn solve_subproblem(problem: &ScaProblem<'_>, region: &Polytope, p_ref: &[f64]) -> Subsolution {
    let mut x = region.project(p_ref);
    let mut fx = problem.surrogate(&x, p_ref);
    let mut step: f64 = 1.0;
    let mut iterations = 0;
    while iterations < INNER_MAX {
        iterations += 1;
        let g = problem.surrogate_gradient(&x, p_ref);
        let unit: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + b).collect();
        let pg = region.project(&unit);
        let pg_norm = pg.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if pg_norm < INNER_TOL {
            break;
        }
        let mut accepted = false;
        step = (step * 4.0).min(1e6);
        while step > 1e-16 {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            let y = region.project(&trial);
            let fy = problem.surrogate(&y, p_ref);
            let lin: f64 = g
                .iter()
                .zip(y.iter().zip(&x))
                .map(|(gi, (yi, xi))| gi * (yi - xi))
                .sum();
            if fy >= fx + ARMIJO * lin && fy >= fx {
                accepted = y != x;
                x = y;
                fx = fy;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let tau = problem.tau_for(&x);
    Subsolution { p: x, tau, iterations }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaIterate {
    pub j: usize,
    pub tau: f64,
    pub p: Vec<f64>,
    pub exact: f64,
    /// Surrogate value at this iterate around the previous expansion point.
    pub surrogate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaResult {
    pub p: Vec<f64>,
    pub tau: f64,
    pub ee: f64,
    pub converged: bool,
    pub inner_iterations: usize,
    pub trace: Vec<ScaIterate>,
}

impl ScaResult {
    /// `j,tau,p_1..p_N,exact_EE,surrogate_EE` rows with a header line.
    pub fn trace_csv(&self) -> String {
        let n = self.p.len();
        let mut out = String::from("j,tau");
        for k in 1..=n {
            out.push_str(&format!(",p_{k}"));
        }
        out.push_str(",exact_EE,surrogate_EE\n");
        for it in &self.trace {
            out.push_str(&format!("{},{}", it.j, sig10(it.tau)));
            for p in &it.p {
                out.push_str(&format!(",{}", sig10(*p)));
            }
            out.push_str(&format!(",{},{}\n", sig10(it.exact), sig10(it.surrogate)));
        }
        out
    }
}

/// Equal split of `P_T(T/2)` (capped by the budgets), raised to the rate floors.
pub fn default_init(problem: &ScaProblem<'_>, region: &Polytope) -> Result<Vec<f64>> {
    let n = region.dim();
    let tau0 = match problem.battery() {
        Some(_) => 0.0,
        None => match problem.mode {
            TauMode::Fixed(t) => t,
            TauMode::Free => problem.t() / 2.0,
        },
    };
    let total = problem.tx_power(tau0)?.min(region.sum_max);
    let share = total / n as f64;
    let raw: Vec<f64> = region.lb.iter().map(|l| l.max(share)).collect();
    Ok(region.project(&raw))
}

/// Successive lower-bound maximization until the exact objective moves by at
/// most `tol` or `max_iter` subproblems have been solved.
pub fn run_algorithm2(problem: &ScaProblem<'_>, init: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<ScaResult> {
    let region = problem.region()?;
    let mut p = match init {
        Some(p0) => region.project(p0),
        None => default_init(problem, &region)?,
    };
    let mut f = problem.objective(&p);
    let mut trace = vec![ScaIterate {
        j: 0,
        tau: problem.tau_for(&p),
        p: p.clone(),
        exact: f,
        surrogate: f,
    }];
    let mut converged = false;
    let mut inner_iterations = 0;
    for j in 1..=max_iter {
        let sub = solve_subproblem(problem, &region, &p);
        inner_iterations += sub.iterations;
        let f_next = problem.objective(&sub.p);
        let surrogate = problem.surrogate(&sub.p, &p);
        let delta = f_next - f;
        trace.push(ScaIterate {
            j,
            tau: sub.tau,
            p: sub.p.clone(),
            exact: f_next,
            surrogate,
        });
        if f_next >= f {
            p = sub.p;
            f = f_next;
        }
        if delta.abs() <= tol {
            converged = true;
            break;
        }
    }
    Ok(ScaResult {
        tau: problem.tau_for(&p),
        p,
        ee: f,
        converged,
        inner_iterations,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Scenario;

    fn setup(seed: u64, params: SystemParams) -> (Scenario, LinkState) {
        let s = Scenario::generate(seed, params).unwrap();
        let link = LinkState::build(&s).unwrap();
        (s, link)
    }

    #[test]
    fn zero_rate_floor_gives_zero_bounds() {
        let params = SystemParams {
            r_min: 0.0,
            ..Default::default()
        };
        let (s, link) = setup(1, params);
        let a = vec![0.3; 4];
        let b = vec![0.7; 4];
        let lb = rate_lower_bounds(&a, &b, &link, &s.params, Access::Noma).unwrap();
        assert!(lb.iter().all(|(x, y)| *x == 0.0 && *y == 0.0));
    }

    #[test]
    fn equal_split_with_large_floor_is_infeasible() {
        let params = SystemParams {
            r_min: 1.5,
            ..Default::default()
        };
        let (s, link) = setup(1, params);
        let half = vec![0.5; 4];
        let err = rate_lower_bounds(&half, &half, &link, &s.params, Access::Noma).unwrap_err();
        assert!(matches!(
            err,
            Error::Infeasible {
                constraint: Constraint::C4,
                pair: Some(0),
                ..
            }
        ));
    }

    #[test]
    fn exact_objective_matches_link_layer() {
        let (s, link) = setup(4, SystemParams::default());
        let a = vec![0.3, 0.4, 0.2, 0.45];
        let b: Vec<f64> = a.iter().map(|x| 1.0 - x).collect();
        let prob = ScaProblem {
            link: &link,
            params: &s.params,
            alpha_cc: &a,
            alpha_ce: &b,
            access: Access::Noma,
            mode: TauMode::Free,
        };
        let p = vec![0.4, 0.1, 0.25, 0.7];
        for tau in [0.05, 0.3, 0.8] {
            let mut alloc = prob.allocation(&p);
            alloc.tau = tau;
            let r = linklayer::evaluate(&link, &s.params, &alloc, s.uav_xy).unwrap();
            assert!((prob.exact_objective(&p, tau).unwrap() - r.ee).abs() < 1e-12);
        }
        let alloc = prob.allocation(&p);
        let r = linklayer::evaluate(&link, &s.params, &alloc, s.uav_xy).unwrap();
        assert!((prob.objective(&p) - r.ee).abs() < 1e-12);
        assert!((r.p_t - p.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn trace_csv_layout() {
        let (s, link) = setup(2, SystemParams::default());
        let half = vec![0.3; 4];
        let other = vec![0.7; 4];
        let prob = ScaProblem {
            link: &link,
            params: &s.params,
            alpha_cc: &half,
            alpha_ce: &other,
            access: Access::Noma,
            mode: TauMode::Free,
        };
        let res = run_algorithm2(&prob, None, 1e-9, 30).unwrap();
        let csv = res.trace_csv();
        assert!(csv.starts_with("j,tau,p_1,p_2,p_3,p_4,exact_EE,surrogate_EE\n"));
        assert_eq!(csv.lines().count(), res.trace.len() + 1);
    }
}

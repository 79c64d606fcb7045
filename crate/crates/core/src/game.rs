//! Intra-pair power split as a two-player game between the SIC user and the
//! other member of the pair, solved by alternating best responses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::sig10;

const INV_GOLDEN: f64 = 0.618_033_988_749_894_9;
/// Absolute tolerance of a best response (W).
pub const BR_TOL: f64 = 1e-8;
const SCAN_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityParams {
    /// Effective gain of the SIC user.
    pub g_cc: f64,
    /// Effective gain of the other user.
    pub g_ce: f64,
    /// Static power `P_uav + 2N P_user` (W).
    pub ps: f64,
    pub kappa: f64,
    /// Power of the pair (W).
    pub p_max: f64,
}

impl UtilityParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.g_cc > 0.0
            && self.g_ce > 0.0
            && self.g_cc >= self.g_ce
            && self.ps > 0.0
            && self.p_max > 0.0
            && self.kappa >= 0.0
            && [self.g_cc, self.g_ce, self.ps, self.kappa, self.p_max]
                .iter()
                .all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("bad utility parameters {self:?}")))
        }
    }
}

pub fn utility_cc(p_cc: f64, up: &UtilityParams) -> f64 {
    (p_cc * up.g_cc).ln_1p() / std::f64::consts::LN_2 / (p_cc + up.ps) - (up.kappa * p_cc).exp()
}

pub fn utility_ce(p_ce: f64, p_cc: f64, up: &UtilityParams) -> f64 {
    let sinr = p_ce * up.g_ce / (1.0 + p_cc * up.g_ce);
    sinr.ln_1p() / std::f64::consts::LN_2 / (p_ce + up.ps) - (up.kappa * p_ce).exp()
}

/// Smallest CE power for which the game has increasing differences.
pub fn supermodular_lower_bound(p_cc: f64, up: &UtilityParams) -> f64 {
    (up.ps * (p_cc * up.g_ce + 1.0) / up.g_ce).sqrt()
}

/// Largest CC power compatible with `p_ce`; inverse of the lower bound.
pub fn supermodular_cc_cap(p_ce: f64, up: &UtilityParams) -> f64 {
    p_ce * p_ce / up.ps - 1.0 / up.g_ce
}

/// Maximizer of `f` on `[lo, hi]` to within [`BR_TOL`].
///
/// A coarse scan picks the bracket so that a non-unimodal objective still
/// lands on its best local peak; golden-section search refines it. Exact ties
/// with an endpoint go to `lo`.
pub fn best_response(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo <= hi) {
        return Err(Error::EmptyStrategySpace { lo, hi });
    }
    if hi - lo <= BR_TOL {
        return Ok(lo);
    }
    let step = (hi - lo) / SCAN_POINTS as f64;
    let mut best_k = 0;
    let mut best_v = f(lo);
    for k in 1..=SCAN_POINTS {
        let v = f(lo + step * k as f64);
        if v > best_v {
            best_v = v;
            best_k = k;
        }
    }
    let mut a = lo + step * best_k.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_k + 1) as f64).min(hi);
    let mut x1 = b - INV_GOLDEN * (b - a);
    let mut x2 = a + INV_GOLDEN * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > BR_TOL {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_GOLDEN * (b - a);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    let (fl, fh) = (f(lo), f(hi));
    Ok(if fl >= fx && fl >= fh {
        lo
    } else if fh > fx {
        hi
    } else {
        x
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub i: usize,
    pub p_cc: f64,
    pub p_ce: f64,
    pub f_cc: f64,
    pub f_ce: f64,
}

/// Strategy bounds of both players at the current state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategySpace {
    pub lo_cc: f64,
    pub hi_cc: f64,
    pub lo_ce: f64,
    pub hi_ce: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub alpha_cc: f64,
    pub alpha_ce: f64,
    pub p_cc: f64,
    pub p_ce: f64,
    pub converged: bool,
    /// False when the increasing-differences region is empty and the game
    /// was played on the plain sum-power simplex instead.
    pub supermodular: bool,
    /// The equilibrium gave the SIC user the larger share; coefficients were
    /// moved to the (1/2, 1/2) boundary.
    pub ordering_clamped: bool,
    /// An update emptied a strategy space; the last feasible state was kept.
    pub space_emptied: bool,
    pub trace: Vec<GameState>,
}

impl GameOutcome {
    /// `iteration,p_cc,p_ce,f_cc,f_ce` rows with a header line.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,p_cc,p_ce,f_cc,f_ce\n");
        for s in &self.trace {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.i,
                sig10(s.p_cc),
                sig10(s.p_ce),
                sig10(s.f_cc),
                sig10(s.f_ce)
            ));
        }
        out
    }
}

/// Whether any CE power above the increasing-differences bound fits the pair budget.
pub fn has_supermodular_region(up: &UtilityParams) -> bool {
    supermodular_lower_bound(0.0, up) <= up.p_max
}

/// Feasible CC interval given the CE power.
pub fn cc_space(p_ce: f64, up: &UtilityParams, supermodular: bool) -> (f64, f64) {
    let mut hi = up.p_max - p_ce;
    if supermodular {
        hi = hi.min(supermodular_cc_cap(p_ce, up));
    }
    (0.0, hi.max(0.0))
}

/// Feasible CE interval given the CC power.
pub fn ce_space(p_cc: f64, up: &UtilityParams, supermodular: bool) -> (f64, f64) {
    let lo = if supermodular {
        supermodular_lower_bound(p_cc, up)
    } else {
        0.0
    };
    (lo, up.p_max - p_cc)
}

fn state(i: usize, p_cc: f64, p_ce: f64, up: &UtilityParams) -> GameState {
    GameState {
        i,
        p_cc,
        p_ce,
        f_cc: utility_cc(p_cc, up),
        f_ce: utility_ce(p_ce, p_cc, up),
    }
}

/// Alternating best responses from `p_cc = p_max / 2` until both powers move
/// by less than `eps` or `max_iter` rounds pass.
pub fn run_algorithm1(up: &UtilityParams, eps: f64, max_iter: usize) -> Result<GameOutcome> {
    up.validate()?;
    let supermodular = has_supermodular_region(up);
    let mut p_cc = up.p_max / 2.0;
    let mut p_ce = if supermodular {
        supermodular_lower_bound(p_cc, up).min(up.p_max)
    } else {
        up.p_max / 2.0
    };
    let mut trace = vec![state(0, p_cc, p_ce, up)];
    let mut converged = false;
    let mut space_emptied = false;

    for i in 1..=max_iter {
        let (lo, hi) = cc_space(p_ce, up, supermodular);
        let next_cc = best_response(|x| utility_cc(x, up), lo, hi)?;
        let (lo, hi) = ce_space(next_cc, up, supermodular);
        if lo > hi {
            space_emptied = true;
            break;
        }
        let next_ce = best_response(|x| utility_ce(x, next_cc, up), lo, hi)?;
        let moved = (next_cc - p_cc).abs().max((next_ce - p_ce).abs());
        p_cc = next_cc;
        p_ce = next_ce;
        trace.push(state(i, p_cc, p_ce, up));
        if moved < eps {
            converged = true;
            break;
        }
    }

    let total = p_cc + p_ce;
    let (mut alpha_cc, mut alpha_ce) = if total > 0.0 {
        (p_cc / total, p_ce / total)
    } else {
        (0.5, 0.5)
    };
    let ordering_clamped = total <= 0.0 || alpha_cc > alpha_ce;
    if ordering_clamped {
        alpha_cc = 0.5;
        alpha_ce = 0.5;
    }
    Ok(GameOutcome {
        alpha_cc,
        alpha_ce,
        p_cc,
        p_ce,
        converged,
        supermodular,
        ordering_clamped,
        space_emptied,
        trace,
    })
}

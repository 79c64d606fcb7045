//! Horizontal UAV placement at fixed intra-pair coefficients and powers.
//!
//! The objective is the exact EE as a function of `(x0, y0)`. Precoders,
//! combiners and the beacon gain are rebuilt at every probe. With a free WPT
//! time, `τ` follows the powers through the tight harvest constraint, so the
//! transmit power stays at `Σp` wherever the UAV goes.
//!
//! The rate floors move with the position. Each pair keeps its power margin
//! above its floor at the anchor position, so its power follows the floor and
//! every probe carries an allocation that meets the rate constraints. Ascent
//! only accepts positions where that allocation also meets the power caps.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linklayer::{self, Allocation, EEReport, LinkState};
use crate::numfmt::sig10;
use crate::params::{Area, SystemParams};
use crate::sca::{rate_lower_bounds, ScaProblem, TauMode};
use crate::scenario::Scenario;

const FD_START: f64 = 1e-3;
const FD_REL: f64 = 1e-5;
const FD_HALVINGS: usize = 12;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;
/// Gradient norm (EE per metre) below which a small EE change ends the ascent.
const GRAD_TOL: f64 = 1e-6;
/// Lattice points used as extra ascent starts.
pub const LATTICE_STARTS: usize = 4;

/// Fixed blocks seen by the placement step.
#[derive(Debug, Clone)]
pub struct PlacementProblem<'a> {
    pub scenario: &'a Scenario,
    pub alloc: &'a Allocation,
    pub mode: TauMode,
    /// Power of each pair above its rate floor at the anchor position.
    margins: Vec<f64>,
    evaluations: Cell<usize>,
}

impl<'a> PlacementProblem<'a> {
    /// Problem whose power margins are measured at `anchor`.
    pub fn new(scenario: &'a Scenario, alloc: &'a Allocation, mode: TauMode, anchor: [f64; 2]) -> Self {
        let floors = LinkState::at(scenario, anchor)
            .and_then(|link| floors(alloc, &link, &scenario.params))
            .unwrap_or_else(|_| vec![0.0; alloc.p.len()]);
        let margins = alloc.p.iter().zip(&floors).map(|(p, f)| (p - f).max(0.0)).collect();
        Self {
            scenario,
            alloc,
            mode,
            margins,
            evaluations: Cell::new(0),
        }
    }

    /// Link-state builds so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations.get()
    }

    fn params(&self) -> &SystemParams {
        &self.scenario.params
    }

    /// Allocation and report at `xy`; `τ` follows the mode.
    pub fn report(&self, xy: [f64; 2]) -> Result<(Allocation, EEReport)> {
        self.evaluations.set(self.evaluations.get() + 1);
        let link = LinkState::at(self.scenario, xy)?;
        let prob = ScaProblem {
            link: &link,
            params: self.params(),
            alpha_cc: &self.alloc.alpha_cc,
            alpha_ce: &self.alloc.alpha_ce,
            access: self.alloc.access,
            mode: self.mode,
        };
        let p: Vec<f64> = floors(self.alloc, &link, self.params())?
            .iter()
            .zip(&self.margins)
            .map(|(f, m)| f + m)
            .collect();
        let alloc = prob.allocation(&p);
        let report = linklayer::evaluate(&link, self.params(), &alloc, xy)?;
        Ok((alloc, report))
    }

    /// EE at `xy`, feasible or not; `-inf` where the link cannot be built.
    pub fn ee(&self, xy: [f64; 2]) -> f64 {
        self.report(xy).map_or(f64::NEG_INFINITY, |(_, r)| r.ee)
    }

    /// EE at `xy` if the allocation is feasible there.
    pub fn feasible_ee(&self, xy: [f64; 2]) -> Option<f64> {
        let (_, r) = self.report(xy).ok()?;
        r.feasibility.all().then_some(r.ee)
    }

    fn central(&self, xy: [f64; 2], h: f64) -> [f64; 2] {
        let dx = (self.ee([xy[0] + h, xy[1]]) - self.ee([xy[0] - h, xy[1]])) / (2.0 * h);
        let dy = (self.ee([xy[0], xy[1] + h]) - self.ee([xy[0], xy[1] - h])) / (2.0 * h);
        [dx, dy]
    }
}

fn floors(alloc: &Allocation, link: &LinkState, params: &SystemParams) -> Result<Vec<f64>> {
    let b = rate_lower_bounds(&alloc.alpha_cc, &alloc.alpha_ce, link, params, alloc.access)?;
    Ok(b.iter().map(|(x, y)| x.max(*y)).collect())
}

/// Central-difference gradient of the EE at `xy`.
///
/// The step starts at 1 mm and halves until two consecutive estimates agree
/// to a relative 1e-5; the finer of the last pair is returned.
pub fn ee_gradient(problem: &PlacementProblem<'_>, xy: [f64; 2]) -> [f64; 2] {
    let mut h = FD_START;
    let mut prev = problem.central(xy, h);
    for _ in 0..FD_HALVINGS {
        h *= 0.5;
        let next = problem.central(xy, h);
        let diff = ((next[0] - prev[0]).powi(2) + (next[1] - prev[1]).powi(2)).sqrt();
        let size = (next[0].powi(2) + next[1].powi(2)).sqrt();
        prev = next;
        if diff <= FD_REL * size || size == 0.0 {
            break;
        }
    }
    prev
}

/// Multipliers of `x0 >= x_min`, `x0 <= x_max`, `y0 >= y_min`, `y0 <= y_max`.
pub type Multipliers = [f64; 4];

/// Slacks of the four box constraints at `xy`.
pub fn box_slacks(area: &Area, xy: [f64; 2]) -> [f64; 4] {
    [
        xy[0] - area.x_min,
        area.x_max - xy[0],
        xy[1] - area.y_min,
        area.y_max - xy[1],
    ]
}

/// One projected subgradient step on the dual: `γ_i <- [γ_i - ψ_i s_i]^+`.
pub fn update_multipliers(gamma: Multipliers, area: &Area, xy: [f64; 2], steps: &[f64; 4]) -> Multipliers {
    let s = box_slacks(area, xy);
    let mut out = gamma;
    for i in 0..4 {
        out[i] = (gamma[i] - steps[i] * s[i]).max(0.0);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementStep {
    pub omega: usize,
    pub xy: [f64; 2],
    pub ee: f64,
    pub gamma: Multipliers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementResult {
    pub xy: [f64; 2],
    pub ee: f64,
    pub alloc: Allocation,
    pub converged: bool,
    /// Link-state builds spent, gradient probes included.
    pub evaluations: usize,
    pub trace: Vec<PlacementStep>,
    /// End point of every ascent, the returned one included.
    pub candidates: Vec<[f64; 2]>,
}

impl PlacementResult {
    /// `omega,x0,y0,EE,gamma_1..gamma_4` rows with a header line.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("omega,x0,y0,EE,gamma_1,gamma_2,gamma_3,gamma_4\n");
        for s in &self.trace {
            out.push_str(&format!(
                "{},{},{},{}",
                s.omega,
                sig10(s.xy[0]),
                sig10(s.xy[1]),
                sig10(s.ee)
            ));
            for g in s.gamma {
                out.push_str(&format!(",{}", sig10(g)));
            }
            out.push('\n');
        }
        out
    }
}

type Mat2 = [[f64; 2]; 2];

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn mat_vec(h: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [h[0][0] * v[0] + h[0][1] * v[1], h[1][0] * v[0] + h[1][1] * v[1]]
}

/// BFGS update of an inverse Hessian for the minimization of `-EE`, given the
/// step `s` and the change `y` of the descent gradient; `None` when the pair
/// carries no curvature information.
fn bfgs(h: Option<Mat2>, s: [f64; 2], y: [f64; 2]) -> Option<Mat2> {
    let sy = dot(s, y);
    if !(sy > 1e-14 * dot(s, s).sqrt() * dot(y, y).sqrt()) {
        return None;
    }
    let h = h.unwrap_or_else(|| {
        let g = sy / dot(y, y);
        [[g, 0.0], [0.0, g]]
    });
    let rho = 1.0 / sy;
    // (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ
    let a = [
        [1.0 - rho * s[0] * y[0], -rho * s[0] * y[1]],
        [-rho * s[1] * y[0], 1.0 - rho * s[1] * y[1]],
    ];
    let mut ah = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            ah[i][j] = a[i][0] * h[0][j] + a[i][1] * h[1][j];
        }
    }
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = ah[i][0] * a[j][0] + ah[i][1] * a[j][1] + rho * s[i] * s[j];
        }
    }
    Some(out)
}

/// Projected ascent over the box from `init`, along quasi-Newton directions
/// where the curvature estimate allows and along the gradient otherwise.
///
/// Stops when the EE moves by less than `params.tol.place` on a nearly flat
/// gradient, after `params.iters.place` steps, or when no feasible ascent
/// step is found. If `init` itself is infeasible the ascent still runs,
/// accepting any point that is feasible or improves the EE.
pub fn local_ascent(problem: &PlacementProblem<'_>, init: [f64; 2]) -> Result<PlacementResult> {
    let params = problem.params();
    let area = params.area;
    let mut xy = area.clamp(init);
    let (mut alloc, report) = problem.report(xy)?;
    let mut ee = report.ee;
    let mut feasible = report.feasibility.all();
    let mut gamma: Multipliers = [0.0; 4];
    let mut trace = vec![PlacementStep {
        omega: 0,
        xy,
        ee,
        gamma,
    }];
    let mut converged = false;
    let mut radius: f64 = 1.0;
    let mut hinv: Option<Mat2> = None;
    let mut last: Option<([f64; 2], [f64; 2])> = None;

    let try_step = |xy: [f64; 2], ee: f64, feasible: bool, g: [f64; 2], d: [f64; 2]| {
        let trial = area.clamp([xy[0] + d[0], xy[1] + d[1]]);
        if trial == xy {
            return None;
        }
        let (a, r) = problem.report(trial).ok()?;
        let lin = dot(g, [trial[0] - xy[0], trial[1] - xy[1]]);
        let ok_feas = r.feasibility.all() || !feasible;
        (ok_feas && r.ee >= ee + ARMIJO * lin && r.ee >= ee).then_some((trial, a, r))
    };

    for omega in 1..=params.iters.place {
        let mut g = ee_gradient(problem, xy);
        let slack = box_slacks(&area, xy);
        let mut clipped = false;
        if (slack[0] <= 0.0 && g[0] < 0.0) || (slack[1] <= 0.0 && g[0] > 0.0) {
            g[0] = 0.0;
            clipped = true;
        }
        if (slack[2] <= 0.0 && g[1] < 0.0) || (slack[3] <= 0.0 && g[1] > 0.0) {
            g[1] = 0.0;
            clipped = true;
        }
        let gn = dot(g, g).sqrt();
        if !(gn > 0.0) || !gn.is_finite() {
            converged = true;
            break;
        }
        if clipped {
            hinv = None;
        } else if let Some((x_old, g_old)) = last {
            let s = [xy[0] - x_old[0], xy[1] - x_old[1]];
            hinv = bfgs(hinv, s, [g_old[0] - g[0], g_old[1] - g[1]]).or(hinv);
        }
        last = (!clipped).then_some((xy, g));

        let mut accepted = None;
        if let Some(h) = hinv {
            let d = mat_vec(&h, g);
            if dot(d, g) > 0.0 {
                let mut t = 1.0;
                for _ in 0..MAX_HALVINGS {
                    accepted = try_step(xy, ee, feasible, g, [t * d[0], t * d[1]]);
                    if accepted.is_some() {
                        break;
                    }
                    t *= 0.5;
                }
            }
            if accepted.is_none() {
                hinv = None;
            }
        }
        if accepted.is_none() {
            let dir = [g[0] / gn, g[1] / gn];
            radius = (radius * 2.0).min(area.x_max - area.x_min + area.y_max - area.y_min);
            for _ in 0..MAX_HALVINGS {
                accepted = try_step(xy, ee, feasible, g, [radius * dir[0], radius * dir[1]]);
                if accepted.is_some() {
                    break;
                }
                radius *= 0.5;
            }
        }
        let Some((next, a, r)) = accepted else {
            converged = true;
            break;
        };
        let delta = r.ee - ee;
        xy = next;
        ee = r.ee;
        alloc = a;
        feasible = feasible || r.feasibility.all();
        gamma = update_multipliers(gamma, &area, xy, &params.steps);
        trace.push(PlacementStep { omega, xy, ee, gamma });
        if delta.abs() < params.tol.place && gn < GRAD_TOL {
            converged = true;
            break;
        }
    }
    Ok(PlacementResult {
        xy,
        ee,
        alloc,
        converged,
        evaluations: problem.evaluations(),
        trace,
        candidates: vec![xy],
    })
}

/// Placement from `init`, globalized by a lattice scan.
///
/// The EE surface has one local peak per sidelobe crossing, so ascent from a
/// single start stalls far from the best position. With
/// `params.place_lattice = k >= 2`, the best [`LATTICE_STARTS`] feasible points
/// of a `k x k` lattice over the box are extra starts; the best ascent wins.
/// The first trace entry is always `init`.
pub fn run_algorithm3(problem: &PlacementProblem<'_>, init: [f64; 2]) -> Result<PlacementResult> {
    let mut best = local_ascent(problem, init)?;
    let k = problem.params().place_lattice;
    if k < 2 {
        return Ok(best);
    }
    let head = best.trace[0].clone();
    let mut best_feasible = problem.feasible_ee(head.xy).is_some();
    let mut starts = lattice(problem, k);
    starts.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut candidates = best.candidates.clone();
    for (xy, _) in starts.into_iter().take(LATTICE_STARTS) {
        let mut alt = local_ascent(problem, xy)?;
        candidates.push(alt.xy);
        if alt.ee > best.ee || !best_feasible {
            best_feasible = true;
            for step in alt.trace.iter_mut() {
                step.omega += 1;
            }
            alt.trace.insert(0, head.clone());
            best = alt;
        }
    }
    best.evaluations = problem.evaluations();
    best.candidates = candidates;
    Ok(best)
}

/// Feasible lattice points with their EE, `k x k` over the box.
pub fn lattice(problem: &PlacementProblem<'_>, k: usize) -> Vec<([f64; 2], f64)> {
    let area = problem.params().area;
    let coord = |lo: f64, hi: f64, i: usize| {
        if k <= 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (k - 1) as f64
        }
    };
    let mut out = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let xy = [coord(area.x_min, area.x_max, i), coord(area.y_min, area.y_max, j)];
            if let Some(v) = problem.feasible_ee(xy) {
                out.push((xy, v));
            }
        }
    }
    out
}

/// Best feasible EE over a `k x k` lattice of the box, with its position.
pub fn grid_search(problem: &PlacementProblem<'_>, k: usize) -> Option<([f64; 2], f64)> {
    lattice(problem, k).into_iter().fold(None, |best, (xy, v)| match best {
        Some((_, b)) if b >= v => best,
        _ => Some((xy, v)),
    })
}

//! Figure-analogue experiments and the schemes they compare.

use std::cmp::Ordering;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use toml::Table;
use uavnoma::baselines::{exhaustive_search, no_eh_ee};
use uavnoma::bcd::{run_algorithm4, AlphaRule, BcdOptions, BcdResult};
use uavnoma::placement::PlacementProblem;
use uavnoma::sca::{run_algorithm2, ScaProblem, TauMode};
use uavnoma::{Access, Error, LinkState, Scenario, SystemParams};

use crate::config::{Config, ConfigError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// NOMA with the game split and placement: the proposed pipeline.
    NomaLd,
    /// NOMA with the UAV held at the start position.
    Noma,
    OmaLd,
    Oma,
    /// Battery-powered UAV at the transmit power the proposed run harvested.
    NoEh,
    /// Fractional power split in place of the game, with placement.
    EtpaLd,
    /// Grid search over splits, powers, WPT time and position.
    Es,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::NomaLd,
        Scheme::Noma,
        Scheme::OmaLd,
        Scheme::Oma,
        Scheme::NoEh,
        Scheme::EtpaLd,
        Scheme::Es,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::NomaLd => "noma_ld",
            Scheme::Noma => "noma",
            Scheme::OmaLd => "oma_ld",
            Scheme::Oma => "oma",
            Scheme::NoEh => "no_eh",
            Scheme::EtpaLd => "etpa_ld",
            Scheme::Es => "es",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, ConfigError> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown scheme `{name}`")))
    }

    fn options(self) -> BcdOptions {
        let base = BcdOptions::default();
        match self {
            Scheme::NomaLd | Scheme::NoEh | Scheme::Es => base,
            Scheme::Noma => BcdOptions {
                placement: false,
                ..base
            },
            Scheme::OmaLd => BcdOptions {
                access: Access::Oma,
                ..base
            },
            Scheme::Oma => BcdOptions {
                access: Access::Oma,
                placement: false,
                ..base
            },
            Scheme::EtpaLd => BcdOptions {
                alpha: AlphaRule::Etpa,
                ..base
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    Fig3Users,
    Fig4BeaconPower,
    Fig5UavPower,
    Fig6UserPower,
    Fig7Antennas,
    Fig8Convergence,
    Fig9Altitude,
    Fig10Tau,
    Fig11PlacementHeatmap,
    Fig12EsGap,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Fig3Users,
        Experiment::Fig4BeaconPower,
        Experiment::Fig5UavPower,
        Experiment::Fig6UserPower,
        Experiment::Fig7Antennas,
        Experiment::Fig8Convergence,
        Experiment::Fig9Altitude,
        Experiment::Fig10Tau,
        Experiment::Fig11PlacementHeatmap,
        Experiment::Fig12EsGap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig3Users => "fig3_users",
            Experiment::Fig4BeaconPower => "fig4_beacon_power",
            Experiment::Fig5UavPower => "fig5_uav_power",
            Experiment::Fig6UserPower => "fig6_user_power",
            Experiment::Fig7Antennas => "fig7_antennas",
            Experiment::Fig8Convergence => "fig8_convergence",
            Experiment::Fig9Altitude => "fig9_altitude",
            Experiment::Fig10Tau => "fig10_tau",
            Experiment::Fig11PlacementHeatmap => "fig11_placement_heatmap",
            Experiment::Fig12EsGap => "fig12_es_gap",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, ConfigError> {
        Self::ALL.into_iter().find(|e| e.name() == name).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|e| e.name()).collect();
            ConfigError::UnknownExperiment(name.to_string(), names.join(", "))
        })
    }

    /// Settings layered under the user's configuration.
    pub fn preset(self) -> Table {
        let text = match self {
            Experiment::Fig3Users => "[params]\nantennas = 16\n",
            Experiment::Fig5UavPower => "[params]\npairs = 10\nantennas = 16\n",
            Experiment::Fig7Antennas => "[params]\npairs = 1\n",
            Experiment::Fig12EsGap => "[params]\npairs = 2\nantennas = 4\n",
            _ => "",
        };
        text.parse().expect("preset is valid TOML")
    }

    /// CSV header of the swept quantity.
    pub fn axis(self) -> &'static [&'static str] {
        match self {
            Experiment::Fig3Users => &["users"],
            Experiment::Fig4BeaconPower => &["P_beacon"],
            Experiment::Fig5UavPower => &["P_uav_max"],
            Experiment::Fig6UserPower => &["P_user"],
            Experiment::Fig7Antennas => &["M"],
            Experiment::Fig8Convergence => &["round"],
            Experiment::Fig9Altitude => &["H"],
            Experiment::Fig10Tau => &["tau"],
            Experiment::Fig11PlacementHeatmap => &["x0", "y0"],
            Experiment::Fig12EsGap => &["N"],
        }
    }

    /// Swept values; empty when the axis comes out of the runs themselves.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            Experiment::Fig3Users => vec![10.0, 14.0, 18.0, 22.0, 26.0, 30.0],
            Experiment::Fig4BeaconPower => vec![1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0],
            Experiment::Fig5UavPower => vec![1.0, 2.0, 5.0, 10.0, 20.0],
            Experiment::Fig6UserPower => vec![0.001, 0.005, 0.01, 0.05, 0.1],
            Experiment::Fig7Antennas => vec![1.0, 2.0, 4.0, 8.0, 16.0],
            Experiment::Fig9Altitude => vec![5.0, 10.0, 20.0, 30.0, 50.0],
            Experiment::Fig10Tau => (1..20).map(|i| i as f64 * 0.05).collect(),
            Experiment::Fig12EsGap => vec![2.0],
            Experiment::Fig8Convergence | Experiment::Fig11PlacementHeatmap => Vec::new(),
        }
    }

    pub fn default_schemes(self) -> &'static [Scheme] {
        use Scheme::*;
        match self {
            Experiment::Fig3Users => &[NomaLd, OmaLd, NoEh],
            Experiment::Fig5UavPower => &[NomaLd, Noma, OmaLd, Oma],
            Experiment::Fig7Antennas => &[NomaLd, EtpaLd],
            Experiment::Fig12EsGap => &[NomaLd, Es],
            Experiment::Fig8Convergence | Experiment::Fig10Tau | Experiment::Fig11PlacementHeatmap => &[NomaLd],
            _ => &[NomaLd, OmaLd],
        }
    }

    /// Puts `value` into the parameters; `false` if this axis is not a parameter.
    fn apply(self, params: &mut SystemParams, value: f64) -> Result<bool, Error> {
        let count = |v: f64| -> Result<usize, Error> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidParams(format!("{v} is not a positive integer")))
            }
        };
        match self {
            Experiment::Fig3Users => {
                let users = count(value)?;
                if users % 2 != 0 {
                    return Err(Error::OddUserCount(users));
                }
                params.pairs = users / 2;
            }
            Experiment::Fig4BeaconPower => params.p_beacon = value,
            Experiment::Fig5UavPower => params.uav_power_cap = Some(value),
            Experiment::Fig6UserPower => params.p_user = value,
            Experiment::Fig7Antennas => params.antennas = count(value)?,
            Experiment::Fig9Altitude => params.altitude = value,
            Experiment::Fig12EsGap => params.pairs = count(value)?,
            Experiment::Fig8Convergence | Experiment::Fig10Tau | Experiment::Fig11PlacementHeatmap => return Ok(false),
        }
        Ok(true)
    }
}

/// One CSV line: a scheme's outcome on one drop at one axis point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub axis: Vec<f64>,
    pub scheme: Scheme,
    pub seed: u64,
    pub ee: Option<f64>,
    pub rounds: usize,
    pub wall_ms: f64,
    pub error: Option<String>,
    /// The error was a constraint violation rather than a fault.
    pub infeasible: bool,
}

impl Row {
    fn ok(axis: Vec<f64>, scheme: Scheme, seed: u64, ee: f64, rounds: usize, start: Instant) -> Self {
        Row {
            axis,
            scheme,
            seed,
            ee: Some(ee),
            rounds,
            wall_ms: elapsed_ms(start),
            error: None,
            infeasible: false,
        }
    }

    fn failed(axis: Vec<f64>, scheme: Scheme, seed: u64, err: &Error, start: Instant) -> Self {
        Row {
            axis,
            scheme,
            seed,
            ee: None,
            rounds: 0,
            wall_ms: elapsed_ms(start),
            error: Some(err.to_string()),
            infeasible: err.is_infeasible(),
        }
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Resolved axis values and schemes of a configuration.
pub struct Plan {
    pub experiment: Experiment,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
}

impl Plan {
    pub fn new(cfg: &Config) -> Result<Self, ConfigError> {
        let experiment = Experiment::from_name(&cfg.experiment)?;
        let values = cfg.values.clone().unwrap_or_else(|| experiment.default_values());
        let schemes = match &cfg.schemes {
            Some(names) => names
                .iter()
                .map(|n| Scheme::from_name(n))
                .collect::<Result<Vec<_>, _>>()?,
            None => experiment.default_schemes().to_vec(),
        };
        if schemes.is_empty() {
            return Err(ConfigError::Invalid("no schemes to run".into()));
        }
        let per_point = !matches!(
            experiment,
            Experiment::Fig8Convergence | Experiment::Fig11PlacementHeatmap
        );
        if per_point && values.is_empty() {
            return Err(ConfigError::Invalid(format!("{} needs axis values", experiment.name())));
        }
        if experiment == Experiment::Fig12EsGap && schemes.contains(&Scheme::NoEh) {
            return Err(ConfigError::Invalid("no_eh is not part of the ES comparison".into()));
        }
        Ok(Self {
            experiment,
            values,
            schemes,
        })
    }
}

/// Runs every (point, seed) task on `jobs` threads and returns rows sorted
/// by axis, then seed, then scheme order.
pub fn run_plan(cfg: &Config, plan: &Plan, jobs: usize) -> Vec<Row> {
    let seeds = cfg.seed_list();
    let tasks: Vec<(Option<f64>, u64)> = match plan.experiment {
        Experiment::Fig8Convergence | Experiment::Fig10Tau | Experiment::Fig11PlacementHeatmap => {
            seeds.iter().map(|s| (None, *s)).collect()
        }
        _ => plan
            .values
            .iter()
            .flat_map(|v| seeds.iter().map(move |s| (Some(*v), *s)))
            .collect(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    let mut rows: Vec<Row> = pool.install(|| {
        tasks
            .par_iter()
            .flat_map_iter(|(value, seed)| run_task(cfg, plan, *value, *seed))
            .collect()
    });
    let order = |s: Scheme| plan.schemes.iter().position(|x| *x == s).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        cmp_axis(&a.axis, &b.axis)
            .then(a.seed.cmp(&b.seed))
            .then(order(a.scheme).cmp(&order(b.scheme)))
    });
    rows
}

fn cmp_axis(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(a.len().cmp(&b.len()))
}

fn run_task(cfg: &Config, plan: &Plan, value: Option<f64>, seed: u64) -> Vec<Row> {
    let start = Instant::now();
    let mut params = cfg.params.clone();
    let axis = value.map(|v| vec![v]).unwrap_or_default();
    let fail_all = |err: Error| -> Vec<Row> {
        plan.schemes
            .iter()
            .map(|s| Row::failed(axis.clone(), *s, seed, &err, start))
            .collect()
    };
    if let Some(v) = value {
        if let Err(e) = plan.experiment.apply(&mut params, v) {
            return fail_all(e);
        }
    }
    let scenario = match Scenario::generate(seed, params) {
        Ok(s) => s,
        Err(e) => return fail_all(e),
    };
    match plan.experiment {
        Experiment::Fig8Convergence => convergence_rows(&scenario, plan),
        Experiment::Fig10Tau => tau_rows(&scenario, plan),
        Experiment::Fig11PlacementHeatmap => heatmap_rows(&scenario, plan, cfg.heatmap_points),
        _ => scheme_rows(&scenario, plan, cfg, &axis),
    }
}

fn scheme_rows(s: &Scenario, plan: &Plan, cfg: &Config, axis: &[f64]) -> Vec<Row> {
    let seed = s.seed;
    let mut proposed: Option<Result<BcdResult, Error>> = None;
    let mut rows = Vec::with_capacity(plan.schemes.len());
    for &scheme in &plan.schemes {
        let start = Instant::now();
        let outcome = match scheme {
            Scheme::Es => exhaustive_search(s, &cfg.es_grid).and_then(|r| {
                r.map(|e| (e.ee, 0)).ok_or_else(|| Error::Infeasible {
                    constraint: uavnoma::Constraint::C1,
                    pair: None,
                    detail: "no feasible grid point".into(),
                })
            }),
            Scheme::NoEh => {
                let base = proposed.get_or_insert_with(|| run_algorithm4(s, &Scheme::NomaLd.options()));
                match base {
                    Ok(b) => no_eh_ee(s, &scheme.options(), b.report.p_t).map(|r| (r.ee, r.rounds.len())),
                    Err(e) => Err(e.clone()),
                }
            }
            _ => {
                let res = run_algorithm4(s, &scheme.options());
                let out = res.as_ref().map(|r| (r.ee, r.rounds.len())).map_err(Clone::clone);
                if scheme == Scheme::NomaLd {
                    proposed = Some(res);
                }
                out
            }
        };
        rows.push(match outcome {
            Ok((ee, rounds)) => Row::ok(axis.to_vec(), scheme, seed, ee, rounds, start),
            Err(e) => Row::failed(axis.to_vec(), scheme, seed, &e, start),
        });
    }
    rows
}

fn convergence_rows(s: &Scenario, plan: &Plan) -> Vec<Row> {
    let mut rows = Vec::new();
    for &scheme in &plan.schemes {
        let start = Instant::now();
        match run_algorithm4(s, &scheme.options()) {
            Ok(res) => {
                let wall = elapsed_ms(start);
                let n = res.rounds.len();
                for r in &res.rounds {
                    let mut row = Row::ok(vec![r.r as f64], scheme, s.seed, r.ee, n, start);
                    row.wall_ms = wall;
                    rows.push(row);
                }
            }
            Err(e) => rows.push(Row::failed(vec![0.0], scheme, s.seed, &e, start)),
        }
    }
    rows
}

/// EE and SCA iterations at one WPT time.
pub type TauPoint = (f64, Result<(f64, usize), Error>);

/// EE at each fixed WPT time, with the split and position of the free-`τ`
/// pipeline and the powers re-optimized for that `τ`.
pub fn tau_curve(s: &Scenario, base: &BcdResult, taus: &[f64]) -> Vec<TauPoint> {
    let link = match LinkState::at(s, base.xy) {
        Ok(l) => l,
        Err(e) => return taus.iter().map(|t| (*t, Err(e.clone()))).collect(),
    };
    taus.iter()
        .map(|&tau| {
            let prob = ScaProblem {
                link: &link,
                params: &s.params,
                alpha_cc: &base.alloc.alpha_cc,
                alpha_ce: &base.alloc.alpha_ce,
                access: base.alloc.access,
                mode: TauMode::Fixed(tau),
            };
            let out = run_algorithm2(&prob, None, s.params.tol.sca, s.params.iters.sca)
                .map(|r| (r.ee, r.trace.len().saturating_sub(1)));
            (tau, out)
        })
        .collect()
}

fn tau_rows(s: &Scenario, plan: &Plan) -> Vec<Row> {
    let mut rows = Vec::new();
    for &scheme in &plan.schemes {
        let start = Instant::now();
        let base = match run_algorithm4(s, &scheme.options()) {
            Ok(b) => b,
            Err(e) => {
                rows.extend(
                    plan.values
                        .iter()
                        .map(|t| Row::failed(vec![*t], scheme, s.seed, &e, start)),
                );
                continue;
            }
        };
        for &tau in &plan.values {
            let start = Instant::now();
            let (_, out) = tau_curve(s, &base, &[tau]).remove(0);
            rows.push(match out {
                Ok((ee, it)) => Row::ok(vec![tau], scheme, s.seed, ee, it, start),
                Err(e) => Row::failed(vec![tau], scheme, s.seed, &e, start),
            });
        }
    }
    rows
}

fn heatmap_rows(s: &Scenario, plan: &Plan, k: usize) -> Vec<Row> {
    let area = s.params.area;
    let coord = |lo: f64, hi: f64, i: usize| {
        if k <= 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (k - 1) as f64
        }
    };
    let mut rows = Vec::new();
    for &scheme in &plan.schemes {
        let start = Instant::now();
        let options = scheme.options();
        let base = match run_algorithm4(s, &options) {
            Ok(b) => b,
            Err(e) => {
                rows.push(Row::failed(vec![s.uav_xy[0], s.uav_xy[1]], scheme, s.seed, &e, start));
                continue;
            }
        };
        let problem = PlacementProblem::new(s, &base.alloc, options.mode, base.xy);
        for i in 0..k {
            for j in 0..k {
                let start = Instant::now();
                let xy = [coord(area.x_min, area.x_max, i), coord(area.y_min, area.y_max, j)];
                rows.push(match problem.report(xy) {
                    Ok((_, r)) if r.feasibility.all() => {
                        Row::ok(xy.to_vec(), scheme, s.seed, r.ee, base.rounds.len(), start)
                    }
                    Ok((_, r)) => {
                        let c = r.feasibility.violations()[0];
                        let e = Error::Infeasible {
                            constraint: c,
                            pair: None,
                            detail: "allocation violates the constraint at this position".into(),
                        };
                        Row::failed(xy.to_vec(), scheme, s.seed, &e, start)
                    }
                    Err(e) => Row::failed(xy.to_vec(), scheme, s.seed, &e, start),
                });
            }
        }
    }
    rows
}

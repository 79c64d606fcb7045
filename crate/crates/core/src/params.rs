//! Physical and algorithmic constants of the system.
//!
//! Field names double as the keys of the experiment config file, so they are
//! kept short and close to the usual symbols (`beta0`, `xi`, `kappa`, ...).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rotary-wing propulsion constants (SI units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Rotor {
    /// Blade profile power in hover (W).
    pub p0: f64,
    /// Induced power in hover (W).
    pub pi: f64,
    /// Tip speed of the rotor blade (m/s).
    pub u_tip: f64,
    /// Mean rotor-induced velocity in hover (m/s).
    pub v0: f64,
    /// Fuselage drag ratio.
    pub d0: f64,
    /// Rotor solidity.
    pub s: f64,
    /// Air density (kg/m^3).
    pub rho: f64,
    /// Rotor disc area (m^2).
    pub a: f64,
}

impl Default for Rotor {
    fn default() -> Self {
        Self {
            p0: 0.1,
            pi: 0.2,
            u_tip: 200.0,
            v0: 7.2,
            d0: 0.3,
            s: 0.05,
            rho: 1.225,
            a: 0.79,
        }
    }
}

/// Horizontal box the UAV must stay in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Area {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for Area {
    fn default() -> Self {
        Self {
            x_min: -50.0,
            x_max: 50.0,
            y_min: -50.0,
            y_max: 50.0,
        }
    }
}

impl Area {
    pub fn contains(&self, xy: [f64; 2]) -> bool {
        (self.x_min..=self.x_max).contains(&xy[0]) && (self.y_min..=self.y_max).contains(&xy[1])
    }

    pub fn clamp(&self, xy: [f64; 2]) -> [f64; 2] {
        [xy[0].clamp(self.x_min, self.x_max), xy[1].clamp(self.y_min, self.y_max)]
    }
}

/// Convergence tolerances of the four algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Best-response game, on the power iterates (W).
    pub game: f64,
    /// SCA outer loop, on the objective.
    pub sca: f64,
    /// Placement, on the EE.
    pub place: f64,
    /// BCD, fractional EE increase.
    pub bcd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            game: 1e-7,
            sca: 1e-9,
            place: 1e-7,
            bcd: 1e-4,
        }
    }
}

/// Iteration caps of the four algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IterationLimits {
    pub game: usize,
    pub sca: usize,
    pub place: usize,
    pub bcd: usize,
}

impl Default for IterationLimits {
    fn default() -> Self {
        Self {
            game: 100,
            sca: 30,
            place: 1000,
            bcd: 30,
        }
    }
}

/// Which direction cosine drives the ULA phase progression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Steering {
    /// `cos θ` with `θ = arcsin(h/d)`: the horizontal-to-slant distance ratio.
    /// Every user at the same slant distance gets the same steering vector.
    Elevation,
    /// Cosine between the slant path and an array laid along the x-axis,
    /// `(x_user - x_0) / d`. Equals the elevation form for users on the axis.
    #[default]
    ArrayAxis,
}

/// Where the UAV transmit power comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PowerSupply {
    /// Harvest-then-transmit from the power beacon.
    #[default]
    Harvest,
    /// Fixed battery budget, no charging phase.
    Battery { p_t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    /// Number of UAV antennas (M).
    pub antennas: usize,
    /// Number of NOMA pairs (N); 2N users.
    pub pairs: usize,
    /// Bandwidth (Hz).
    pub bandwidth: f64,
    /// Channel power gain at 1 m.
    pub beta0: f64,
    /// Path-loss exponent.
    pub beta: f64,
    /// Energy conversion efficiency.
    pub xi: f64,
    /// Beacon transmit power (W).
    pub p_beacon: f64,
    /// Power per RF chain (W).
    pub p_a: f64,
    /// Circuit power per ground user (W).
    pub p_user: f64,
    /// Penalty coefficient of the game utilities (1/W).
    pub kappa: f64,
    /// Minimum rate per user (bit/s/Hz).
    pub r_min: f64,
    /// Cycle duration (s).
    pub cycle: f64,
    /// UAV altitude (m).
    pub altitude: f64,
    /// Beacon position on the ground (m).
    pub beacon_xy: [f64; 2],
    pub area: Area,
    /// Radius of the user disc, centered at the origin (m).
    pub disc_radius: f64,
    /// Antenna spacing over wavelength.
    pub spacing_ratio: f64,
    pub steering: Steering,
    /// Per-antenna transmit power cap (W); `None` leaves the antennas uncapped.
    pub p_antenna: Option<f64>,
    pub rotor: Rotor,
    /// Decay factor of the fractional power allocation baseline.
    pub eta: f64,
    pub tol: Tolerances,
    pub iters: IterationLimits,
    /// Side of the lattice scanned for a second placement start; below 2 disables it.
    pub place_lattice: usize,
    /// Step sizes of the four box multipliers.
    pub steps: [f64; 4],
    /// Charge the beacon's radiated energy `p_beacon * tau` to the system.
    pub include_beacon_energy: bool,
    /// Optional cap on the total UAV transmit power (W).
    pub uav_power_cap: Option<f64>,
    /// Optional cap on the power of each pair (W).
    pub pair_power_cap: Option<f64>,
    pub supply: PowerSupply,
    /// Complex Gaussian small-scale fading on user links.
    pub fading: bool,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            antennas: 8,
            pairs: 4,
            bandwidth: 1.0,
            beta0: 1.8,
            beta: 1.05,
            xi: 0.8,
            p_beacon: 10.0,
            p_a: 0.01,
            p_user: 0.01,
            kappa: 0.05,
            r_min: 0.1,
            cycle: 1.0,
            altitude: 10.0,
            beacon_xy: [-60.0, 0.0],
            area: Area::default(),
            disc_radius: 50.0,
            spacing_ratio: 0.5,
            steering: Steering::default(),
            p_antenna: None,
            rotor: Rotor::default(),
            eta: 0.7,
            tol: Tolerances::default(),
            iters: IterationLimits::default(),
            place_lattice: 11,
            steps: [0.01; 4],
            include_beacon_energy: true,
            uav_power_cap: None,
            pair_power_cap: None,
            supply: PowerSupply::Harvest,
            fading: false,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.pairs == 0 {
            return bad("pairs must be at least 1".into());
        }
        if self.antennas < self.pairs {
            return bad(format!(
                "antennas ({}) must be >= pairs ({}) for zero-forcing",
                self.antennas, self.pairs
            ));
        }
        if !(self.xi > 0.0 && self.xi <= 1.0) {
            return bad(format!("xi must be in (0, 1], got {}", self.xi));
        }
        let positive = [
            ("beta", self.beta),
            ("beta0", self.beta0),
            ("cycle", self.cycle),
            ("altitude", self.altitude),
            ("bandwidth", self.bandwidth),
            ("disc_radius", self.disc_radius),
            ("rotor.p0", self.rotor.p0),
            ("rotor.pi", self.rotor.pi),
            ("rotor.u_tip", self.rotor.u_tip),
            ("rotor.v0", self.rotor.v0),
            ("rotor.d0", self.rotor.d0),
            ("rotor.s", self.rotor.s),
            ("rotor.rho", self.rotor.rho),
            ("rotor.a", self.rotor.a),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        let nonneg = [
            ("r_min", self.r_min),
            ("p_beacon", self.p_beacon),
            ("p_a", self.p_a),
            ("p_user", self.p_user),
            ("kappa", self.kappa),
            ("spacing_ratio", self.spacing_ratio),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta must be in [0, 1], got {}", self.eta));
        }
        let a = &self.area;
        if !(a.x_min < a.x_max && a.y_min < a.y_max) {
            return bad("area must satisfy x_min < x_max and y_min < y_max".into());
        }
        if let Some(cap) = self.uav_power_cap {
            if !(cap > 0.0) {
                return bad("uav_power_cap must be positive".into());
            }
        }
        if let Some(cap) = self.p_antenna {
            if !(cap > 0.0) {
                return bad("p_antenna must be positive".into());
            }
        }
        if let Some(cap) = self.pair_power_cap {
            if !(cap > 0.0) {
                return bad("pair_power_cap must be positive".into());
            }
        }
        if let PowerSupply::Battery { p_t } = self.supply {
            if !(p_t > 0.0) {
                return bad("battery p_t must be positive".into());
            }
        }
        if self.steps.iter().any(|s| !(*s > 0.0)) {
            return bad("multiplier steps must be positive".into());
        }
        Ok(())
    }

    /// Number of ground users (2N).
    pub fn users(&self) -> usize {
        2 * self.pairs
    }

    /// Total circuit power drawn by the users over a cycle-normalized second.
    pub fn users_power(&self) -> f64 {
        self.users() as f64 * self.p_user
    }

    /// Rate threshold as an SINR: `2^(R_min/B) - 1`.
    pub fn sinr_threshold(&self) -> f64 {
        (self.r_min / self.bandwidth).exp2() - 1.0
    }
}

//! Energy-efficient resource allocation and placement for a wireless-powered
//! multiantenna UAV serving NOMA user pairs.

// NaN must fail the validity checks, hence `!(x > 0.0)` over `x <= 0.0`.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod bcd;
pub mod channel;
pub mod error;
pub mod game;
pub mod linalg;
pub mod linklayer;
pub mod numfmt;
pub mod params;
pub mod placement;
pub mod projection;
pub mod sca;
pub mod scenario;

pub use error::{Constraint, Error, Result};
pub use linklayer::{Access, Allocation, EEReport, EnergyBreakdown, Feasibility, LinkState};
pub use num_complex;
pub use params::{Area, PowerSupply, Rotor, Steering, SystemParams};
pub use scenario::{GroundUser, Role, Scenario, UserPair};

//! User drop, cell-center/cell-edge classification and two-user pairing.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    /// Cell-center user.
    CC,
    /// Cell-edge user.
    CE,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundUser {
    pub id: usize,
    pub pos: [f64; 3],
    pub role: Role,
    pub dist_to_center: f64,
    /// Small-scale fading coefficient; exactly 1 unless fading is enabled.
    #[serde(default = "unit_fading")]
    pub fading: Complex64,
}

fn unit_fading() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserPair {
    pub n: usize,
    pub cc: usize,
    pub ce: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(skip)]
    pub params: SystemParams,
    pub seed: u64,
    pub uav_xy: [f64; 2],
    pub users: Vec<GroundUser>,
    pub pairs: Vec<UserPair>,
}

/// Drops `2N` users uniformly over the disc and tags the nearer half as CC.
///
/// The returned list is sorted by distance to the disc center (ties by id) and
/// user ids follow the drop order.
pub fn generate_users(seed: u64, params: &SystemParams) -> Vec<GroundUser> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = params.users();
    let mut users: Vec<GroundUser> = (0..total)
        .map(|id| {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            let r = params.disc_radius * u.sqrt();
            let phi = 2.0 * std::f64::consts::PI * v;
            let (x, y) = (r * phi.cos(), r * phi.sin());
            GroundUser {
                id,
                pos: [x, y, 0.0],
                role: Role::CC,
                dist_to_center: x.hypot(y),
                fading: unit_fading(),
            }
        })
        .collect();

    if params.fading {
        // Drawn after positions so enabling fading never moves users.
        for user in &mut users {
            user.fading = complex_gaussian(&mut rng);
        }
    }

    sort_by_distance(&mut users);
    let half = total / 2;
    for (rank, user) in users.iter_mut().enumerate() {
        user.role = if rank < half { Role::CC } else { Role::CE };
    }
    users
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    // Box-Muller, unit variance split over real and imaginary parts.
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    let r = (-u1.ln()).sqrt();
    let phi = 2.0 * std::f64::consts::PI * u2;
    Complex64::new(r * phi.cos(), r * phi.sin())
}

fn sort_by_distance(users: &mut [GroundUser]) {
    users.sort_by(|a, b| a.dist_to_center.total_cmp(&b.dist_to_center).then(a.id.cmp(&b.id)));
}

/// Pairs the closest CC user with the farthest CE user, the second-closest
/// with the second-farthest, and so on.
///
/// `users` must be sorted by distance to the center.
pub fn pair_users(users: &[GroundUser]) -> Result<Vec<UserPair>> {
    if !users.len().is_multiple_of(2) {
        return Err(Error::OddUserCount(users.len()));
    }
    let n = users.len() / 2;
    let (cc, ce) = users.split_at(n);
    Ok((0..n)
        .map(|i| UserPair {
            n: i,
            cc: cc[i].id,
            ce: ce[n - 1 - i].id,
        })
        .collect())
}

impl Scenario {
    /// Builds a scenario from a seed with the UAV at the disc center.
    pub fn generate(seed: u64, params: SystemParams) -> Result<Self> {
        params.validate()?;
        let users = generate_users(seed, &params);
        let pairs = pair_users(&users)?;
        let uav_xy = params.area.clamp([0.0, 0.0]);
        Ok(Self {
            params,
            seed,
            uav_xy,
            users,
            pairs,
        })
    }

    pub fn user(&self, id: usize) -> &GroundUser {
        // users are sorted by distance, not id
        self.users
            .iter()
            .find(|u| u.id == id)
            .expect("pair references unknown user id")
    }

    pub fn pair_members(&self, n: usize) -> (&GroundUser, &GroundUser) {
        let pair = &self.pairs[n];
        (self.user(pair.cc), self.user(pair.ce))
    }

    pub fn uav_position(&self) -> [f64; 3] {
        [self.uav_xy[0], self.uav_xy[1], self.params.altitude]
    }

    /// Same users and pairs with the UAV moved; the position is not clamped.
    pub fn with_uav(&self, xy: [f64; 2]) -> Self {
        Self {
            uav_xy: xy,
            ..self.clone()
        }
    }

    pub fn with_params(&self, params: SystemParams) -> Result<Self> {
        params.validate()?;
        if params.pairs != self.params.pairs || params.disc_radius != self.params.disc_radius {
            return Scenario::generate(self.seed, params).map(|s| s.with_uav(self.uav_xy));
        }
        Ok(Self { params, ..self.clone() })
    }
}

//! Line-of-sight geometry: array responses, path loss, the beacon link,
//! harvested transmit power and hover propulsion power.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CVec};
use crate::params::{Rotor, Steering, SystemParams};
use crate::scenario::GroundUser;

/// Minimum UAV-to-node distance (m).
pub const MIN_DISTANCE: f64 = 1.0;

/// Unit-norm ULA steering vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayResponse(pub CVec);

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub h: CVec,
    pub dist: f64,
    pub theta: f64,
    pub beta_nk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeaconLink {
    /// Row-major M x M channel matrix.
    pub h_pu: Vec<CVec>,
    pub d_pu: f64,
    pub theta_pu: f64,
    pub w_pu: CVec,
    /// `||H_PU W_PU||^2`
    pub gain: f64,
}

/// Euclidean distance, clamped below at [`MIN_DISTANCE`].
pub fn distance(uav: [f64; 3], point: [f64; 3]) -> f64 {
    let d = ((uav[0] - point[0]).powi(2) + (uav[1] - point[1]).powi(2) + (uav[2] - point[2]).powi(2)).sqrt();
    d.max(MIN_DISTANCE)
}

pub fn path_gain(dist: f64, params: &SystemParams) -> f64 {
    params.beta0 * dist.powf(-params.beta)
}

pub fn array_response(theta: f64, antennas: usize, spacing_ratio: f64) -> ArrayResponse {
    array_response_cos(theta.cos(), antennas, spacing_ratio)
}

fn array_response_cos(cos_theta: f64, antennas: usize, spacing_ratio: f64) -> ArrayResponse {
    let amp = 1.0 / (antennas as f64).sqrt();
    ArrayResponse(
        (0..antennas)
            .map(|m| Complex64::from_polar(amp, 2.0 * PI * spacing_ratio * m as f64 * cos_theta))
            .collect(),
    )
}

/// Departure angle and its cosine, the quantity that sets the array phase.
fn aod(uav: [f64; 3], point: [f64; 3], dist: f64, steering: Steering) -> (f64, f64) {
    match steering {
        Steering::Elevation => {
            let ratio = (uav[2] / dist).min(1.0);
            (ratio.asin(), (1.0 - ratio * ratio).max(0.0).sqrt())
        }
        Steering::ArrayAxis => {
            let c = ((point[0] - uav[0]) / dist).clamp(-1.0, 1.0);
            (c.acos(), c)
        }
    }
}

pub fn user_channel(uav: [f64; 3], user: &GroundUser, params: &SystemParams) -> ChannelVector {
    let dist = distance(uav, user.pos);
    let beta_nk = path_gain(dist, params);
    let (theta, cos_theta) = aod(uav, user.pos, dist, params.steering);
    let a = array_response_cos(cos_theta, params.antennas, params.spacing_ratio);
    let amp = user.fading * (params.antennas as f64 * beta_nk).sqrt();
    ChannelVector {
        h: linalg::scale(&a.0, amp),
        dist,
        theta,
        beta_nk,
    }
}

fn beacon_geometry(uav: [f64; 3], params: &SystemParams) -> (f64, f64) {
    let [xb, yb] = params.beacon_xy;
    let d_pu = distance(uav, [xb, yb, 0.0]);
    (d_pu, path_gain(d_pu, params))
}

/// `||H_PU W_PU||^2` with the matched energy beam; equals `M^2 beta_PU`.
pub fn beacon_gain(uav: [f64; 3], params: &SystemParams) -> f64 {
    let m = params.antennas as f64;
    m * m * beacon_geometry(uav, params).1
}

/// Full rank-one beacon channel with the matched beam `W_PU = a_R`.
pub fn beacon_link(uav: [f64; 3], params: &SystemParams) -> BeaconLink {
    let m = params.antennas;
    let (d_pu, beta_pu) = beacon_geometry(uav, params);
    let [xb, yb] = params.beacon_xy;
    let (theta_pu, cos_theta) = aod(uav, [xb, yb, 0.0], d_pu, params.steering);
    let a = array_response_cos(cos_theta, m, params.spacing_ratio).0;
    let amp = (m as f64 * m as f64 * beta_pu).sqrt();
    let h_pu: Vec<CVec> = (0..m)
        .map(|i| (0..m).map(|j| amp * a[i] * a[j].conj()).collect())
        .collect();
    let w_pu = a;
    let hw: CVec = h_pu
        .iter()
        .map(|row| row.iter().zip(&w_pu).map(|(x, y)| x * y).sum())
        .collect();
    BeaconLink {
        gain: linalg::norm_sqr(&hw),
        h_pu,
        d_pu,
        theta_pu,
        w_pu,
    }
}

/// UAV transmit power after harvesting for `tau` of the cycle.
pub fn harvested_tx_power(tau: f64, link_gain: f64, params: &SystemParams) -> Result<f64> {
    let t = params.cycle;
    if !(0.0..t).contains(&tau) {
        return Err(Error::InvalidWptTime { tau, cycle: t });
    }
    Ok(tau * link_gain * params.p_beacon * params.xi / (t - tau))
}

/// Rotary-wing propulsion power at forward speed `v` (m/s).
pub fn propulsion_power(v: f64, rotor: &Rotor) -> f64 {
    let blade = rotor.p0 * (1.0 + 3.0 * v * v / (rotor.u_tip * rotor.u_tip));
    let ratio = v * v / (2.0 * rotor.v0 * rotor.v0);
    let induced = rotor.pi * ((1.0 + ratio * ratio).sqrt() - ratio).sqrt();
    let parasite = rotor.d0 * rotor.rho * rotor.s * rotor.a * v.powi(3) / 2.0;
    blade + induced + parasite
}

/// Hover power `P_prop(0) = P0 + Pi`.
pub fn hover_power(rotor: &Rotor) -> f64 {
    rotor.p0 + rotor.pi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Role;

    fn user_at(x: f64, y: f64) -> GroundUser {
        GroundUser {
            id: 0,
            pos: [x, y, 0.0],
            role: Role::CC,
            dist_to_center: x.hypot(y),
            fading: Complex64::new(1.0, 0.0),
        }
    }

    #[test]
    fn distance_examples() {
        assert!((distance([0.0, 0.0, 10.0], [3.0, 4.0, 0.0]) - 125f64.sqrt()).abs() < 1e-12);
        assert_eq!(distance([0.0, 0.0, 0.5], [0.0, 0.0, 0.0]), 1.0);
        assert_eq!(distance([0.0, 0.0, 1.0], [0.0, 0.0, 0.0]), 1.0);
    }

    #[test]
    fn path_gain_examples() {
        let p = SystemParams::default();
        assert_eq!(path_gain(1.0, &p), 1.8);
        // 1.8 * 10^-1.05, 40-digit reference from an arbitrary-precision evaluation
        let reference = 0.160_425_168_864_074_2_f64;
        assert!((path_gain(10.0, &p) - reference).abs() < 1e-15);
        let flat = SystemParams { beta: 1e-300, ..p };
        assert!((path_gain(37.0, &flat) - 1.8).abs() < 1e-12);
    }

    #[test]
    fn array_response_examples() {
        assert_eq!(array_response(0.3, 1, 0.5).0, vec![Complex64::new(1.0, 0.0)]);
        let a = array_response(0.0, 4, 0.5).0;
        for (m, want) in [0.5, -0.5, 0.5, -0.5].iter().enumerate() {
            assert!((a[m] - Complex64::new(*want, 0.0)).norm() < 1e-15);
        }
        let a = array_response(PI / 2.0, 5, 0.5).0;
        for x in a {
            assert!((x - Complex64::new(1.0 / 5f64.sqrt(), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn array_response_has_unit_norm() {
        for m in 1..33 {
            for k in 0..20 {
                let theta = k as f64 * 0.17;
                assert!((linalg::norm(&array_response(theta, m, 0.5).0) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn user_channel_identities() {
        let p = SystemParams::default();
        let uav = [3.0, -2.0, p.altitude];
        let ch = user_channel(uav, &user_at(20.0, 7.0), &p);
        assert!((linalg::norm_sqr(&ch.h) - p.antennas as f64 * ch.beta_nk).abs() < 1e-12);

        let below = user_channel(uav, &user_at(3.0, -2.0), &p);
        assert!((below.theta - PI / 2.0).abs() < 1e-12);

        let a = user_channel([0.0, 0.0, 10.0], &user_at(5.0, 12.0), &p);
        let b = user_channel([0.0, 0.0, 10.0], &user_at(5.0, -12.0), &p);
        assert_eq!(a.beta_nk, b.beta_nk);
    }

    #[test]
    fn beacon_gain_examples() {
        let uav = [10.0, 5.0, 10.0];
        let single = SystemParams {
            antennas: 1,
            pairs: 1,
            ..Default::default()
        };
        let link = beacon_link(uav, &single);
        let beta_pu = path_gain(link.d_pu, &single);
        assert!((link.gain - beta_pu).abs() < 1e-15);

        let p4 = SystemParams {
            antennas: 4,
            ..Default::default()
        };
        let p8 = SystemParams {
            antennas: 8,
            ..Default::default()
        };
        let ratio = beacon_link(uav, &p8).gain / beacon_link(uav, &p4).gain;
        assert!((ratio - 4.0).abs() < 1e-12);

        // doubling d_PU: put the beacon under a UAV at altitude h
        let mut q = SystemParams {
            altitude: 10.0,
            beacon_xy: [0.0, 0.0],
            ..Default::default()
        };
        let g1 = beacon_gain([0.0, 0.0, 10.0], &q);
        q.altitude = 20.0;
        let g2 = beacon_gain([0.0, 0.0, 20.0], &q);
        assert!((g2 / g1 - 2f64.powf(-q.beta)).abs() < 1e-12);
    }

    #[test]
    fn matched_beam_reaches_the_top_singular_value() {
        for m in [1usize, 2, 5, 8, 16] {
            let p = SystemParams {
                antennas: m,
                pairs: 1,
                ..Default::default()
            };
            let link = beacon_link([12.0, -7.0, p.altitude], &p);
            let h = nalgebra::DMatrix::from_fn(m, m, |i, j| {
                let z = link.h_pu[i][j];
                nalgebra::Complex::new(z.re, z.im)
            });
            let sigma = h.singular_values()[0];
            assert!((link.gain - sigma * sigma).abs() < 1e-9);
            assert!((link.gain - beacon_gain([12.0, -7.0, p.altitude], &p)).abs() < 1e-12);
            let rank = h.singular_values().iter().filter(|s| **s > 1e-9 * sigma).count();
            assert_eq!(rank, 1);
        }
    }

    #[test]
    fn harvested_power_examples() {
        let p = SystemParams {
            p_beacon: 10.0,
            xi: 0.8,
            cycle: 1.0,
            ..Default::default()
        };
        assert!((harvested_tx_power(0.5, 2.0, &p).unwrap() - 16.0).abs() < 1e-12);
        assert_eq!(harvested_tx_power(0.0, 2.0, &p).unwrap(), 0.0);
        assert!(harvested_tx_power(1.0, 2.0, &p).is_err());
        assert!(harvested_tx_power(-0.1, 2.0, &p).is_err());
    }

    #[test]
    fn harvested_power_is_increasing_and_convex() {
        let p = SystemParams::default();
        let f = |t: f64| harvested_tx_power(t, 1.3, &p).unwrap();
        let h = 1e-3;
        let mut t = h;
        while t < 1.0 - 2.0 * h {
            assert!(f(t + h) > f(t));
            assert!(f(t + h) - 2.0 * f(t) + f(t - h) > 0.0);
            t += 0.01;
        }
    }

    #[test]
    fn propulsion_examples() {
        let r = Rotor::default();
        assert_eq!(propulsion_power(0.0, &r), r.p0 + r.pi);
        assert_eq!(propulsion_power(0.0, &r), hover_power(&r));
        assert!((hover_power(&r) - 0.3).abs() < 1e-15);
        // V = v0 with the default rotor; reference from a 50-digit evaluation
        let reference = 2.966_699_715_551_484_7_f64;
        assert!((propulsion_power(7.2, &r) - reference).abs() < 1e-12);
        let v = 1e4;
        let parasite = r.d0 * r.rho * r.s * r.a * v * v * v / 2.0;
        assert!((propulsion_power(v, &r) / parasite - 1.0).abs() < 1e-3);
    }
}

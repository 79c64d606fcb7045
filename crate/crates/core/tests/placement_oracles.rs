mod common;

use uavnoma::linklayer::LinkState;
use uavnoma::num_complex::Complex64;
use uavnoma::placement::{box_slacks, ee_gradient, run_algorithm3, PlacementProblem};
use uavnoma::sca::{run_algorithm2, ScaProblem, TauMode};
use uavnoma::{Access, Allocation, GroundUser, Role, Scenario, SystemParams, UserPair};

/// SCA powers for a fixed split with the UAV at the scenario position.
fn sca_allocation(s: &Scenario, alpha: f64) -> Option<Allocation> {
    let link = LinkState::build(s).ok()?;
    let n = s.params.pairs;
    let a = vec![alpha; n];
    let b = vec![1.0 - alpha; n];
    let prob = ScaProblem {
        link: &link,
        params: &s.params,
        alpha_cc: &a,
        alpha_ce: &b,
        access: Access::Noma,
        mode: TauMode::Free,
    };
    let res = run_algorithm2(&prob, None, 1e-9, 30).ok()?;
    Some(prob.allocation(&res.p))
}

fn user(id: usize, x: f64, role: Role) -> GroundUser {
    GroundUser {
        id,
        pos: [x, 0.0, 0.0],
        role,
        dist_to_center: x.abs(),
        fading: Complex64::new(1.0, 0.0),
    }
}

/// Users and beacon on the line `y = 0`, so the EE is even in `y0`.
fn collinear_scenario() -> Scenario {
    let params = SystemParams {
        pairs: 2,
        antennas: 4,
        ..SystemParams::default()
    };
    Scenario {
        params,
        seed: 0,
        uav_xy: [0.0, 0.0],
        users: vec![
            user(0, 6.0, Role::CC),
            user(1, -9.0, Role::CC),
            user(2, 40.0, Role::CE),
            user(3, -45.0, Role::CE),
        ],
        pairs: vec![UserPair { n: 0, cc: 0, ce: 3 }, UserPair { n: 1, cc: 1, ce: 2 }],
    }
}

#[test]
fn mirror_symmetric_scenario_has_zero_cross_gradient() {
    let s = collinear_scenario();
    let alloc = sca_allocation(&s, 0.3).expect("feasible fixture");
    for x in [-30.0, -5.0, 0.0, 12.0, 37.0] {
        let problem = PlacementProblem::new(&s, &alloc, TauMode::Free, [x, 0.0]);
        let g = ee_gradient(&problem, [x, 0.0]);
        assert!(g[1].abs() <= 1e-8, "x0 = {x}: {g:?}");
        assert!(g[0].is_finite());
    }
}

#[test]
fn gradient_is_richardson_consistent() {
    for seed in 0..10 {
        let s = Scenario::generate(seed, SystemParams::default()).unwrap();
        let Some(alloc) = sca_allocation(&s, 0.3) else { continue };
        let problem = PlacementProblem::new(&s, &alloc, TauMode::Free, s.uav_xy);
        for xy in [[0.0, 0.0], [7.5, -3.0], [-22.0, 18.0]] {
            let g = ee_gradient(&problem, xy);
            let central = |k: usize, h: f64| {
                let mut a = xy;
                let mut b = xy;
                a[k] += h;
                b[k] -= h;
                (problem.ee(a) - problem.ee(b)) / (2.0 * h)
            };
            for k in 0..2 {
                let h = 1e-2;
                let r = (4.0 * central(k, h / 2.0) - central(k, h)) / 3.0;
                let scale = g[0].hypot(g[1]).max(1e-12);
                assert!(
                    (r - g[k]).abs() <= 1e-5 * scale,
                    "seed {seed} {xy:?} axis {k}: {r} vs {}",
                    g[k]
                );
            }
        }
    }
}

#[test]
fn placement_matches_a_fine_grid_on_two_pairs() {
    let params = SystemParams {
        pairs: 2,
        antennas: 4,
        ..SystemParams::default()
    };
    let mut compared = 0;
    for seed in 0..20 {
        let s = Scenario::generate(seed, params.clone()).unwrap();
        let Some(alloc) = sca_allocation(&s, 0.3) else { continue };
        let problem = PlacementProblem::new(&s, &alloc, TauMode::Free, s.uav_xy);
        let res = run_algorithm3(&problem, s.uav_xy).unwrap();
        let area = params.area;
        let mut best = f64::NEG_INFINITY;
        for i in 0..21 {
            for j in 0..21 {
                let x = area.x_min + (area.x_max - area.x_min) * i as f64 / 20.0;
                let y = area.y_min + (area.y_max - area.y_min) * j as f64 / 20.0;
                if let Some(v) = problem.feasible_ee([x, y]) {
                    best = best.max(v);
                }
            }
        }
        assert!(res.ee >= best * 0.99, "seed {seed}: {} vs grid {best}", res.ee);
        compared += 1;
    }
    assert!(compared >= 15, "only {compared} feasible instances");
}

#[test]
fn placement_never_loses_ee_and_ends_stationary() {
    for seed in 0..10 {
        let s = Scenario::generate(seed, SystemParams::default()).unwrap();
        let Some(alloc) = sca_allocation(&s, 0.3) else { continue };
        let problem = PlacementProblem::new(&s, &alloc, TauMode::Free, s.uav_xy);
        let res = run_algorithm3(&problem, s.uav_xy).unwrap();
        assert!(res.ee >= problem.ee(s.uav_xy), "seed {seed}");
        assert_eq!(res.trace[0].xy, s.uav_xy);
        if !res.converged {
            continue;
        }
        let g = ee_gradient(&problem, res.xy);
        let slack = box_slacks(&s.params.area, res.xy);
        let free_x = slack[0] > 1e-9 && slack[1] > 1e-9;
        let free_y = slack[2] > 1e-9 && slack[3] > 1e-9;
        // at an active bound only the outward component may remain
        if !free_x {
            let outward = if slack[0] <= 1e-9 { -g[0] } else { g[0] };
            assert!(outward >= -1e-5, "seed {seed}: {g:?} at {:?}", res.xy);
        }
        if !free_y {
            let outward = if slack[2] <= 1e-9 { -g[1] } else { g[1] };
            assert!(outward >= -1e-5, "seed {seed}: {g:?} at {:?}", res.xy);
        }
        if free_x && free_y && g[0].hypot(g[1]) > 1e-5 {
            // a crossing of the two users' effective gains leaves a kink; the
            // point must then be a local maximum along both axes
            let h = 1e-4;
            for d in [[h, 0.0], [-h, 0.0], [0.0, h], [0.0, -h]] {
                let v = problem.ee([res.xy[0] + d[0], res.xy[1] + d[1]]);
                assert!(v <= res.ee + 1e-12, "seed {seed}: {g:?} at {:?}", res.xy);
            }
        }
    }
}

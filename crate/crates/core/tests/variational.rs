use std::f64::consts::PI;
use std::sync::Arc;

use lagrangeflow_core::flow_map::reconstruct;
use lagrangeflow_core::flux::{breakdown_time, normalize, potential_from_flux, velocity_law, ActionPotential, Interval, RawFlux};
use lagrangeflow_core::temple::{init_temple, solve_temple};
use lagrangeflow_core::variational::*;
use lagrangeflow_core::{Boundary, GridFunction};

struct SmoothCase {
    map: SpacetimeMap,
    b: ActionPotential,
    u0: GridFunction,
}

/// Reconstructed flow map of smooth Burgers data up to half the breakdown time.
fn smooth_burgers(n: usize) -> SmoothCase {
    let spec = normalize(RawFlux::burgers(), Interval::new(1.5, 2.5).unwrap()).unwrap();
    let vel = Arc::new(velocity_law(&spec).unwrap());
    let b = potential_from_flux(&vel, vel.u_range.lo).unwrap();
    let rho0 = GridFunction::from_fn(n, 0.0, 1.0, Boundary::Periodic, |x| 2.0 + 0.5 * (2.0 * PI * x).sin()).unwrap();
    let t = 0.5 * breakdown_time(&spec, &rho0);
    let m = n / 4;
    let outs: Vec<f64> = (1..m).map(|k| t * k as f64 / m as f64).collect();
    let traj = solve_temple(&init_temple(vel.clone(), &rho0).unwrap(), t, 0.45, &outs).unwrap();
    let map = SpacetimeMap::from_flow_maps(&reconstruct(&traj).unwrap().maps).unwrap();
    let u0 = rho0.with_values(rho0.values.iter().map(|&r| vel.velocity(r)).collect());
    SmoothCase { map, b, u0 }
}

#[test]
fn reconstructed_map_is_extremal_against_linear_control() {
    let case = smooth_burgers(200);
    let zero = PerturbationField::zero(&case.map);
    assert_eq!(first_variation(&case.map, &case.b, &zero, 1e-3).unwrap(), 0.0);
    let report = extremality_study(&case.map, 1e-3, |m| action_value(m, &case.b)).unwrap();
    assert_eq!(report.extremal.len(), PERTURBATION_COUNT);
    assert!(report.min_ratio() >= 10.0, "per-perturbation ratio {}", report.min_ratio());
    assert!(report.ratio() >= 10.0);
}

#[test]
fn extremality_study_is_reproducible() {
    let case = smooth_burgers(64);
    let a = extremality_study(&case.map, 1e-3, |m| action_value(m, &case.b)).unwrap();
    let b = extremality_study(&case.map, 1e-3, |m| action_value(m, &case.b)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn conserved_quantity_residual_refines() {
    let r: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&n| {
            let case = smooth_burgers(n);
            conserved_quantity_residual(&case.map, &case.b, &case.u0).unwrap()
        })
        .collect();
    let order = (r[0] / r[2]).log2() / 2.0;
    assert!(order >= 0.8, "{r:?}");
    assert!(r[0] > r[1] && r[1] > r[2]);
}

#[test]
fn action_agrees_on_labels_and_on_image() {
    let mut gaps = Vec::new();
    for n in [100, 200] {
        let case = smooth_burgers(n);
        let on_labels = action_value(&case.map, &case.b).unwrap();
        let on_image = action_value_on_image(&case.map, &case.b).unwrap();
        gaps.push((on_labels - on_image).abs() / on_labels.abs());
    }
    assert!(gaps[1] <= 1e-3, "{gaps:?}");
    assert!(gaps[1] < gaps[0], "{gaps:?}");
}

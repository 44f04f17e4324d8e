use std::f64::consts::PI;
use std::sync::Arc;

use lagrangeflow_core::reference::dalembert;
use lagrangeflow_core::systems::*;
use lagrangeflow_core::variational::{extremality_study, node_values, PerturbationField, SpacetimeMap};
use lagrangeflow_core::{Boundary, GridFunction};

fn periodic(n: usize, f: impl Fn(f64) -> f64) -> GridFunction {
    GridFunction::from_fn(n, 0.0, 1.0, Boundary::Periodic, f).unwrap()
}

fn smooth_run(kind: SystemKind, p: &PressureLaw, n: usize) -> SystemTrajectory {
    let rho0 = periodic(n, |x| 1.0 + 0.2 * (2.0 * PI * x).sin());
    let u0 = periodic(n, |x| 0.05 * (2.0 * PI * x).cos());
    let s0 = SystemState::new(kind, &rho0, &u0).unwrap();
    let t = 0.2;
    let m = n / 4;
    let outs: Vec<f64> = (1..m).map(|k| t * k as f64 / m as f64).collect();
    solve_system(&s0, t, 0.45, p, &outs).unwrap()
}

#[test]
fn gas_shock_moves_at_rankine_hugoniot_speed() {
    // p = ρ², v = 1: p-system in (η, w); 2-shock from η = 0.8 to η = 1.
    let p = PressureLaw::power(1.0, 2.0);
    let (eta_l, eta_r) = (0.8, 1.0);
    let jump_p = p.p(1.0 / eta_r) - p.p(1.0 / eta_l);
    let s = (-jump_p / (eta_r - eta_l)).sqrt();
    let w_l = s * (eta_r - eta_l);
    let n = 400;
    let (x_shock, t) = (0.3, 0.3);
    let mesh = GridFunction::from_fn(n, 0.0, 1.0, Boundary::ConstantExtension, |_| 1.0).unwrap();
    let left = |x: f64| x < x_shock;
    let state = SystemState {
        eta: mesh.with_values((0..n).map(|i| if left(mesh.center(i)) { eta_l } else { eta_r }).collect()),
        w: mesh.with_values((0..n).map(|i| if left(mesh.center(i)) { w_l } else { 0.0 }).collect()),
        v: Arc::new(mesh.clone()),
        kind: SystemKind::Gas,
    };
    let traj = solve_system(&state, t, 0.45, &p, &[]).unwrap();
    let eta = &traj.states.last().unwrap().eta;
    let mid = 0.5 * (eta_l + eta_r);
    let i = eta.values.iter().position(|&e| e >= mid).unwrap();
    let (a, b) = (eta.values[i - 1], eta.values[i]);
    let found = eta.center(i - 1) + (mid - a) / (b - a) * eta.dx;
    let expect = x_shock + s * t;
    assert!((found - expect).abs() <= 2.0 * eta.dx, "shock at {found}, expected {expect}");
}

/// Eulerian isentropic gas `ρ_t + m_x = 0`, `m_t + (m²/ρ + p(ρ))_x = 0`, Rusanov.
fn eulerian_gas(rho: &GridFunction, u: &GridFunction, p: &PressureLaw, t_final: f64) -> GridFunction {
    let n = rho.len();
    let dx = rho.dx;
    let mut r = rho.values.clone();
    let mut m: Vec<f64> = r.iter().zip(&u.values).map(|(r, u)| r * u).collect();
    let flux = |r: f64, m: f64| [m, m * m / r + p.p(r)];
    let speed = |r: f64, m: f64| (m / r).abs() + p.p_prime(r).sqrt();
    let mut t = 0.0;
    while t < t_final {
        let lam = (0..n).map(|i| speed(r[i], m[i])).fold(0.0, f64::max);
        let dt = (0.45 * dx / lam).min(t_final - t);
        let f: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let j = (i + n - 1) % n;
                let (fl, fr) = (flux(r[j], m[j]), flux(r[i], m[i]));
                let a = speed(r[j], m[j]).max(speed(r[i], m[i]));
                [
                    0.5 * (fl[0] + fr[0]) - 0.5 * a * (r[i] - r[j]),
                    0.5 * (fl[1] + fr[1]) - 0.5 * a * (m[i] - m[j]),
                ]
            })
            .collect();
        for i in 0..n {
            let k = (i + 1) % n;
            r[i] -= dt / dx * (f[k][0] - f[i][0]);
            m[i] -= dt / dx * (f[k][1] - f[i][1]);
        }
        t += dt;
    }
    rho.with_values(r)
}

#[test]
fn gas_agrees_with_eulerian_isentropic_solver() {
    let p = PressureLaw::power(1.0, 2.0);
    let t = 0.2;
    let mut errs = Vec::new();
    for n in [200, 400] {
        let rho0 = periodic(n, |x| 1.0 + 0.2 * (2.0 * PI * x).sin());
        let u0 = periodic(n, |x| 0.1 * (2.0 * PI * x).cos());
        let s0 = SystemState::new(SystemKind::Gas, &rho0, &u0).unwrap();
        let traj = solve_system(&s0, t, 0.45, &p, &[]).unwrap();
        let maps = reconstruct_system(&traj).unwrap();
        let lag = recovered_system_density(&rho0, traj.states.last().unwrap(), maps.last().unwrap()).unwrap();
        let eul = eulerian_gas(&rho0, &u0, &p, t);
        let err = lag.l1_distance(&eul);
        assert!(err <= 2.0 * rho0.dx, "n = {n}: L1 = {err}");
        errs.push(err);
    }
    assert!(errs[0] / errs[1] >= 1.5, "{errs:?}");
}

fn dalembert_error(n: usize) -> f64 {
    let p = PressureLaw::power(1.0, 1.0);
    let pulse = |x: f64| 1e-3 * (-((x - 0.5) / 0.08).powi(2)).exp();
    let t = 0.3;
    let rho0 = periodic(n, |_| 1.0);
    let u0 = periodic(n, pulse);
    let s0 = SystemState::new(SystemKind::Nlwe, &rho0, &u0).unwrap();
    let traj = solve_system(&s0, t, 0.45, &p, &[]).unwrap();
    let last = traj.states.last().unwrap();
    (0..n)
        .map(|i| {
            let (eta, w) = dalembert(&pulse, 1.0, 1.0, rho0.center(i), t);
            ((last.eta.values[i] - eta).powi(2) + (last.w.values[i] - w).powi(2)) * rho0.dx
        })
        .sum::<f64>()
        .sqrt()
}

#[test]
fn nlwe_small_pulse_follows_dalembert() {
    let (coarse, fine) = (dalembert_error(200), dalembert_error(400));
    assert!(fine <= 1e-2, "L2 = {fine}");
    // first-order smearing dominates; the linearisation error is O(amplitude²)
    assert!(coarse / fine >= 1.7, "{coarse} -> {fine}");
}

#[test]
fn euler_lagrange_residuals_refine() {
    for (kind, p) in [
        (SystemKind::Gas, PressureLaw::power(1.0, 2.0)),
        (SystemKind::Nlwe, PressureLaw::power(1.0, 1.0)),
        (SystemKind::Nlwe, PressureLaw::power(1.0, 2.0)),
    ] {
        let r: Vec<f64> = [100, 200, 400]
            .iter()
            .map(|&n| euler_lagrange_residual(&smooth_run(kind, &p, n), &p).unwrap().max)
            .collect();
        assert!(r[1] / r[2] >= 1.7, "{kind:?} {}: {r:?}", p.name);
        assert!((r[0] / r[2]).log2() / 2.0 >= 0.8, "{kind:?} {}: {r:?}", p.name);
    }
}

#[test]
fn system_action_is_stationary_on_the_solution() {
    for (kind, p) in [
        (SystemKind::Gas, PressureLaw::power(1.0, 2.0)),
        (SystemKind::Nlwe, PressureLaw::power(1.0, 2.0)),
    ] {
        let n = 200;
        let traj = smooth_run(kind, &p, n);
        let map = SpacetimeMap::from_flow_maps(&reconstruct_system(&traj).unwrap()).unwrap();
        let q = node_values(&traj.states[0].v);
        let zero = PerturbationField::zero(&map);
        assert_eq!(system_first_variation(kind, &map, &q, &p, &zero, 1e-3).unwrap(), 0.0);
        let report = extremality_study(&map, 1e-3, |m| system_action(kind, m, &q, &p)).unwrap();
        assert!(report.ratio() >= 10.0, "{kind:?}: ratio {}", report.ratio());
    }
}
